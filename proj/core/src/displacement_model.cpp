#include "kdsm/displacement_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <Eigen/Cholesky>

#include "kdsm/errors.hpp"

namespace kdsm {

namespace {

struct Splat {
  int row[2];
  int col[2];
  double w[2][2];
};

Splat bilinear(const Vec2& uv, int height, int width) {
  const Vec2 px = uv_to_pixel(uv, height, width);
  Splat s{};
  const int c0 = std::min(static_cast<int>(std::floor(px.x())), width - 2);
  const int r0 = std::min(static_cast<int>(std::floor(px.y())), height - 2);
  const double fx = px.x() - c0;
  const double fy = px.y() - r0;
  s.col[0] = c0;
  s.col[1] = c0 + 1;
  s.row[0] = r0;
  s.row[1] = r0 + 1;
  s.w[0][0] = (1 - fy) * (1 - fx);
  s.w[0][1] = (1 - fy) * fx;
  s.w[1][0] = fy * (1 - fx);
  s.w[1][1] = fy * fx;
  return s;
}

void check_cloth(const ClothMesh& cloth) {
  if (cloth.mesh.uv.size() != cloth.num_vertices() || cloth.side.size() != cloth.num_vertices()) {
    throw ShapeMismatch("cloth needs uv and a side label per vertex");
  }
}

int channel_offset(ClothSide side) { return side == ClothSide::kFront ? 0 : 3; }

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated binary file");
  return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
  if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw FormatError("truncated binary file");
  }
}

constexpr char kModelMagic[8] = {'K', 'D', 'S', 'M', 'R', 'E', 'G', '1'};

}  // namespace

ClothImage ClothImage::zeros(int height, int width, int channels) {
  ClothImage img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                      static_cast<std::size_t>(channels),
                  0.0);
  return img;
}

std::size_t ImageMask::count(ClothSide side) const {
  const std::uint8_t bit = side == ClothSide::kFront ? 1 : 2;
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [&](std::uint8_t b) { return b & bit; }));
}

Vec2 uv_to_pixel(const Vec2& uv, int height, int width) {
  return {std::clamp(uv.x() * width, 0.0, width - 1.0), std::clamp(uv.y() * height, 0.0, height - 1.0)};
}

ImageMask coverage_mask(const ClothMesh& cloth, int size) {
  check_cloth(cloth);
  ImageMask mask;
  mask.height = mask.width = size;
  mask.bits.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0);
  for (std::size_t i = 0; i < cloth.num_vertices(); ++i) {
    const Splat s = bilinear(cloth.mesh.uv[i], size, size);
    const std::uint8_t bit = cloth.side[i] == ClothSide::kFront ? 1 : 2;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        if (s.w[a][b] > 0.0) {
          mask.bits[static_cast<std::size_t>(s.row[a]) * static_cast<std::size_t>(size) +
                    static_cast<std::size_t>(s.col[b])] |= bit;
        }
      }
    }
  }
  return mask;
}

ClothImage rasterize(const DisplacementField& field, const ClothMesh& cloth, int size) {
  check_cloth(cloth);
  if (field.d.size() != cloth.num_vertices()) throw ShapeMismatch("field and cloth sizes differ");
  ClothImage img = ClothImage::zeros(size, size, kImageChannels);
  std::vector<double> weight(static_cast<std::size_t>(size) * static_cast<std::size_t>(size) * 2, 0.0);
  for (std::size_t i = 0; i < cloth.num_vertices(); ++i) {
    const Splat s = bilinear(cloth.mesh.uv[i], size, size);
    const int off = channel_offset(cloth.side[i]);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double w = s.w[a][b];
        if (w <= 0.0) continue;
        for (int k = 0; k < 3; ++k) img.at(s.row[a], s.col[b], off + k) += w * field.d[i][k];
        weight[(static_cast<std::size_t>(s.row[a]) * static_cast<std::size_t>(size) +
                static_cast<std::size_t>(s.col[b])) *
                   2 +
               static_cast<std::size_t>(off / 3)] += w;
      }
    }
  }
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      for (int side = 0; side < 2; ++side) {
        const double w =
            weight[(static_cast<std::size_t>(r) * static_cast<std::size_t>(size) + static_cast<std::size_t>(c)) * 2 +
                   static_cast<std::size_t>(side)];
        if (w <= 0.0) continue;
        for (int k = 0; k < 3; ++k) img.at(r, c, 3 * side + k) /= w;
      }
    }
  }
  return img;
}

DisplacementField gather(const ClothImage& image, const ClothMesh& cloth, int pose_id) {
  check_cloth(cloth);
  if (image.channels != kImageChannels) throw ShapeMismatch("image must have 6 channels");
  DisplacementField field;
  field.pose_id = pose_id;
  field.d.assign(cloth.num_vertices(), Vec3::Zero());
  for (std::size_t i = 0; i < cloth.num_vertices(); ++i) {
    const Splat s = bilinear(cloth.mesh.uv[i], image.height, image.width);
    const int off = channel_offset(cloth.side[i]);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < 3; ++k) field.d[i][k] += s.w[a][b] * image.at(s.row[a], s.col[b], off + k);
      }
    }
  }
  return field;
}

Eigen::VectorXd pose_feature(const Pose& pose) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(pose_feature_size(pose.angles.size())));
  for (std::size_t j = 0; j < pose.angles.size(); ++j) {
    const Eigen::Matrix3d R = euler_rotation(pose.angles[j]);
    for (int c = 0; c < 2; ++c) {
      for (int r = 0; r < 3; ++r) f[static_cast<Eigen::Index>(6 * j + 3 * static_cast<std::size_t>(c) + static_cast<std::size_t>(r))] = R(r, c);
    }
  }
  return f;
}

Regressor Regressor::fit(std::span<const Eigen::VectorXd> features, std::span<const ClothImage> images,
                         const ImageMask& mask, double lambda, bool linear) {
  if (features.size() != images.size()) throw ShapeMismatch("feature and image counts differ");
  if (features.size() < 2) throw ShapeMismatch("training needs at least two examples");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  const Eigen::Index n = static_cast<Eigen::Index>(features.size());
  const Eigen::Index f = features[0].size();
  for (const auto& x : features) {
    if (x.size() != f) throw ShapeMismatch("pose features differ in length");
  }
  for (const auto& im : images) {
    if (im.height != mask.height || im.width != mask.width || im.channels != kImageChannels ||
        im.data.size() != static_cast<std::size_t>(im.height * im.width * im.channels)) {
      throw ShapeMismatch("image shape does not match mask");
    }
  }

  Regressor model;
  model.kind_ = linear ? "ridge" : "mean";
  model.lambda_ = linear ? lambda : 0.0;
  model.mask_ = mask;
  model.channels_ = kImageChannels;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      for (int side = 0; side < 2; ++side) {
        if (!mask.covers(r, c, side == 0 ? ClothSide::kFront : ClothSide::kBack)) continue;
        const std::size_t base = (static_cast<std::size_t>(r) * static_cast<std::size_t>(mask.width) +
                                  static_cast<std::size_t>(c)) *
                                 kImageChannels;
        for (int k = 0; k < 3; ++k) {
          model.output_index_.push_back(static_cast<std::uint32_t>(base + static_cast<std::size_t>(3 * side + k)));
        }
      }
    }
  }
  const Eigen::Index p = static_cast<Eigen::Index>(model.output_index_.size());

  Eigen::MatrixXd X(n, f);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = features[static_cast<std::size_t>(i)].transpose();
  model.feature_mean_ = X.colwise().mean().transpose();
  X.rowwise() -= model.feature_mean_.transpose();
  model.feature_scale_ = (X.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();
  for (Eigen::Index k = 0; k < f; ++k) {
    if (!(model.feature_scale_[k] > 1e-12)) model.feature_scale_[k] = 1.0;
  }
  X = X * model.feature_scale_.cwiseInverse().asDiagonal();

  Eigen::MatrixXd Y(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& data = images[static_cast<std::size_t>(i)].data;
    for (Eigen::Index o = 0; o < p; ++o) Y(i, o) = data[model.output_index_[static_cast<std::size_t>(o)]];
  }
  model.intercept_ = Y.colwise().mean().transpose();
  if (!linear) {
    model.coef_ = Eigen::MatrixXd::Zero(f, p);
    return model;
  }
  Y.rowwise() -= model.intercept_.transpose();
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd rhs = X.transpose() * Y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("ridge normal equations are not factorizable");
  model.coef_ = ldlt.solve(rhs);
  return model;
}

Regressor Regressor::train(std::span<const Eigen::VectorXd> features, std::span<const ClothImage> images,
                           const ImageMask& mask, double lambda) {
  return fit(features, images, mask, lambda, true);
}

Regressor Regressor::mean_baseline(std::span<const Eigen::VectorXd> features, std::span<const ClothImage> images,
                                   const ImageMask& mask) {
  return fit(features, images, mask, 0.0, false);
}

ClothImage Regressor::infer(const Eigen::VectorXd& feature) const {
  if (feature.size() != feature_mean_.size()) throw ShapeMismatch("pose feature length does not match model");
  const Eigen::VectorXd x = (feature - feature_mean_).cwiseQuotient(feature_scale_);
  const Eigen::VectorXd y = intercept_ + coef_.transpose() * x;
  ClothImage img = ClothImage::zeros(mask_.height, mask_.width, channels_);
  for (std::size_t o = 0; o < output_index_.size(); ++o) img.data[output_index_[o]] = y[static_cast<Eigen::Index>(o)];
  return img;
}

void Regressor::save(std::ostream& out) const {
  out.write(kModelMagic, sizeof(kModelMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kind_.size()));
  out.write(kind_.data(), static_cast<std::streamsize>(kind_.size()));
  put<double>(out, lambda_);
  put<std::int32_t>(out, mask_.height);
  put<std::int32_t>(out, mask_.width);
  put<std::int32_t>(out, channels_);
  out.write(reinterpret_cast<const char*>(mask_.bits.data()), static_cast<std::streamsize>(mask_.bits.size()));
  put<std::uint64_t>(out, output_index_.size());
  out.write(reinterpret_cast<const char*>(output_index_.data()),
            static_cast<std::streamsize>(output_index_.size() * sizeof(std::uint32_t)));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(feature_mean_.size()));
  put_doubles(out, feature_mean_.data(), static_cast<std::size_t>(feature_mean_.size()));
  put_doubles(out, feature_scale_.data(), static_cast<std::size_t>(feature_scale_.size()));
  put_doubles(out, coef_.data(), static_cast<std::size_t>(coef_.size()));
  put_doubles(out, intercept_.data(), static_cast<std::size_t>(intercept_.size()));
  if (!out) throw FormatError("failed writing model");
}

void Regressor::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  save(out);
}

Regressor Regressor::load(std::istream& in) {
  char magic[sizeof(kModelMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw FormatError("not a kdsm regressor file");
  }
  Regressor m;
  const auto kind_len = get<std::uint32_t>(in);
  if (kind_len > 64) throw FormatError("bad model kind");
  m.kind_.resize(kind_len);
  if (!in.read(m.kind_.data(), kind_len)) throw FormatError("truncated model");
  if (m.kind_ != "ridge" && m.kind_ != "mean") throw FormatError("unknown model kind " + m.kind_);
  m.lambda_ = get<double>(in);
  m.mask_.height = get<std::int32_t>(in);
  m.mask_.width = get<std::int32_t>(in);
  m.channels_ = get<std::int32_t>(in);
  if (m.mask_.height <= 1 || m.mask_.width <= 1 || m.mask_.height > 4096 || m.mask_.width > 4096 ||
      m.channels_ != kImageChannels) {
    throw FormatError("bad model image shape");
  }
  m.mask_.bits.resize(static_cast<std::size_t>(m.mask_.height) * static_cast<std::size_t>(m.mask_.width));
  if (!in.read(reinterpret_cast<char*>(m.mask_.bits.data()), static_cast<std::streamsize>(m.mask_.bits.size()))) {
    throw FormatError("truncated model");
  }
  const auto p = get<std::uint64_t>(in);
  if (p > m.mask_.bits.size() * kImageChannels) throw FormatError("bad model output count");
  m.output_index_.resize(p);
  if (!in.read(reinterpret_cast<char*>(m.output_index_.data()),
               static_cast<std::streamsize>(p * sizeof(std::uint32_t)))) {
    throw FormatError("truncated model");
  }
  const auto f = get<std::uint64_t>(in);
  if (f > 100000) throw FormatError("bad model feature count");
  const auto fi = static_cast<Eigen::Index>(f);
  const auto pi = static_cast<Eigen::Index>(p);
  m.feature_mean_.resize(fi);
  m.feature_scale_.resize(fi);
  m.coef_.resize(fi, pi);
  m.intercept_.resize(pi);
  get_doubles(in, m.feature_mean_.data(), f);
  get_doubles(in, m.feature_scale_.data(), f);
  get_doubles(in, m.coef_.data(), f * p);
  get_doubles(in, m.intercept_.data(), p);
  return m;
}

Regressor Regressor::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return load(in);
}

Reconstruction infer_cloth(const ClothImage& image, const ClothMesh& cloth, const TetLocator& rest_kdsm,
                           const SkinWeights& kdsm_weights, std::span<const Affine> skinning,
                           const ReconstructOptions& options) {
  const DisplacementField d = gather(image, cloth);
  return reconstruct(d, cloth.mesh.vertices, rest_kdsm, kdsm_weights, skinning, options);
}

void write_image(std::ostream& out, const ClothImage& image) {
  out.write("KDIM", 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.channels));
  put_doubles(out, image.data.data(), image.data.size());
  if (!out) throw FormatError("failed writing image");
}

void write_image(const std::string& path, const ClothImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_image(out, image);
}

ClothImage read_image(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "KDIM", 4) != 0) throw FormatError("not a cloth image file");
  const auto h = get<std::uint32_t>(in);
  const auto w = get<std::uint32_t>(in);
  const auto c = get<std::uint32_t>(in);
  if (h < 2 || w < 2 || h > 4096 || w > 4096 || c == 0 || c > 64) throw FormatError("bad image dims");
  ClothImage img = ClothImage::zeros(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  get_doubles(in, img.data.data(), img.data.size());
  return img;
}

ClothImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_image(in);
}

void write_mask(const std::string& path, const ImageMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(mask.bits.data()), static_cast<std::streamsize>(mask.bits.size()));
  if (!out) throw FormatError("failed writing " + path);
}

ImageMask read_mask(const std::string& path, int height, int width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  ImageMask mask;
  mask.height = height;
  mask.width = width;
  mask.bits.resize(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  if (!in.read(reinterpret_cast<char*>(mask.bits.data()), static_cast<std::streamsize>(mask.bits.size()))) {
    throw FormatError("truncated mask " + path);
  }
  return mask;
}

}  // namespace kdsm

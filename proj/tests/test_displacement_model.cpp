#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "kdsm/displacement_model.hpp"
#include "kdsm/errors.hpp"
#include "kdsm/synthetic.hpp"

using namespace kdsm;

namespace {

const ClothMesh& shirt() {
  static const ClothMesh c = make_shirt(make_mannequin().capsules);
  return c;
}

DisplacementField smooth_field(const ClothMesh& cloth) {
  DisplacementField f;
  for (const auto& p : cloth.mesh.vertices) {
    f.d.emplace_back(std::sin(p.x() / 15.0) + 0.5, std::cos(p.y() / 20.0), 0.3 * std::sin((p.x() + p.y()) / 25.0));
  }
  return f;
}

double rms(const std::vector<Vec3>& v) {
  double s = 0;
  for (const auto& x : v) s += x.squaredNorm();
  return std::sqrt(s / static_cast<double>(v.size()));
}

ImageMask small_mask(int size, std::uint64_t seed) {
  ImageMask m;
  m.height = m.width = size;
  m.bits.assign(static_cast<std::size_t>(size * size), 0);
  std::mt19937_64 rng(seed);
  for (auto& b : m.bits) b = static_cast<std::uint8_t>(rng() % 4);
  return m;
}

// Masked channels of an image, in a fixed order.
std::vector<double> masked_values(const ClothImage& im, const ImageMask& m) {
  std::vector<double> out;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      for (int side = 0; side < 2; ++side)
        if (m.covers(r, c, side ? ClothSide::kBack : ClothSide::kFront))
          for (int k = 0; k < 3; ++k) out.push_back(im.at(r, c, 3 * side + k));
  return out;
}

bool unmasked_zero(const ClothImage& im, const ImageMask& m) {
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      for (int side = 0; side < 2; ++side)
        if (!m.covers(r, c, side ? ClothSide::kBack : ClothSide::kFront))
          for (int k = 0; k < 3; ++k)
            if (im.at(r, c, 3 * side + k) != 0.0) return false;
  return true;
}

// Images whose masked entries are A * feature + b.
void linear_dataset(std::size_t n, int fdim, const ImageMask& mask, std::uint64_t seed,
                    std::vector<Eigen::VectorXd>* features, std::vector<ClothImage>* images, Eigen::MatrixXd* A,
                    Eigen::VectorXd* b) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  const std::size_t outputs = masked_values(ClothImage::zeros(mask.height, mask.width), mask).size();
  *A = Eigen::MatrixXd(static_cast<Eigen::Index>(outputs), fdim);
  *b = Eigen::VectorXd(static_cast<Eigen::Index>(outputs));
  for (Eigen::Index i = 0; i < A->size(); ++i) A->data()[i] = g(rng);
  for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = g(rng);
  for (std::size_t s = 0; s < n; ++s) {
    Eigen::VectorXd x(fdim);
    for (int k = 0; k < fdim; ++k) x[k] = g(rng);
    const Eigen::VectorXd y = *A * x + *b;
    ClothImage im = ClothImage::zeros(mask.height, mask.width);
    Eigen::Index o = 0;
    for (int r = 0; r < mask.height; ++r)
      for (int c = 0; c < mask.width; ++c)
        for (int side = 0; side < 2; ++side)
          if (mask.covers(r, c, side ? ClothSide::kBack : ClothSide::kFront))
            for (int k = 0; k < 3; ++k) im.at(r, c, 3 * side + k) = y[o++];
    features->push_back(x);
    images->push_back(std::move(im));
  }
}

}  // namespace

TEST(Rasterize, ZeroFieldZeroImage) {
  DisplacementField f;
  f.d.assign(shirt().num_vertices(), Vec3::Zero());
  const ClothImage im = rasterize(f, shirt());
  EXPECT_EQ(im.height, kImageSize);
  EXPECT_EQ(im.channels, kImageChannels);
  for (double v : im.data) EXPECT_EQ(v, 0.0);
  const DisplacementField back = gather(ClothImage::zeros(), shirt());
  for (const auto& d : back.d) EXPECT_EQ(d, Vec3::Zero());
}

TEST(Rasterize, VertexOnPixelCenter) {
  ClothMesh c;
  c.mesh.vertices = {Vec3::Zero()};
  c.mesh.uv = {Vec2(0.5, 0.5)};
  c.side = {ClothSide::kFront};
  DisplacementField f;
  f.d = {Vec3(1, 2, 3)};
  const ClothImage im = rasterize(f, c);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(im.at(64, 64, k), k + 1.0);
  double others = 0;
  for (double v : im.data) others += std::abs(v);
  EXPECT_EQ(others, 6.0);
  const ImageMask m = coverage_mask(c);
  EXPECT_EQ(m.count(ClothSide::kFront), 1u);
  EXPECT_EQ(m.count(ClothSide::kBack), 0u);
  c.side = {ClothSide::kBack};
  const ClothImage back = rasterize(f, c);
  EXPECT_EQ(back.at(64, 64, 5), 3.0);
  EXPECT_EQ(back.at(64, 64, 2), 0.0);
}

TEST(Rasterize, RoundTripWithinFivePercent) {
  const DisplacementField f = smooth_field(shirt());
  const DisplacementField g = gather(rasterize(f, shirt()), shirt());
  std::vector<Vec3> diff(f.d.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = g.d[i] - f.d[i];
  EXPECT_LE(rms(diff), 0.05 * rms(f.d));
}

TEST(Rasterize, UncoveredPixelsStayZero) {
  const ClothImage im = rasterize(smooth_field(shirt()), shirt());
  EXPECT_TRUE(unmasked_zero(im, coverage_mask(shirt())));
}

TEST(Gather, ConstantOnMask) {
  const ImageMask m = coverage_mask(shirt());
  ClothImage im = ClothImage::zeros();
  const Vec3 front(1.25, -3, 0.5), back(2, 0, -1);
  for (int r = 0; r < im.height; ++r)
    for (int c = 0; c < im.width; ++c)
      for (int k = 0; k < 3; ++k) {
        if (m.covers(r, c, ClothSide::kFront)) im.at(r, c, k) = front[k];
        if (m.covers(r, c, ClothSide::kBack)) im.at(r, c, 3 + k) = back[k];
      }
  const DisplacementField f = gather(im, shirt());
  for (std::size_t i = 0; i < f.d.size(); ++i) {
    const Vec3& want = shirt().side[i] == ClothSide::kFront ? front : back;
    EXPECT_LE((f.d[i] - want).norm(), 1e-12);
  }
}

TEST(Gather, ShapeChecks) {
  ClothMesh c = shirt();
  c.side.pop_back();
  EXPECT_THROW(gather(ClothImage::zeros(), c), ShapeMismatch);
  DisplacementField f;
  f.d.assign(3, Vec3::Zero());
  EXPECT_THROW(rasterize(f, shirt()), ShapeMismatch);
}

TEST(PoseFeature, RestAndSize) {
  const Pose rest = Pose::rest(15);
  const Eigen::VectorXd f = pose_feature(rest);
  ASSERT_EQ(static_cast<std::size_t>(f.size()), pose_feature_size(15));
  EXPECT_EQ(pose_feature_size(15), 90u);
  for (int j = 0; j < 15; ++j) {
    const Eigen::VectorXd expect = (Eigen::VectorXd(6) << 1, 0, 0, 0, 1, 0).finished();
    EXPECT_EQ(f.segment(6 * j, 6), expect);
  }
}

TEST(Train, RealizableLinearTarget) {
  const ImageMask mask = small_mask(8, 1);
  std::vector<Eigen::VectorXd> x;
  std::vector<ClothImage> y;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  linear_dataset(60, 10, mask, 2, &x, &y, &A, &b);
  const Regressor model = Regressor::train(x, y, mask, 1e-12);
  double loss = 0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    const auto got = masked_values(model.infer(x[s]), mask);
    const auto want = masked_values(y[s], mask);
    for (std::size_t k = 0; k < got.size(); ++k, ++count) loss += (got[k] - want[k]) * (got[k] - want[k]);
  }
  EXPECT_LT(loss / static_cast<double>(count), 1e-8);
  EXPECT_EQ(model.output_size(), masked_values(y[0], mask).size());
  EXPECT_EQ(model.feature_size(), 10u);
}

TEST(Train, RepeatedExampleIsReproduced) {
  const ImageMask mask = small_mask(8, 3);
  std::vector<Eigen::VectorXd> x;
  std::vector<ClothImage> y;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  linear_dataset(1, 6, mask, 4, &x, &y, &A, &b);
  const std::vector<Eigen::VectorXd> xs(5, x[0]);
  const std::vector<ClothImage> ys(5, y[0]);
  const Regressor model = Regressor::train(xs, ys, mask);
  const auto got = masked_values(model.infer(x[0]), mask);
  const auto want = masked_values(y[0], mask);
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-6);
}

TEST(Train, MaskedPixelsStayZeroAndDeterministic) {
  const ImageMask mask = small_mask(8, 5);
  std::vector<Eigen::VectorXd> x;
  std::vector<ClothImage> y;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  linear_dataset(30, 7, mask, 6, &x, &y, &A, &b);
  // Noise outside the mask must not leak into the model.
  for (auto& im : y)
    for (auto& v : im.data)
      if (v == 0.0) v = 99.0;
  const Regressor a = Regressor::train(x, y, mask), c = Regressor::train(x, y, mask);
  Eigen::VectorXd q = Eigen::VectorXd::Constant(7, 0.3);
  const ClothImage out = a.infer(q);
  EXPECT_TRUE(unmasked_zero(out, mask));
  EXPECT_EQ(out.data, c.infer(q).data);
}

TEST(Train, MeanBaseline) {
  const ImageMask mask = small_mask(8, 7);
  std::vector<Eigen::VectorXd> x;
  std::vector<ClothImage> y;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  linear_dataset(20, 4, mask, 8, &x, &y, &A, &b);
  const Regressor m = Regressor::mean_baseline(x, y, mask);
  EXPECT_EQ(m.kind(), "mean");
  std::vector<double> mean(masked_values(y[0], mask).size(), 0.0);
  for (const auto& im : y) {
    const auto v = masked_values(im, mask);
    for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k] / static_cast<double>(y.size());
  }
  const auto p1 = masked_values(m.infer(x[0]), mask), p2 = masked_values(m.infer(x[7]), mask);
  for (std::size_t k = 0; k < mean.size(); ++k) {
    EXPECT_NEAR(p1[k], mean[k], 1e-12);
    EXPECT_EQ(p1[k], p2[k]);
  }
}

TEST(Train, ShapeErrors) {
  const ImageMask mask = small_mask(8, 9);
  std::vector<Eigen::VectorXd> x = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  std::vector<ClothImage> y = {ClothImage::zeros(8, 8)};
  EXPECT_THROW(Regressor::train(x, y, mask), ShapeMismatch);
  y.push_back(ClothImage::zeros(16, 16));
  EXPECT_THROW(Regressor::train(x, y, mask), ShapeMismatch);
  y.pop_back();
  y.push_back(ClothImage::zeros(8, 8));
  x[1] = Eigen::VectorXd::Zero(4);
  EXPECT_THROW(Regressor::train(x, y, mask), ShapeMismatch);
  x.pop_back();
  y.pop_back();
  EXPECT_THROW(Regressor::train(x, y, mask), ShapeMismatch);
}

TEST(ModelIo, RoundTrip) {
  const ImageMask mask = small_mask(8, 10);
  std::vector<Eigen::VectorXd> x;
  std::vector<ClothImage> y;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  linear_dataset(25, 5, mask, 11, &x, &y, &A, &b);
  const Regressor m = Regressor::train(x, y, mask, 0.1);
  std::stringstream ss;
  m.save(ss);
  const Regressor r = Regressor::load(ss);
  EXPECT_EQ(r.kind(), "ridge");
  EXPECT_EQ(r.lambda(), 0.1);
  EXPECT_EQ(r.mask().bits, mask.bits);
  for (const auto& q : x) EXPECT_EQ(r.infer(q).data, m.infer(q).data);
  std::stringstream bad("not a model at all");
  EXPECT_THROW(Regressor::load(bad), FormatError);
  EXPECT_THROW(m.infer(Eigen::VectorXd::Zero(2)), ShapeMismatch);
}

TEST(ImageIo, RoundTrip) {
  const ClothImage im = rasterize(smooth_field(shirt()), shirt());
  std::stringstream ss;
  write_image(ss, im);
  EXPECT_EQ(ss.str().size(), 16 + im.data.size() * sizeof(double));
  const ClothImage r = read_image(ss);
  EXPECT_EQ(r.data, im.data);
  std::stringstream bad("KDIX");
  EXPECT_THROW(read_image(bad), FormatError);

  const auto dir = std::filesystem::temp_directory_path() / "kdsm_mask_test";
  std::filesystem::create_directories(dir);
  const ImageMask m = coverage_mask(shirt());
  write_mask((dir / "mask.bin").string(), m);
  EXPECT_EQ(read_mask((dir / "mask.bin").string()).bits, m.bits);
  std::filesystem::remove_all(dir);
}

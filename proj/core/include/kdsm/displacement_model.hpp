#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kdsm/embedding.hpp"
#include "kdsm/geometry.hpp"
#include "kdsm/skinning.hpp"

namespace kdsm {

inline constexpr int kImageSize = 128;
inline constexpr int kImageChannels = 6;

/// Front/back displacement image: channels 0-2 front, 3-5 back (cm).
/// Row-major, channel-last.
struct ClothImage {
  int height = kImageSize;
  int width = kImageSize;
  int channels = kImageChannels;
  std::vector<double> data;

  static ClothImage zeros(int height = kImageSize, int width = kImageSize, int channels = kImageChannels);
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(ch);
  }
  double& at(int row, int col, int ch) { return data[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return data[index(row, col, ch)]; }
};

/// Per-pixel coverage: bit 0 front texels, bit 1 back texels.
struct ImageMask {
  int height = kImageSize;
  int width = kImageSize;
  std::vector<std::uint8_t> bits;

  bool covers(int row, int col, ClothSide side) const {
    const std::uint8_t bit = side == ClothSide::kFront ? 1 : 2;
    return (bits[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)] &
            bit) != 0;
  }
  std::size_t count(ClothSide side) const;
};

/// Continuous pixel coordinates of uv: (u * width, v * height), clamped to
/// the pixel-center range so pixel (r, c) has its center at (c, r).
Vec2 uv_to_pixel(const Vec2& uv, int height, int width);

/// Pixels receiving nonzero bilinear splat weight from some cloth vertex.
ImageMask coverage_mask(const ClothMesh& cloth, int size = kImageSize);

/// Each vertex splats its displacement to the four bilinear pixels around
/// its uv on its side; pixel values are weight-normalized averages.
ClothImage rasterize(const DisplacementField& field, const ClothMesh& cloth, int size = kImageSize);

/// Bilinear sample of the image at each vertex's uv on its side.
DisplacementField gather(const ClothImage& image, const ClothMesh& cloth, int pose_id = 0);

/// Dimension of pose_feature for a skeleton with `num_joints` joints.
inline std::size_t pose_feature_size(std::size_t num_joints) { return 6 * num_joints; }

/// First two columns of every joint's local rotation matrix.
Eigen::VectorXd pose_feature(const Pose& pose);

/// Multi-output ridge regression from a standardized pose feature to the
/// masked pixels, with an unpenalized intercept.
class Regressor {
 public:
  Regressor() = default;

  static Regressor train(std::span<const Eigen::VectorXd> features, std::span<const ClothImage> images,
                         const ImageMask& mask, double lambda = 1e-3);

  /// Training-mean image regardless of the input (baseline).
  static Regressor mean_baseline(std::span<const Eigen::VectorXd> features, std::span<const ClothImage> images,
                                 const ImageMask& mask);

  ClothImage infer(const Eigen::VectorXd& feature) const;

  const std::string& kind() const { return kind_; }
  std::size_t feature_size() const { return static_cast<std::size_t>(feature_mean_.size()); }
  std::size_t output_size() const { return output_index_.size(); }
  double lambda() const { return lambda_; }
  const ImageMask& mask() const { return mask_; }

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static Regressor load(std::istream& in);
  static Regressor load(const std::string& path);

 private:
  static Regressor fit(std::span<const Eigen::VectorXd> features, std::span<const ClothImage> images,
                       const ImageMask& mask, double lambda, bool linear);

  std::string kind_ = "ridge";
  double lambda_ = 0.0;
  ImageMask mask_;
  int channels_ = kImageChannels;
  /// Flat image index of every output.
  std::vector<std::uint32_t> output_index_;
  Eigen::VectorXd feature_mean_;
  Eigen::VectorXd feature_scale_;
  /// features x outputs.
  Eigen::MatrixXd coef_;
  Eigen::VectorXd intercept_;
};

/// Reconstructed cloth for a pose from a predicted image: gather, add the
/// rest cloth, re-embed in the rest KDSM and skin.
Reconstruction infer_cloth(const ClothImage& image, const ClothMesh& cloth, const TetLocator& rest_kdsm,
                           const SkinWeights& kdsm_weights, std::span<const Affine> skinning,
                           const ReconstructOptions& options = {});

// 16-byte header: "KDIM" then uint32 height, width, channels; then doubles.
void write_image(std::ostream& out, const ClothImage& image);
void write_image(const std::string& path, const ClothImage& image);
ClothImage read_image(std::istream& in);
ClothImage read_image(const std::string& path);

// Raw height*width bytes.
void write_mask(const std::string& path, const ImageMask& mask);
ImageMask read_mask(const std::string& path, int height = kImageSize, int width = kImageSize);

}  // namespace kdsm

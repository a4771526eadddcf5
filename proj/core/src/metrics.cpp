#include "kdsm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "kdsm/errors.hpp"

namespace kdsm {

MaxAvg delta_d_stats(const DisplacementField& field, std::span<const Edge> edges) {
  MaxAvg out;
  if (edges.empty()) return out;
  double sum = 0.0;
  for (const auto& [a, b] : edges) {
    const double n = (field.d[static_cast<std::size_t>(a)] - field.d[static_cast<std::size_t>(b)]).norm();
    out.max = std::max(out.max, n);
    sum += n;
  }
  out.avg = sum / static_cast<double>(edges.size());
  return out;
}

MaxAvg vertex_error(std::span<const Vec3> predicted, std::span<const Vec3> gt) {
  if (predicted.size() != gt.size()) throw ShapeMismatch("vertex_error: predicted and gt sizes differ");
  MaxAvg out;
  if (gt.empty()) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double e = (predicted[i] - gt[i]).norm();
    out.max = std::max(out.max, e);
    sum += e;
  }
  out.avg = sum / static_cast<double>(gt.size());
  return out;
}

double volume_error(std::span<const Vec3> predicted, std::span<const Vec3> gt, std::span<const Triangle> triangles) {
  if (predicted.size() != gt.size()) throw ShapeMismatch("volume_error: predicted and gt sizes differ");
  TriangleMesh a{{predicted.begin(), predicted.end()}, {triangles.begin(), triangles.end()}, {}};
  TriangleMesh b{{gt.begin(), gt.end()}, {triangles.begin(), triangles.end()}, {}};
  return std::abs(capped_mesh_volume(a) - capped_mesh_volume(b));
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

}  // namespace kdsm

#pragma once

#include <span>
#include <vector>

#include "kdsm/embedding.hpp"
#include "kdsm/geometry.hpp"

namespace kdsm {

struct MaxAvg {
  double max = 0.0;
  double avg = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Norm of d_a - d_b over the undirected edges.
MaxAvg delta_d_stats(const DisplacementField& field, std::span<const Edge> edges);

/// Per-vertex Euclidean distances. Throws ShapeMismatch on unequal lengths.
MaxAvg vertex_error(std::span<const Vec3> predicted, std::span<const Vec3> gt);

/// |capped volume(predicted) - capped volume(gt)| with shared topology.
double volume_error(std::span<const Vec3> predicted, std::span<const Vec3> gt, std::span<const Triangle> triangles);

/// Population standard deviation.
MeanStd mean_std(std::span<const double> values);

}  // namespace kdsm

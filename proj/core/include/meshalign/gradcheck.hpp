#pragma once

#include <cstdint>
#include <vector>

#include "meshalign/hra.hpp"

namespace meshalign {

struct GradCheckConfig {
  Constraint constraint = Constraint::Color;
  double tolerance = 1e-2;
  int samples = 200;
  std::uint64_t seed = 1;
  // Central-difference step as a fraction of the bounding-box diagonal.
  double step_fraction = 1e-3;
  // Coordinates with a smaller analytic gradient are not sampled.
  double min_gradient = 1e-6;
};

struct CoordinateCheck {
  int vertex = 0;
  int axis = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  Constraint constraint = Constraint::Color;
  double step = 0.0;
  int pixels = 0;
  int tested = 0;
  int passed = 0;
  double max_rel_error = 0.0;
  double median_rel_error = 0.0;
  std::vector<CoordinateCheck> coordinates;
  // Filled for the color constraint when a mask is given.
  bool mask_checked = false;
  double masked_texel_analytic_max = 0.0;
  double masked_loss_change = 0.0;
  double masked_vertex_grad_change = 0.0;

  [[nodiscard]] double pass_rate() const { return tested ? static_cast<double>(passed) / tested : 0.0; }
};

/// Compares vertex gradients of one constraint against central finite
/// differences. The L1 terms are evaluated on pixels away from silhouettes
/// and internal edges (3x3 neighborhood on one face) with residual signs
/// frozen at `mesh`, the loss whose gradient the analytic path returns.
/// With a mask, also checks that masked texels have no influence.
GradCheckReport grad_check(const TriangleMesh& mesh, const ViewSet& views, const GradCheckConfig& cfg,
                           const MaskImage* mask = nullptr);

} // namespace meshalign

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "meshalign/hra.hpp"
#include "meshalign/mesh.hpp"

namespace meshalign {

struct PhaseConfig {
  double lambda = 200.0;
  int iterations = 300;
  bool remesh_before = false;
  // Target average edge length relative to the current one when remeshing.
  double edge_factor = 0.70710678118654752;
};

struct RegistrationConfig {
  std::vector<PhaseConfig> phases = default_phases();
  // Step size as a fraction of the template bounding-box diagonal.
  double eta_fraction = 0.1;
  // Phase p starts at eta * eta_phase_decay^p.
  double eta_phase_decay = 0.6;
  // Within a phase the step decays exponentially to this fraction.
  double eta_final_ratio = 0.1;
  // Decay of the per-constraint running second moment used to normalize
  // preconditioned gradients.
  double moment_decay = 0.999;
  // Warn when a constraint's loss has not improved over this many iterations.
  int plateau_window = 200;
  // Write the current mesh every k iterations (0 disables).
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  /// Five phases, weights 200/120/80/50/50, 300 iterations each, remeshing
  /// before phases 2 to 5.
  static std::vector<PhaseConfig> default_phases();
  /// One phase with no remeshing and the whole default budget.
  static RegistrationConfig single_phase(double lambda = 200.0, int iterations = 1500);

  [[nodiscard]] int budget() const;
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  int phase = 0;
  Constraint constraint = Constraint::Color;
  double loss = 0.0;
  double grad_inf = 0.0;
  int vertices = 0;
  double eta = 0.0;
  double wall_ms = 0.0;
};

struct RegistrationResult {
  TriangleMesh mesh;
  std::vector<IterationRecord> log;
  std::vector<std::string> warnings;
};

using IterationCallback = std::function<void(const IterationRecord&, const TriangleMesh&)>;

/// Multiscale Laplacian-preconditioned registration of a textured template
/// to the views. Each iteration evaluates the scheduled constraint and takes
/// one preconditioned step; the mesh is refined before flagged phases.
RegistrationResult run_registration(const TriangleMesh& template_mesh, const ViewSet& views,
                                    const RegistrationConfig& cfg, const HraConfig& hra_cfg,
                                    const IterationCallback& on_iteration = {});

/// CSV with columns iteration,phase,constraint,loss,grad_inf,n_vertices,wall_ms.
void write_log_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& log,
                   bool include_timing = true);

} // namespace meshalign

#include "meshalign/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/laplacian.hpp"
#include "meshalign/obj_io.hpp"
#include "meshalign/optim.hpp"
#include "meshalign/remesh.hpp"

namespace meshalign {

std::vector<PhaseConfig> RegistrationConfig::default_phases() {
  const double lambdas[5] = {200.0, 120.0, 80.0, 50.0, 50.0};
  std::vector<PhaseConfig> out;
  for (int i = 0; i < 5; ++i) {
    PhaseConfig p;
    p.lambda = lambdas[i];
    p.iterations = 300;
    p.remesh_before = i > 0;
    out.push_back(p);
  }
  return out;
}

RegistrationConfig RegistrationConfig::single_phase(double lambda, int iterations) {
  RegistrationConfig cfg;
  cfg.phases = {PhaseConfig{lambda, iterations, false}};
  return cfg;
}

int RegistrationConfig::budget() const {
  int n = 0;
  for (const PhaseConfig& p : phases) {
    n += p.iterations;
  }
  return n;
}

void RegistrationConfig::validate() const {
  if (phases.empty()) {
    throw ConfigError("registration needs at least one phase");
  }
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const PhaseConfig& p = phases[i];
    if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) {
      throw ConfigError(fmt::format("phase {}: lambda must be positive, got {}", i + 1, p.lambda));
    }
    if (p.iterations < 0) {
      throw ConfigError(fmt::format("phase {}: negative iteration count", i + 1));
    }
    if (p.remesh_before && !(p.edge_factor > 0.0 && p.edge_factor < 1.0)) {
      throw ConfigError(fmt::format("phase {}: edge factor must lie in (0, 1)", i + 1));
    }
  }
  if (!(eta_fraction > 0.0)) {
    throw ConfigError("eta fraction must be positive");
  }
  if (!(eta_phase_decay > 0.0) || !(eta_final_ratio > 0.0)) {
    throw ConfigError("step-size decay factors must be positive");
  }
  if (!(moment_decay >= 0.0 && moment_decay < 1.0)) {
    throw ConfigError("moment decay must lie in [0, 1)");
  }
  if (checkpoint_every < 0) {
    throw ConfigError("checkpoint interval must be non-negative");
  }
}

namespace {

// Running second moment of the largest preconditioned gradient entry, one
// per constraint; turns the raw loss scale into a unitless step direction.
struct MomentScale {
  double beta;
  double v = 0.0;
  int count = 0;

  double update(double max_sq) {
    v = beta * v + (1.0 - beta) * max_sq;
    ++count;
    const double vhat = v / (1.0 - std::pow(beta, count));
    return vhat > 0.0 ? 1.0 / std::sqrt(vhat) : 0.0;
  }
};

} // namespace

RegistrationResult run_registration(const TriangleMesh& template_mesh, const ViewSet& views,
                                    const RegistrationConfig& cfg, const HraConfig& hra_cfg,
                                    const IterationCallback& on_iteration) {
  cfg.validate();
  hra_cfg.validate();
  const bool needs_texture =
      std::find(hra_cfg.rotation.begin(), hra_cfg.rotation.end(), Constraint::Color) != hra_cfg.rotation.end();
  if (needs_texture && (!template_mesh.has_uvs() || !template_mesh.texture)) {
    throw ConfigError("registration with the color constraint needs a textured template");
  }
  if (views.size() == 0) {
    throw ConfigError("registration needs at least one view");
  }
  if (cfg.checkpoint_every > 0) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
  }

  RegistrationResult result;
  OptState state;
  state.mesh = template_mesh;
  // Refinement is decided on the undeformed template so every target gets
  // the same connectivity and UV pool.
  TriangleMesh rest = template_mesh;
  const double eta0 = set_eta(template_mesh, cfg.eta_fraction);
  int global = 0;

  for (std::size_t p = 0; p < cfg.phases.size(); ++p) {
    const PhaseConfig& phase = cfg.phases[p];
    state.phase = static_cast<int>(p);
    if (phase.remesh_before) {
      RefinementMap map;
      rest = remesh_refine(rest, phase.edge_factor, &map);
      std::vector<Vec3> moved = apply_refinement(map, state.mesh.vertices);
      state.mesh = rest;
      state.mesh.vertices = std::move(moved);
    }
    const MeshTopology topo = build_topology(state.mesh);
    const LaplacianPrecond precond(cotangent_laplacian(state.mesh), phase.lambda);
    reset_latent(state, precond);
    LossContext ctx;
    ctx.topology = &topo;

    std::array<MomentScale, 3> moments{MomentScale{cfg.moment_decay}, MomentScale{cfg.moment_decay},
                                       MomentScale{cfg.moment_decay}};
    std::array<std::vector<double>, 3> history;
    std::array<bool, 3> warned{};
    const double phase_eta = eta0 * std::pow(cfg.eta_phase_decay, static_cast<double>(p));

    for (int it = 0; it < phase.iterations; ++it, ++global) {
      const auto t0 = std::chrono::steady_clock::now();
      const LossResult r = hra_step_loss(state.mesh, views, hra_cfg, global, ctx);
      const int ci = static_cast<int>(r.constraint);
      RowMatrixX3d g = to_matrix(r.grad);
      require_finite_gradient(g, global, to_string(r.constraint));
      const double grad_inf = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;

      const RowMatrixX3d u = precond.solve(g);
      const double scale = moments[ci].update(u.size() ? u.cwiseAbs2().maxCoeff() : 0.0);
      const double frac = phase.iterations > 1 ? static_cast<double>(it) / (phase.iterations - 1) : 0.0;
      state.eta = phase_eta * std::pow(cfg.eta_final_ratio, frac);
      state.iteration = global;
      step(state, precond, scale * g, to_string(r.constraint));

      IterationRecord rec;
      rec.iteration = global;
      rec.phase = static_cast<int>(p) + 1;
      rec.constraint = r.constraint;
      rec.loss = r.loss;
      rec.grad_inf = grad_inf;
      rec.vertices = state.mesh.vertex_count();
      rec.eta = state.eta;
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.log.push_back(rec);

      auto& h = history[ci];
      h.push_back(r.loss);
      const std::size_t per_window =
          static_cast<std::size_t>(cfg.plateau_window) / std::max<std::size_t>(1, hra_cfg.rotation.size());
      if (!warned[ci] && per_window > 0 && h.size() > per_window) {
        const double start = h[h.size() - 1 - per_window];
        double best = start;
        for (std::size_t k = h.size() - per_window; k < h.size(); ++k) {
          best = std::min(best, h[k]);
        }
        if (best >= start) {
          warned[ci] = true;
          result.warnings.push_back(fmt::format("phase {}: {} loss did not decrease over {} iterations ending at {}",
                                                p + 1, to_string(r.constraint), cfg.plateau_window, global));
        }
      }
      if (cfg.checkpoint_every > 0 && (global + 1) % cfg.checkpoint_every == 0) {
        save_obj(state.mesh, cfg.checkpoint_dir / fmt::format("checkpoint_{:05d}.obj", global + 1));
      }
      if (on_iteration) {
        on_iteration(rec, state.mesh);
      }
    }
  }
  result.mesh = std::move(state.mesh);
  return result;
}

void write_log_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& log,
                   bool include_timing) {
  std::ofstream out(path);
  if (!out) {
    throw IoError(fmt::format("cannot write log '{}'", path.string()));
  }
  out << "iteration,phase,constraint,loss,grad_inf,n_vertices,wall_ms\n";
  for (const IterationRecord& r : log) {
    out << fmt::format("{},{},{},{:.17g},{:.17g},{},{:.3f}\n", r.iteration, r.phase, to_string(r.constraint),
                       r.loss, r.grad_inf, r.vertices, include_timing ? r.wall_ms : 0.0);
  }
}

} // namespace meshalign

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "meshalign/gradcheck.hpp"
#include "meshalign/harness/scene.hpp"
#include "meshalign/registration.hpp"
#include "meshalign/template.hpp"

namespace meshalign::harness {

/// Registration schedule from JSON. Keys: "phases" (list of {lambda,
/// iterations, remesh_before, edge_factor}) or "schedule": "default" |
/// "single", optional "iterations_per_phase", and the scalar fields of
/// RegistrationConfig. Missing keys keep `base`.
RegistrationConfig registration_config_from_json(const Json& j, RegistrationConfig base = {});
Json registration_config_to_json(const RegistrationConfig& cfg);

/// Keys "rotation" (constraint names) and "weights" (color, depth, normal).
HraConfig hra_config_from_json(const Json& j);

struct TemplateOptions {
  std::filesystem::path scene;
  std::filesystem::path out;
  // Keys: seed, bust {rings, segments, radii, nose, radius_jitter}, fit
  // (registration schedule), texture {size, iterations, step, final_step},
  // target_vertices, mask {path} or {generator: "mouth-interior", margin}.
  Json config = Json::object();
  // Relative paths in `config` resolve here.
  std::filesystem::path config_dir = ".";
  std::optional<std::uint64_t> seed;
};

/// Writes template.obj/.mtl, texture.png, mask.png, dense.obj, fit_log.csv
/// and template.json; returns the template.json document.
Json make_template_cmd(const TemplateOptions& opts);

struct LoadedTemplate {
  TriangleMesh mesh;
  std::shared_ptr<const TextureImage> texture;
  std::shared_ptr<const MaskImage> mask;
  std::filesystem::path texture_file;
};
LoadedTemplate load_template(const std::filesystem::path& dir);
LoadedTemplate load_template_files(const std::filesystem::path& obj, const std::filesystem::path& texture);

struct RegisterOptions {
  std::filesystem::path scene;
  std::filesystem::path template_dir;
  std::filesystem::path out;
  // Registration schedule keys plus "rotation", "weights" and "use_mask".
  Json config = Json::object();
  int checkpoint_every = 0;
  bool dump_buffers = false;
  bool deterministic = false;
  std::uint64_t seed = 0;
};

/// Writes aligned.obj/.mtl, a byte copy of the template texture, log.csv,
/// per-view compare_XX.png (reference | render | 4x abs difference) and
/// report.json; returns report.json.
Json register_cmd(const RegisterOptions& opts);

struct EvaluateOptions {
  std::filesystem::path mesh;
  std::filesystem::path scene;
  // Defaults to texture.png next to the mesh when present.
  std::optional<std::filesystem::path> texture;
  int samples = 20000;
  std::uint64_t seed = 1;
  // F-score thresholds as fractions of the scan bounding-box diagonal.
  std::vector<double> thresholds{0.005, 0.01};
};

Json evaluate_cmd(const EvaluateOptions& opts);

struct GradCheckOptions {
  std::filesystem::path scene;
  // Defaults to the scan with seeded vertex jitter of `jitter` x diagonal.
  std::optional<std::filesystem::path> mesh;
  std::optional<std::filesystem::path> texture;
  std::optional<std::filesystem::path> mask;
  double jitter = 0.003;
  double min_pass_rate = 0.95;
  GradCheckConfig check;
};

/// Report with a boolean "pass".
Json grad_check_cmd(const GradCheckOptions& opts);

} // namespace meshalign::harness

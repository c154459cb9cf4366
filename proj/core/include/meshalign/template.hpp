#pragma once

#include <cstdint>
#include <memory>

#include "meshalign/hra.hpp"
#include "meshalign/mesh.hpp"
#include "meshalign/registration.hpp"

namespace meshalign {

/// Coarse head-like starting shape: an ellipsoid with a nose bump on the
/// cylinder-plus-caps UV layout.
struct BustParams {
  int rings = 24;
  int segments = 32;
  Vec3 radii{0.7, 0.92, 0.8};
  double nose = 0.12;
  // Relative random variation of the radii, drawn from the seed.
  double radius_jitter = 0.02;
};

TriangleMesh make_bust(const BustParams& params, std::uint64_t seed);

/// Registration driven by the depth constraint alone.
RegistrationResult fit_depth_only(const TriangleMesh& bust, const ViewSet& views, const RegistrationConfig& cfg);

struct TextureRecoveryConfig {
  int size = 1024;
  int iterations = 500;
  // Step in texel-value units, decaying geometrically to final_step.
  double step = 0.5;
  double final_step = 1e-3;
  Vec3 init{0.5, 0.5, 0.5};
};

struct TextureRecoveryResult {
  TextureImage texture;
  std::vector<double> loss;
  int covered_texels = 0;
};

/// Fits the albedo map of a fixed-geometry mesh to the reference colors.
/// Texels no view samples are filled from the nearest sampled texel.
TextureRecoveryResult recover_texture(const TriangleMesh& mesh, const ViewSet& views,
                                      const TextureRecoveryConfig& cfg);

struct TemplateConfig {
  RegistrationConfig fit;
  TextureRecoveryConfig texture;
  int target_vertices = 1000;
  // Texture-space mask; all ones when null.
  std::shared_ptr<const MaskImage> mask;
};

struct TemplateBundle {
  TriangleMesh mesh;
  std::shared_ptr<const TextureImage> texture;
  std::shared_ptr<const MaskImage> mask;
  // Densely tessellated depth fit the template was decimated from.
  TriangleMesh dense;
  RegistrationResult fit_log;
  std::vector<double> texture_loss;
};

TemplateBundle build_template(const TriangleMesh& bust, const ViewSet& views, const TemplateConfig& cfg);

} // namespace meshalign

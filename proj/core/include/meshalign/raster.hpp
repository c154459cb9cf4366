#pragma once

#include <vector>

#include "meshalign/camera.hpp"
#include "meshalign/image.hpp"
#include "meshalign/lighting.hpp"
#include "meshalign/mesh.hpp"

namespace meshalign {

/// One blend of the anti-aliasing band. A silhouette edge (va, vb) of `face`
/// crosses the segment between the centers of the covered pixel `inner` and
/// its 4-neighbor `outer` at fraction s. `face` is the face at `inner` or a
/// front-facing face reached from it along the segment. The pixel nearer the
/// crossing takes weight `alpha` of the other pixel's value.
struct SilhouetteEvent {
  int inner = 0;
  int outer = 0;
  int face = 0;
  int va = 0;
  int vb = 0;
  bool target_is_outer = false;
  double alpha = 0.0;

  [[nodiscard]] int target() const { return target_is_outer ? outer : inner; }
  [[nodiscard]] int source() const { return target_is_outer ? inner : outer; }
};

/// Rasterization result for one view plus what the backward pass needs.
struct FrameBuffer {
  Camera camera;
  // Per pixel (row-major): visible face or -1, perspective-correct
  // barycentrics of corners 1 and 2, camera depth (far on background).
  std::vector<int> face;
  std::vector<Vec2> bary;
  std::vector<double> depth;
  // World-space unit vertex normals of the rasterized mesh.
  std::vector<Vec3> vertex_normals;
  std::vector<SilhouetteEvent> events;

  [[nodiscard]] int width() const { return camera.width; }
  [[nodiscard]] int height() const { return camera.height; }
  [[nodiscard]] std::size_t pixel_count() const { return face.size(); }
  [[nodiscard]] bool covered(std::size_t p) const { return face[p] >= 0; }
  [[nodiscard]] int coverage_count() const;
};

struct RasterOptions {
  bool antialias = true;
};

/// Z-buffered rasterization without back-face culling. On exactly equal
/// depth the lower face id wins. Pass `topology` to skip rebuilding it.
FrameBuffer rasterize(const TriangleMesh& mesh, const Camera& camera, const RasterOptions& options = {},
                      const MeshTopology* topology = nullptr);

struct ColorOptions {
  Vec3 background = Vec3::Zero();
  // Optional per-pixel 0/1 weights (one channel). Blends never cross a zero
  // pixel, so masked content cannot leak into counted pixels.
  const ImageD* pixel_mask = nullptr;
  bool antialias = true;
};

/// Albedo (bilinear) times SH irradiance at the interpolated unit normal.
ImageD shade_color(const FrameBuffer& fb, const TriangleMesh& mesh, const SHLighting& light,
                   const TextureImage& albedo, const ColorOptions& options = {});

/// Camera-space depth; background is the far plane.
ImageD render_depth(const FrameBuffer& fb, const TriangleMesh& mesh, bool antialias = true);

/// Interpolated world-space unit normals; background is the zero vector.
ImageD render_normal(const FrameBuffer& fb, const TriangleMesh& mesh, bool antialias = true);

/// Unlit binary mask sample per covered pixel, background 1. A pixel is 0
/// when any texel with positive bilinear weight at its UV is 0, so the
/// value is 1 exactly when the color sample reads only unmasked texels.
ImageD render_mask(const FrameBuffer& fb, const TriangleMesh& mesh, const MaskImage& mask);

/// Per-pixel upstream gradients; null entries are treated as zero.
struct Upstream {
  const ImageD* color = nullptr;
  const ImageD* depth = nullptr;
  const ImageD* normal = nullptr;
};

struct ColorInputs {
  const SHLighting* light = nullptr;
  const TextureImage* albedo = nullptr;
  ColorOptions options;
};

struct RasterGradients {
  std::vector<Vec3> vertices;
  // t x t x 3, empty unless texel gradients were requested.
  ImageD texels;
};

/// Analytic reverse pass for the images produced from `fb`. Requires
/// `color` when a color upstream is supplied. Accumulation is sequential in
/// pixel order, so results are bit-reproducible.
RasterGradients backward(const FrameBuffer& fb, const TriangleMesh& mesh, const Upstream& upstream,
                         const ColorInputs* color = nullptr, bool texel_gradients = false);

/// Bilinear texture lookup with clamp-to-edge addressing.
Vec3 sample_bilinear(const ImageF& texels, const Vec2& uv);

} // namespace meshalign

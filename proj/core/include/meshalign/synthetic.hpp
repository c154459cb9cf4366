#pragma once

#include <cstdint>
#include <string>

#include "meshalign/camera.hpp"
#include "meshalign/image.hpp"
#include "meshalign/lighting.hpp"
#include "meshalign/mesh.hpp"

namespace meshalign {

/// Per-subject shape of the procedural head: ellipsoid base plus smooth bumps.
struct BlobHeadParams {
  std::uint64_t seed = 1;
  int rings = 128;
  int segments = 160;
  Vec3 radii{0.72, 0.95, 0.82};
  int bumps = 8;
  double bump_amplitude = 0.035;
  double bump_width = 0.35;
  int texture_size = 512;
};

/// Per-expression deformation; all zero is the neutral closed-mouth face.
struct Expression {
  std::string name = "neutral";
  double mouth_open = 0.0;
  double smile = 0.0;
  double brow_raise = 0.0;
  double cheek_puff = 0.0;
};

/// The three expressions used by the shipped fixtures: open mouth, closed
/// smile, half-open with raised brows.
Expression preset_expression(int index);

/// Angular face coordinates of a unit direction: azimuth (0 at +z, positive
/// toward +x) and elevation (positive up).
Vec2 face_coordinates(const Vec3& dir);

/// Relative radial displacement of the head surface along `dir`.
double blob_head_displacement(const BlobHeadParams& params, const Expression& e, const Vec3& dir);

/// Linear albedo at `dir`; the mouth interior depends on the expression.
Vec3 blob_head_albedo(const BlobHeadParams& params, const Expression& e, const Vec3& dir);

/// Textured, closed genus-0 head scan with cylinder-plus-caps UVs.
TriangleMesh make_blob_head(const BlobHeadParams& params, const Expression& e);

/// Maps a mesh whose vertices lie on (or were generated from) the unit
/// sphere to the head surface of `params`/`e`.
void displace_to_head(TriangleMesh& unit_sphere_mesh, const BlobHeadParams& params, const Expression& e);

/// Unit direction of the head parametrization under a point near the head
/// surface of `params`.
Vec3 head_direction(const BlobHeadParams& params, const Vec3& point);

/// Texture-space mask that is 0 where the UV layout of `head_mesh` (a mesh
/// lying near the head surface) maps into the mouth interior of `e`, grown
/// by `margin` radians.
MaskImage mouth_interior_mask(const TriangleMesh& head_mesh, int size, const BlobHeadParams& params,
                              const Expression& e, double margin = 0.03);

/// True when `dir` lies inside the mouth interior of `e` grown by `margin`.
bool in_mouth_interior(const Expression& e, const Vec3& dir, double margin = 0.0);

/// Frontal and side cameras looking at the head: yaw 0, +-35, +-70 degrees
/// and a raised frontal view; `count` takes a prefix (1 to 8; 7 and 8 add
/// views from below-left and below-right).
std::vector<Camera> head_cameras(int count = 6, int size = 256, double distance = 4.5, double fov_deg = 30.0);

/// Soft frontal key light over ambient.
SHLighting head_lighting();

} // namespace meshalign

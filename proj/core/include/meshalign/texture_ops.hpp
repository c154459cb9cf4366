#pragma once

#include <functional>
#include <vector>

#include "meshalign/image.hpp"
#include "meshalign/mesh.hpp"

namespace meshalign {

/// Which face covers each texel center of a size x size atlas, with
/// barycentrics. Texel (x, y) has center u = (x + 0.5) / size,
/// v = 1 - (y + 0.5) / size.
struct UvRaster {
  int size = 0;
  std::vector<int> face;
  std::vector<Vec3> bary;
};

UvRaster rasterize_uv(const TriangleMesh& mesh, int size);

/// Evaluates `color(face, bary)` at every covered texel and fills the rest
/// from the nearest covered texel.
TextureImage bake_texture(const TriangleMesh& mesh, int size,
                          const std::function<Vec3(int face, const Vec3& bary)>& color);

/// Replaces every texel with known[i] == 0 by the value of the nearest known
/// texel in exact Euclidean distance.
/// Throws GeometryError when no texel is known.
ImageF fill_nearest(const ImageF& image, const std::vector<char>& known);

} // namespace meshalign

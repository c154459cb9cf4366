#include "meshalign/texture_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meshalign/error.hpp"

namespace meshalign {

UvRaster rasterize_uv(const TriangleMesh& mesh, int size) {
  if (!mesh.has_uvs()) {
    throw ConfigError("UV rasterization needs a textured mesh");
  }
  if (size <= 0) {
    throw ConfigError("atlas size must be positive");
  }
  UvRaster out;
  out.size = size;
  out.face.assign(static_cast<std::size_t>(size) * size, -1);
  out.bary.assign(out.face.size(), Vec3::Zero());
  for (int f = 0; f < mesh.face_count(); ++f) {
    // Texel-space corners (x right, y down).
    Vec2 p[3];
    for (int k = 0; k < 3; ++k) {
      const Vec2& uv = mesh.corner_uv(f, k);
      p[k] = Vec2(uv.x() * size, (1.0 - uv.y()) * size);
    }
    const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
    if (area == 0.0) {
      continue;
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}) - 0.5)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}) - 0.5)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}) - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 c(x + 0.5, y + 0.5);
        auto edge = [&](const Vec2& a, const Vec2& b) {
          return ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x()) / area;
        };
        const double b0 = edge(p[1], p[2]);
        const double b1 = edge(p[2], p[0]);
        const double b2 = 1.0 - b0 - b1;
        const double eps = -1e-9;
        const std::size_t i = static_cast<std::size_t>(y) * size + x;
        if (b0 >= eps && b1 >= eps && b2 >= eps && out.face[i] < 0) {
          out.face[i] = f;
          out.bary[i] = Vec3(b0, b1, b2);
        }
      }
    }
  }
  return out;
}

TextureImage bake_texture(const TriangleMesh& mesh, int size,
                          const std::function<Vec3(int face, const Vec3& bary)>& color) {
  const UvRaster r = rasterize_uv(mesh, size);
  ImageF img(size, size, 3);
  std::vector<char> known(r.face.size(), 0);
  for (std::size_t i = 0; i < r.face.size(); ++i) {
    if (r.face[i] < 0) {
      continue;
    }
    const Vec3 c = color(r.face[i], r.bary[i]);
    for (int k = 0; k < 3; ++k) {
      img.pixel(i)[k] = static_cast<float>(c[k]);
    }
    known[i] = 1;
  }
  return TextureImage(fill_nearest(img, known));
}

namespace {

// Lower envelope of parabolas (Felzenszwalb-Huttenlocher) over one line,
// returning the squared distance and the index of the minimizing sample.
void envelope(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) {
      continue;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    auto meet = [&](int p) {
      return ((f[q] + q * static_cast<double>(q)) - (f[p] + p * static_cast<double>(p))) / (2.0 * (q - p));
    };
    double s = meet(v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  d.assign(n, inf);
  arg.assign(n, -1);
  if (k < 0) {
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) {
      ++j;
    }
    const int p = v[j];
    d[q] = (q - p) * static_cast<double>(q - p) + f[p];
    arg[q] = p;
  }
}

} // namespace

ImageF fill_nearest(const ImageF& image, const std::vector<char>& known) {
  const int w = image.width();
  const int h = image.height();
  if (known.size() != image.pixel_count()) {
    throw ConfigError("fill_nearest: mask size does not match the image");
  }
  if (std::none_of(known.begin(), known.end(), [](char k) { return k != 0; })) {
    throw GeometryError("no known texels to fill from");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Columns first: nearest known row in each column.
  std::vector<double> col_d(image.pixel_count(), inf);
  std::vector<int> col_arg(image.pixel_count(), -1);
  std::vector<double> f(h), d;
  std::vector<int> arg;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      f[y] = known[static_cast<std::size_t>(y) * w + x] ? 0.0 : inf;
    }
    envelope(f, d, arg);
    for (int y = 0; y < h; ++y) {
      col_d[static_cast<std::size_t>(y) * w + x] = d[y];
      col_arg[static_cast<std::size_t>(y) * w + x] = arg[y];
    }
  }
  ImageF out = image;
  std::vector<double> g(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      g[x] = col_d[static_cast<std::size_t>(y) * w + x];
    }
    envelope(g, d, arg);
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (known[i]) {
        continue;
      }
      const int sx = arg[x];
      const int sy = col_arg[static_cast<std::size_t>(y) * w + sx];
      std::copy(image.pixel(static_cast<std::size_t>(sy) * w + sx),
                image.pixel(static_cast<std::size_t>(sy) * w + sx) + image.channels(), out.pixel(i));
    }
  }
  return out;
}

} // namespace meshalign

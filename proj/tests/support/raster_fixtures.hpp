#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "meshalign/camera.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/raster.hpp"
#include "meshalign/texture_ops.hpp"

namespace fixture {

using namespace meshalign;

// Camera at the origin looking down +z whose pixel coordinates equal x/z, y/z.
inline Camera pixel_camera(int w, int h) {
  Camera c;
  c.fx = 1.0;
  c.fy = 1.0;
  c.cx = 0.0;
  c.cy = 0.0;
  c.width = w;
  c.height = h;
  c.near = 0.01;
  c.far = 100.0;
  return c;
}

// Axis-aligned quad at depth z spanning [x0,x1]x[y0,y1], facing the camera,
// with UV (0,1) at (x0,y0) and (1,0) at (x1,y1).
inline TriangleMesh quad(double x0, double y0, double x1, double y1, double z) {
  TriangleMesh m;
  m.vertices = {Vec3(x0, y0, z), Vec3(x1, y0, z), Vec3(x1, y1, z), Vec3(x0, y1, z)};
  m.faces = {{0, 2, 1}, {0, 3, 2}};
  m.uvs = {Vec2(0, 1), Vec2(1, 1), Vec2(1, 0), Vec2(0, 0)};
  m.face_uvs = m.faces;
  return m;
}

inline TriangleMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriangleMesh m;
  m.vertices = {a, b, c};
  m.faces = {{0, 1, 2}};
  m.uvs = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  m.face_uvs = m.faces;
  return m;
}

// Smooth color pattern with all channels varying.
inline TextureImage smooth_texture(int size) {
  ImageF img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double v = (y + 0.5) / size;
      img.at(x, y, 0) = static_cast<float>(0.5 + 0.4 * std::sin(6.0 * u + 1.0));
      img.at(x, y, 1) = static_cast<float>(0.5 + 0.4 * std::cos(5.0 * v));
      img.at(x, y, 2) = static_cast<float>(0.5 + 0.3 * std::sin(4.0 * (u + v)));
    }
  }
  return TextureImage(std::move(img));
}

inline SHLighting directional_light() {
  SHLighting l = SHLighting::uniform(0.8);
  l.coeffs[1] = Vec3(0.2, 0.15, 0.1);
  l.coeffs[2] = Vec3(-0.3, -0.25, -0.2);
  l.coeffs[3] = Vec3(0.1, 0.2, 0.05);
  l.coeffs[6] = Vec3(0.05, 0.02, 0.04);
  l.coeffs[8] = Vec3(0.03, 0.05, 0.01);
  return l;
}

// Six cameras around the origin, frontal and side views.
inline std::vector<Camera> ring_cameras(int size, double distance, double fov = 40.0) {
  std::vector<Camera> cams;
  const double angles[6] = {0.0, 40.0, -40.0, 80.0, -80.0, 0.0};
  const double elev[6] = {0.0, 10.0, 10.0, -5.0, -5.0, 35.0};
  for (int i = 0; i < 6; ++i) {
    const double a = angles[i] * M_PI / 180.0;
    const double e = elev[i] * M_PI / 180.0;
    const Vec3 eye(distance * std::sin(a) * std::cos(e), distance * std::sin(e), distance * std::cos(a) * std::cos(e));
    cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3(0, 1, 0), fov, size, size, 0.05, 20.0));
  }
  return cams;
}

// Pixels unaffected by silhouette blending whose 4-neighbors are covered.
inline std::vector<int> interior_pixels(const FrameBuffer& fb) {
  std::vector<char> touched(fb.pixel_count(), 0);
  for (const auto& e : fb.events) {
    touched[e.inner] = 1;
    touched[e.outer] = 1;
  }
  std::vector<int> out;
  const int w = fb.width();
  const int h = fb.height();
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const int p = y * w + x;
      if (touched[p] || !fb.covered(p) || !fb.covered(p - 1) || !fb.covered(p + 1) || !fb.covered(p - w) ||
          !fb.covered(p + w)) {
        continue;
      }
      out.push_back(p);
    }
  }
  return out;
}

// Interior pixels whose 3x3 neighborhood lies on one face, so small vertex
// moves never switch the face a pixel samples.
inline std::vector<int> face_interior_pixels(const FrameBuffer& fb) {
  std::vector<int> out;
  const int w = fb.width();
  for (int p : interior_pixels(fb)) {
    bool same = true;
    for (int dy = -1; dy <= 1 && same; ++dy) {
      for (int dx = -1; dx <= 1 && same; ++dx) {
        same = fb.face[p + dy * w + dx] == fb.face[p];
      }
    }
    if (same) {
      out.push_back(p);
    }
  }
  return out;
}

// Icosphere with planar UVs and an albedo affine in UV, which bilinear
// lookup reproduces exactly.
inline TriangleMesh ramp_icosphere(int levels, int texture_size) {
  TriangleMesh m = make_icosphere(levels);
  assign_planar_uvs(m);
  const Vec3 du(0.25, -0.1, 0.05), dv(-0.15, 0.2, 0.3);
  const Vec3 base = Vec3::Constant(0.5) - 0.5 * (du + dv);
  m.texture = std::make_shared<const TextureImage>(bake_texture(m, texture_size, [&](int f, const Vec3& b) {
    const Vec2 uv = b[0] * m.corner_uv(f, 0) + b[1] * m.corner_uv(f, 1) + b[2] * m.corner_uv(f, 2);
    return Vec3(base + uv.x() * du + uv.y() * dv);
  }));
  return m;
}

// Uniform per-coordinate jitter of `amplitude`.
inline TriangleMesh jittered(TriangleMesh m, double amplitude, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (Vec3& v : m.vertices) {
    v += Vec3(u(rng), u(rng), u(rng));
  }
  return m;
}

} // namespace fixture

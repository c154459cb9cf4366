#include "meshalign/synthetic.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/texture_ops.hpp"

namespace meshalign {

namespace {

double gauss(double x, double y) { return std::exp(-0.5 * (x * x + y * y)); }

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Signed ellipse level: < 1 inside.
double ellipse(const Vec2& p, const Vec2& c, double rx, double ry) {
  const double dx = (p.x() - c.x()) / rx;
  const double dy = (p.y() - c.y()) / ry;
  return std::sqrt(dx * dx + dy * dy);
}

constexpr double kMouthElevation = -0.42;

Vec2 mouth_interior_radii(const Expression& e) { return {0.2 + 0.02 * e.smile, 0.012 + 0.07 * e.mouth_open}; }

Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a + t * (b - a); }

struct Bump {
  Vec3 dir;
  double amplitude;
};

std::vector<Bump> subject_bumps(const BlobHeadParams& p) {
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Bump> out;
  for (int i = 0; i < p.bumps; ++i) {
    Vec3 d(n(rng), n(rng), n(rng));
    out.push_back({d.normalized(), p.bump_amplitude * u(rng)});
  }
  return out;
}

} // namespace

Expression preset_expression(int index) {
  switch (index) {
    case 0: return {"open", 1.0, 0.0, 0.0, 0.0};
    case 1: return {"smile", 0.0, 1.0, 0.0, 0.4};
    case 2: return {"surprise", 0.5, 0.0, 1.0, 0.0};
    default: throw ConfigError("preset expressions are numbered 0, 1 and 2");
  }
}

Vec2 face_coordinates(const Vec3& dir) {
  const Vec3 d = dir.normalized();
  return {std::atan2(d.x(), d.z()), std::asin(std::clamp(d.y(), -1.0, 1.0))};
}

double blob_head_displacement(const BlobHeadParams& params, const Expression& e, const Vec3& dir) {
  const Vec2 fc = face_coordinates(dir);
  const double a = fc.x();
  const double el = fc.y();
  const double aa = std::abs(a);
  double d = 0.0;
  d += 0.20 * gauss(a / 0.12, (el + 0.02) / 0.16);                                // nose
  d += (0.04 + 0.03 * e.brow_raise) * gauss((aa - 0.38) / 0.18, (el - 0.36 - 0.04 * e.brow_raise) / 0.06);
  d -= 0.04 * gauss((aa - 0.38) / 0.12, (el - 0.2) / 0.07);                      // eye sockets
  d += 0.06 * gauss(a / 0.25, (el + 0.75) / 0.12);                               // chin
  d += (0.03 + 0.05 * e.cheek_puff) * gauss((aa - 0.55) / 0.2, (el + 0.2) / 0.15);
  d += 0.03 * gauss(a / 0.25, (el - kMouthElevation) / 0.08);                   // lips
  d += 0.03 * e.smile * gauss((aa - 0.25) / 0.06, (el - kMouthElevation - 0.06) / 0.06);
  const Vec2 r = mouth_interior_radii(e);
  d -= 0.12 * e.mouth_open * gauss(a / (0.6 * r.x()), (el - kMouthElevation) / (0.6 * r.y() + 0.01));
  const double cw = std::cos(params.bump_width);
  for (const Bump& b : subject_bumps(params)) {
    const double c = dir.normalized().dot(b.dir);
    if (c > cw) {
      const double t = (c - cw) / (1.0 - cw);
      d += b.amplitude * t * t * (3.0 - 2.0 * t);
    }
  }
  return d;
}

bool in_mouth_interior(const Expression& e, const Vec3& dir, double margin) {
  const Vec2 fc = face_coordinates(dir);
  const Vec2 r = mouth_interior_radii(e);
  return std::abs(fc.x()) < M_PI / 2 && ellipse(fc, Vec2(0.0, kMouthElevation), r.x() + margin, r.y() + margin) < 1.0;
}

Vec3 blob_head_albedo(const BlobHeadParams& params, const Expression& e, const Vec3& dir) {
  const Vec3 d = dir.normalized();
  const Vec2 fc = face_coordinates(d);
  const double a = fc.x();
  const double el = fc.y();
  const double aa = std::abs(a);
  const double phase = static_cast<double>(params.seed % 97) * 0.37;
  Vec3 skin(0.78, 0.57, 0.47);
  skin *= 1.0 + 0.05 * std::sin(3.0 * d.x() + phase) * std::cos(2.0 * d.y() - phase) + 0.03 * std::sin(5.0 * d.z());
  Vec3 c = skin;
  // Cheek blush.
  c = lerp(c, Vec3(0.82, 0.45, 0.42), 0.35 * gauss((aa - 0.5) / 0.12, (el + 0.15) / 0.1));
  // Eyes: sclera with a dark iris.
  const Vec2 eye(0.38, 0.2);
  const double le = ellipse(Vec2(aa, el), eye, 0.12, 0.06);
  c = lerp(c, Vec3(0.85, 0.85, 0.82), 1.0 - smoothstep(0.85, 1.05, le));
  c = lerp(c, Vec3(0.12, 0.08, 0.06), 1.0 - smoothstep(0.35, 0.5, le));
  // Brows.
  const double lb = ellipse(Vec2(aa, el), Vec2(0.38, 0.36 + 0.04 * e.brow_raise), 0.16, 0.03);
  c = lerp(c, Vec3(0.22, 0.14, 0.1), 1.0 - smoothstep(0.8, 1.1, lb));
  // Lips, then the mouth interior (dark when open, a thin line when closed).
  const double ll = ellipse(fc, Vec2(0.0, kMouthElevation), 0.28, 0.09 + 0.05 * e.mouth_open);
  c = lerp(c, Vec3(0.72, 0.28, 0.28), 1.0 - smoothstep(0.85, 1.05, ll));
  const Vec2 r = mouth_interior_radii(e);
  const double lm = ellipse(fc, Vec2(0.0, kMouthElevation), r.x(), r.y());
  c = lerp(c, Vec3(0.2, 0.04, 0.05), 1.0 - smoothstep(0.8, 1.1, lm));
  // Hair cap and back.
  const double hair = smoothstep(-0.04, 0.04, el - (0.62 + 0.12 * std::cos(a))) +
                      smoothstep(-0.1, 0.1, aa - 2.1) * smoothstep(-0.1, 0.1, el + 0.3);
  c = lerp(c, Vec3(0.24, 0.17, 0.11), std::clamp(hair, 0.0, 1.0));
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

void displace_to_head(TriangleMesh& mesh, const BlobHeadParams& params, const Expression& e) {
  for (Vec3& v : mesh.vertices) {
    const Vec3 dir = v.normalized();
    v = params.radii.cwiseProduct(dir) * (1.0 + blob_head_displacement(params, e, dir));
  }
}

TriangleMesh make_blob_head(const BlobHeadParams& params, const Expression& e) {
  TriangleMesh sphere = make_capped_cylinder_sphere(params.rings, params.segments);
  const TriangleMesh layout = sphere;
  auto tex = bake_texture(layout, params.texture_size, [&](int f, const Vec3& b) {
    const Tri& t = layout.faces[f];
    const Vec3 p = b[0] * layout.vertices[t[0]] + b[1] * layout.vertices[t[1]] + b[2] * layout.vertices[t[2]];
    return blob_head_albedo(params, e, p);
  });
  displace_to_head(sphere, params, e);
  sphere.texture = std::make_shared<const TextureImage>(std::move(tex));
  return sphere;
}

Vec3 head_direction(const BlobHeadParams& params, const Vec3& point) {
  return point.cwiseQuotient(params.radii).normalized();
}

MaskImage mouth_interior_mask(const TriangleMesh& layout, int size, const BlobHeadParams& params,
                              const Expression& e, double margin) {
  const UvRaster r = rasterize_uv(layout, size);
  ImageF texels(size, size, 3, 1.0f);
  for (std::size_t i = 0; i < r.face.size(); ++i) {
    if (r.face[i] < 0) {
      continue;
    }
    const Tri& t = layout.faces[r.face[i]];
    const Vec3& b = r.bary[i];
    const Vec3 p = b[0] * layout.vertices[t[0]] + b[1] * layout.vertices[t[1]] + b[2] * layout.vertices[t[2]];
    if (in_mouth_interior(e, head_direction(params, p), margin)) {
      std::fill(texels.pixel(i), texels.pixel(i) + 3, 0.0f);
    }
  }
  return MaskImage(std::move(texels));
}

std::vector<Camera> head_cameras(int count, int size, double distance, double fov_deg) {
  if (count < 1 || count > 8) {
    throw ConfigError(fmt::format("head_cameras supports 1 to 8 views, got {}", count));
  }
  const double yaw[8] = {0.0, 35.0, -35.0, 70.0, -70.0, 0.0, 45.0, -45.0};
  const double pitch[8] = {0.0, 8.0, 8.0, 0.0, 0.0, 25.0, -20.0, -20.0};
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i) {
    const double a = yaw[i] * M_PI / 180.0;
    const double e = pitch[i] * M_PI / 180.0;
    const Vec3 eye(distance * std::sin(a) * std::cos(e), distance * std::sin(e), distance * std::cos(a) * std::cos(e));
    cams.push_back(Camera::look_at(eye, Vec3(0.0, -0.05, 0.0), Vec3(0, 1, 0), fov_deg, size, size, 0.1,
                                   distance * 4.0));
  }
  return cams;
}

SHLighting head_lighting() {
  SHLighting l = SHLighting::uniform(0.85);
  l.coeffs[1] = Vec3(0.22, 0.22, 0.22);   // from above
  l.coeffs[2] = Vec3(0.25, 0.25, 0.25);   // from the front
  l.coeffs[3] = Vec3(0.08, 0.08, 0.08);   // slightly from +x
  return l;
}

} // namespace meshalign

#include "meshalign/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/LU>
#include <fmt/format.h>

#include "meshalign/error.hpp"

namespace meshalign {

namespace {

// Barycentric slack so pixel centers exactly on a shared edge are claimed by
// at least one of the two faces despite rounding.
constexpr double kInsideEps = 1e-10;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 pixel_center(const FrameBuffer& fb, int p) {
  return {p % fb.width() + 0.5, p / fb.width() + 0.5};
}

struct Taps {
  int x[2];
  int y[2];
  double fx;
  double fy;
  double weight(int i, int j) const { return (i ? fx : 1.0 - fx) * (j ? fy : 1.0 - fy); }
};

Taps bilinear_taps(int size, const Vec2& uv) {
  const double x = uv.x() * size - 0.5;
  const double y = (1.0 - uv.y()) * size - 0.5;
  const double x0 = std::floor(x);
  const double y0 = std::floor(y);
  Taps t{};
  t.fx = x - x0;
  t.fy = y - y0;
  const int ix = static_cast<int>(x0);
  const int iy = static_cast<int>(y0);
  t.x[0] = std::clamp(ix, 0, size - 1);
  t.x[1] = std::clamp(ix + 1, 0, size - 1);
  t.y[0] = std::clamp(iy, 0, size - 1);
  t.y[1] = std::clamp(iy + 1, 0, size - 1);
  return t;
}

Vec3 texel(const ImageF& img, int x, int y) {
  const float* px = img.pixel(static_cast<std::size_t>(y) * img.width() + x);
  return {px[0], px[1], px[2]};
}

// Interpolation state at one covered pixel.
struct Fragment {
  int face;
  double b[3];
};

Fragment fragment_at(const FrameBuffer& fb, int p) {
  const Vec2& bb = fb.bary[p];
  return {fb.face[p], {1.0 - bb.x() - bb.y(), bb.x(), bb.y()}};
}

Vec3 interpolated_normal_raw(const FrameBuffer& fb, const TriangleMesh& mesh, const Fragment& fr) {
  const Tri& t = mesh.faces[fr.face];
  return fr.b[0] * fb.vertex_normals[t[0]] + fr.b[1] * fb.vertex_normals[t[1]] +
         fr.b[2] * fb.vertex_normals[t[2]];
}

Vec3 unit_or_zero(const Vec3& m) {
  const double len = m.norm();
  return len > 0.0 ? Vec3(m / len) : Vec3::Zero();
}

Vec2 interpolated_uv(const TriangleMesh& mesh, const Fragment& fr) {
  return fr.b[0] * mesh.corner_uv(fr.face, 0) + fr.b[1] * mesh.corner_uv(fr.face, 1) +
         fr.b[2] * mesh.corner_uv(fr.face, 2);
}

void check_fb(const FrameBuffer& fb, const TriangleMesh& mesh) {
  if (fb.face.size() != static_cast<std::size_t>(fb.width()) * fb.height() ||
      fb.vertex_normals.size() != mesh.vertices.size()) {
    throw Error("frame buffer does not match the mesh it is used with");
  }
}

void apply_events(const FrameBuffer& fb, const ImageD& raw, ImageD& out, const ImageD* mask) {
  const int c = raw.channels();
  for (const SilhouetteEvent& e : fb.events) {
    const int tau = e.target();
    const int sigma = e.source();
    if (mask && (mask->data()[tau] == 0.0 || mask->data()[sigma] == 0.0)) {
      continue;
    }
    for (int k = 0; k < c; ++k) {
      out.pixel(tau)[k] += e.alpha * (raw.pixel(sigma)[k] - raw.pixel(tau)[k]);
    }
  }
}

ImageD raw_color(const FrameBuffer& fb, const TriangleMesh& mesh, const SHLighting& light,
                 const TextureImage& albedo, const Vec3& background) {
  ImageD img(fb.width(), fb.height(), 3);
  const ImageF& tex = albedo.texels();
  for (int p = 0; p < static_cast<int>(fb.pixel_count()); ++p) {
    double* px = img.pixel(p);
    if (!fb.covered(p)) {
      px[0] = background.x();
      px[1] = background.y();
      px[2] = background.z();
      continue;
    }
    const Fragment fr = fragment_at(fb, p);
    const Vec3 a = sample_bilinear(tex, interpolated_uv(mesh, fr));
    const Vec3 e = light.irradiance(unit_or_zero(interpolated_normal_raw(fb, mesh, fr)));
    px[0] = a.x() * e.x();
    px[1] = a.y() * e.y();
    px[2] = a.z() * e.z();
  }
  return img;
}

ImageD raw_depth(const FrameBuffer& fb) {
  ImageD img(fb.width(), fb.height(), 1);
  for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
    img.data()[p] = fb.covered(p) ? fb.depth[p] : fb.camera.far;
  }
  return img;
}

ImageD raw_normal(const FrameBuffer& fb, const TriangleMesh& mesh) {
  ImageD img(fb.width(), fb.height(), 3);
  for (int p = 0; p < static_cast<int>(fb.pixel_count()); ++p) {
    if (!fb.covered(p)) {
      continue;
    }
    const Vec3 n = unit_or_zero(interpolated_normal_raw(fb, mesh, fragment_at(fb, p)));
    std::copy(n.data(), n.data() + 3, img.pixel(p));
  }
  return img;
}

// Transposes the blend: maps d(out) to d(raw) and accumulates d(alpha).
void events_backward(const FrameBuffer& fb, const ImageD& raw, const ImageD& up, ImageD& grad_raw,
                     std::vector<double>& dalpha, const ImageD* mask) {
  const int c = raw.channels();
  for (std::size_t i = 0; i < fb.events.size(); ++i) {
    const SilhouetteEvent& e = fb.events[i];
    const int tau = e.target();
    const int sigma = e.source();
    if (mask && (mask->data()[tau] == 0.0 || mask->data()[sigma] == 0.0)) {
      continue;
    }
    for (int k = 0; k < c; ++k) {
      const double g = up.pixel(tau)[k];
      grad_raw.pixel(tau)[k] -= e.alpha * g;
      grad_raw.pixel(sigma)[k] += e.alpha * g;
      dalpha[i] += g * (raw.pixel(sigma)[k] - raw.pixel(tau)[k]);
    }
  }
}

void check_upstream(const ImageD* img, const FrameBuffer& fb, int channels, const char* what) {
  if (img && (img->width() != fb.width() || img->height() != fb.height() || img->channels() != channels)) {
    throw ConfigError(fmt::format("{} upstream gradient has shape {}x{}x{}, expected {}x{}x{}", what,
                                  img->width(), img->height(), img->channels(), fb.width(), fb.height(),
                                  channels));
  }
}

// d(pixel position)/d(camera point) transposed, applied to a screen gradient.
Vec3 projection_backward(const Camera& cam, const Vec3& pc, const Vec2& g) {
  const double iz = 1.0 / pc.z();
  return {cam.fx * iz * g.x(), cam.fy * iz * g.y(),
          -(cam.fx * pc.x() * g.x() + cam.fy * pc.y() * g.y()) * iz * iz};
}

} // namespace

int FrameBuffer::coverage_count() const {
  return static_cast<int>(std::count_if(face.begin(), face.end(), [](int f) { return f >= 0; }));
}

Vec3 sample_bilinear(const ImageF& texels, const Vec2& uv) {
  const Taps t = bilinear_taps(texels.width(), uv);
  Vec3 out = Vec3::Zero();
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      out += t.weight(i, j) * texel(texels, t.x[i], t.y[j]);
    }
  }
  return out;
}

FrameBuffer rasterize(const TriangleMesh& mesh, const Camera& camera, const RasterOptions& options,
                      const MeshTopology* topology) {
  camera.validate();
  const int width = camera.width;
  const int height = camera.height;
  FrameBuffer fb;
  fb.camera = camera;
  fb.face.assign(static_cast<std::size_t>(width) * height, -1);
  fb.bary.assign(fb.face.size(), Vec2::Zero());
  fb.depth.assign(fb.face.size(), camera.far);
  fb.vertex_normals = vertex_normals_unchecked(mesh);

  std::vector<Vec3> pc(mesh.vertices.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    pc[i] = camera.to_camera(mesh.vertices[i]);
  }

  const double near = camera.near;
  const double far = camera.far;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& tri = mesh.faces[f];
    const Vec3& p0 = pc[tri[0]];
    const Vec3& p1 = pc[tri[1]];
    const Vec3& p2 = pc[tri[2]];
    const double zmax = std::max({p0.z(), p1.z(), p2.z()});
    const double zmin = std::min({p0.z(), p1.z(), p2.z()});
    if (zmax < near || zmin > far) {
      continue;
    }
    const Vec3 e1 = p1 - p0;
    const Vec3 e2 = p2 - p0;
    const Vec3 n = e1.cross(e2);
    const double nn = n.squaredNorm();
    if (nn == 0.0) {
      continue;
    }
    // Screen bounds of the part of the triangle in front of the near plane.
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    auto extend = [&](const Vec3& q) {
      const Vec2 s = camera.project_camera(q);
      xmin = std::min(xmin, s.x());
      xmax = std::max(xmax, s.x());
      ymin = std::min(ymin, s.y());
      ymax = std::max(ymax, s.y());
    };
    const Vec3* ps[3] = {&p0, &p1, &p2};
    for (int k = 0; k < 3; ++k) {
      const Vec3& a = *ps[k];
      const Vec3& b = *ps[(k + 1) % 3];
      if (a.z() >= near) {
        extend(a);
      }
      if ((a.z() < near) != (b.z() < near)) {
        const double s = (near - a.z()) / (b.z() - a.z());
        extend(a + s * (b - a));
      }
    }
    if (!std::isfinite(xmin) || !std::isfinite(xmax) || !std::isfinite(ymin) || !std::isfinite(ymax)) {
      continue;
    }
    const int i0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
    const int i1 = std::min(width - 1, static_cast<int>(std::floor(xmax - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
    const int j1 = std::min(height - 1, static_cast<int>(std::floor(ymax - 0.5)));
    if (i0 > i1 || j0 > j1) {
      continue;
    }
    const Vec3 c1 = e2.cross(n) / nn;
    const Vec3 c2 = n.cross(e1) / nn;
    const double np0 = n.dot(p0);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Vec3 d = camera.ray(i + 0.5, j + 0.5);
        const double nd = n.dot(d);
        if (nd == 0.0) {
          continue;
        }
        const double t = np0 / nd;
        const std::size_t p = static_cast<std::size_t>(j) * width + i;
        if (t < near || t > far || (fb.face[p] >= 0 && !(t < fb.depth[p]))) {
          continue;
        }
        const Vec3 r = t * d - p0;
        const double b1 = r.dot(c1);
        const double b2 = r.dot(c2);
        if (b1 < -kInsideEps || b2 < -kInsideEps || b1 + b2 > 1.0 + kInsideEps) {
          continue;
        }
        fb.face[p] = f;
        fb.bary[p] = Vec2(b1, b2);
        fb.depth[p] = t;
      }
    }
  }

  if (!options.antialias || mesh.faces.empty()) {
    return fb;
  }

  MeshTopology local;
  if (!topology) {
    local = build_topology(mesh);
    topology = &local;
  }
  // Screen-space winding per face; 0 when any corner is behind the near plane.
  std::vector<std::int8_t> facing(mesh.faces.size(), 0);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& tri = mesh.faces[f];
    if (pc[tri[0]].z() < near || pc[tri[1]].z() < near || pc[tri[2]].z() < near) {
      continue;
    }
    const Vec3 n = (pc[tri[1]] - pc[tri[0]]).cross(pc[tri[2]] - pc[tri[0]]);
    const double side = n.dot(pc[tri[0]]);
    facing[f] = side < 0.0 ? 1 : (side > 0.0 ? -1 : 0);
  }

  auto try_pair = [&](int p, int q) {
    const int fp = fb.face[p];
    const int fq = fb.face[q];
    if (fp == fq) {
      return;
    }
    int inner;
    if (fp < 0) {
      inner = q;
    } else if (fq < 0) {
      inner = p;
    } else if (fb.depth[p] != fb.depth[q]) {
      inner = fb.depth[p] < fb.depth[q] ? p : q;
    } else {
      inner = fp < fq ? p : q;
    }
    const int outer = inner == p ? q : p;
    int f = fb.face[inner];
    if (facing[f] == 0) {
      return;
    }
    const Vec2 P = pixel_center(fb, inner);
    const Vec2 D = pixel_center(fb, outer) - P;
    // Follow the segment from the inner pixel center through front-facing
    // neighbors until it leaves the surface over a silhouette edge. Faces near
    // the contour are thin on screen and often cover no pixel center.
    double t_from = 0.0;
    int best = -1;
    double best_s = 0.0;
    for (int hop = 0; hop < 16; ++hop) {
      const Tri& tri = mesh.faces[f];
      Vec2 s[3];
      for (int k = 0; k < 3; ++k) {
        s[k] = camera.project_camera(pc[tri[k]]);
      }
      const double orient = cross2(s[1] - s[0], s[2] - s[0]);
      if (orient == 0.0) {
        return;
      }
      const double sign = orient > 0.0 ? 1.0 : -1.0;
      int exit_k = -1;
      double exit_t = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        const Vec2& A = s[k];
        const Vec2 e = s[(k + 1) % 3] - A;
        const double g = cross2(e, D) * sign;
        if (!(g < 0.0)) {
          continue;
        }
        const double t = std::max(-cross2(e, P - A) * sign / g, t_from);
        if (t < exit_t) {
          exit_t = t;
          exit_k = k;
        }
      }
      if (exit_k < 0 || exit_t >= 1.0) {
        return;
      }
      const int nb = topology->face_neighbors[f][exit_k];
      if (nb >= 0 && facing[nb] == facing[f]) {
        f = nb;
        t_from = exit_t;
        continue;
      }
      best = exit_k;
      best_s = exit_t;
      break;
    }
    if (best < 0) {
      return;
    }
    const Tri& tri = mesh.faces[f];
    const Vec2 ea = camera.project_camera(pc[tri[best]]);
    const Vec2 eb = camera.project_camera(pc[tri[(best + 1) % 3]]);
    // Each edge is blended along one axis only: horizontal pairs for steep
    // edges, vertical pairs for flat ones, so no edge is counted twice.
    const Vec2 edge = eb - ea;
    const bool steep = std::abs(edge.y()) >= std::abs(edge.x());
    if (steep != (D.x() != 0.0)) {
      return;
    }
    SilhouetteEvent ev;
    ev.inner = inner;
    ev.outer = outer;
    ev.face = f;
    ev.va = tri[best];
    ev.vb = tri[(best + 1) % 3];
    ev.target_is_outer = best_s > 0.5;
    ev.alpha = ev.target_is_outer ? best_s - 0.5 : 0.5 - best_s;
    if (ev.alpha > 0.0) {
      fb.events.push_back(ev);
    }
  };

  for (int j = 0; j < height; ++j) {
    for (int i = 0; i + 1 < width; ++i) {
      try_pair(j * width + i, j * width + i + 1);
    }
  }
  for (int j = 0; j + 1 < height; ++j) {
    for (int i = 0; i < width; ++i) {
      try_pair(j * width + i, (j + 1) * width + i);
    }
  }
  return fb;
}

ImageD shade_color(const FrameBuffer& fb, const TriangleMesh& mesh, const SHLighting& light,
                   const TextureImage& albedo, const ColorOptions& options) {
  check_fb(fb, mesh);
  if (!mesh.has_uvs()) {
    throw ConfigError("shade_color needs a mesh with UVs");
  }
  if (albedo.size() == 0) {
    throw ConfigError("shade_color needs a texture");
  }
  ImageD raw = raw_color(fb, mesh, light, albedo, options.background);
  if (!options.antialias || fb.events.empty()) {
    return raw;
  }
  ImageD out = raw;
  apply_events(fb, raw, out, options.pixel_mask);
  return out;
}

ImageD render_depth(const FrameBuffer& fb, const TriangleMesh& mesh, bool antialias) {
  check_fb(fb, mesh);
  ImageD raw = raw_depth(fb);
  if (!antialias || fb.events.empty()) {
    return raw;
  }
  ImageD out = raw;
  apply_events(fb, raw, out, nullptr);
  return out;
}

ImageD render_normal(const FrameBuffer& fb, const TriangleMesh& mesh, bool antialias) {
  check_fb(fb, mesh);
  ImageD raw = raw_normal(fb, mesh);
  if (!antialias || fb.events.empty()) {
    return raw;
  }
  ImageD out = raw;
  apply_events(fb, raw, out, nullptr);
  return out;
}

ImageD render_mask(const FrameBuffer& fb, const TriangleMesh& mesh, const MaskImage& mask) {
  check_fb(fb, mesh);
  if (!mesh.has_uvs()) {
    throw ConfigError("render_mask needs a mesh with UVs");
  }
  ImageD img(fb.width(), fb.height(), 1, 1.0);
  const ImageF& m = mask.texels();
  for (int p = 0; p < static_cast<int>(fb.pixel_count()); ++p) {
    if (!fb.covered(p)) {
      continue;
    }
    const Taps t = bilinear_taps(mask.size(), interpolated_uv(mesh, fragment_at(fb, p)));
    double v = 1.0;
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) {
        if (t.weight(i, j) > 0.0 && m.at(t.x[i], t.y[j], 0) == 0.0f) {
          v = 0.0;
        }
      }
    }
    img.data()[p] = v;
  }
  return img;
}

RasterGradients backward(const FrameBuffer& fb, const TriangleMesh& mesh, const Upstream& upstream,
                         const ColorInputs* color, bool texel_gradients) {
  check_fb(fb, mesh);
  check_upstream(upstream.color, fb, 3, "color");
  check_upstream(upstream.depth, fb, 1, "depth");
  check_upstream(upstream.normal, fb, 3, "normal");
  if (upstream.color && (!color || !color->light || !color->albedo)) {
    throw Error("color upstream gradient given without the lighting and texture used to render it");
  }
  const Camera& cam = fb.camera;
  RasterGradients out;
  out.vertices.assign(mesh.vertices.size(), Vec3::Zero());
  const bool want_texels = texel_gradients && upstream.color;
  if (want_texels) {
    out.texels = ImageD(color->albedo->size(), color->albedo->size(), 3);
  }

  // Pull the gradients back through the blend band to the raw buffers.
  std::vector<double> dalpha(fb.events.size(), 0.0);
  ImageD gc;
  ImageD gd;
  ImageD gn;
  if (upstream.color) {
    gc = *upstream.color;
    if (color->options.antialias && !fb.events.empty()) {
      const ImageD raw = raw_color(fb, mesh, *color->light, *color->albedo, color->options.background);
      events_backward(fb, raw, *upstream.color, gc, dalpha, color->options.pixel_mask);
    }
  }
  if (upstream.depth) {
    gd = *upstream.depth;
    if (!fb.events.empty()) {
      events_backward(fb, raw_depth(fb), *upstream.depth, gd, dalpha, nullptr);
    }
  }
  if (upstream.normal) {
    gn = *upstream.normal;
    if (!fb.events.empty()) {
      events_backward(fb, raw_normal(fb, mesh), *upstream.normal, gn, dalpha, nullptr);
    }
  }

  std::vector<Vec3> dnormals(mesh.vertices.size(), Vec3::Zero());
  const Mat3 rt = cam.rotation.transpose();
  const ImageF* tex = upstream.color ? &color->albedo->texels() : nullptr;

  for (int p = 0; p < static_cast<int>(fb.pixel_count()); ++p) {
    if (!fb.covered(p)) {
      continue;
    }
    const Vec3 dc = upstream.color ? Vec3(gc.pixel(p)[0], gc.pixel(p)[1], gc.pixel(p)[2]) : Vec3::Zero();
    const double dz = upstream.depth ? gd.data()[p] : 0.0;
    Vec3 dn = upstream.normal ? Vec3(gn.pixel(p)[0], gn.pixel(p)[1], gn.pixel(p)[2]) : Vec3::Zero();
    if (dc.isZero(0.0) && dz == 0.0 && dn.isZero(0.0)) {
      continue;
    }
    const Fragment fr = fragment_at(fb, p);
    const Tri& tri = mesh.faces[fr.face];
    const Vec3 m = interpolated_normal_raw(fb, mesh, fr);
    const double mlen = m.norm();
    const Vec3 n = mlen > 0.0 ? Vec3(m / mlen) : Vec3::Zero();
    double db[3] = {0.0, 0.0, 0.0};

    if (!dc.isZero(0.0)) {
      const Vec2 uv = interpolated_uv(mesh, fr);
      const Taps t = bilinear_taps(tex->width(), uv);
      Vec3 a = Vec3::Zero();
      for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
          a += t.weight(i, j) * texel(*tex, t.x[i], t.y[j]);
        }
      }
      const Vec3 e = color->light->irradiance(n);
      const Vec3 de = dc.cwiseProduct(a);
      dn += color->light->irradiance_jacobian(n).transpose() * de;
      const Vec3 da = dc.cwiseProduct(e);
      if (want_texels) {
        for (int j = 0; j < 2; ++j) {
          for (int i = 0; i < 2; ++i) {
            double* g = out.texels.pixel(static_cast<std::size_t>(t.y[j]) * tex->width() + t.x[i]);
            const double w = t.weight(i, j);
            g[0] += w * da.x();
            g[1] += w * da.y();
            g[2] += w * da.z();
          }
        }
      }
      const double size = tex->width();
      const Vec3 t00 = texel(*tex, t.x[0], t.y[0]);
      const Vec3 t10 = texel(*tex, t.x[1], t.y[0]);
      const Vec3 t01 = texel(*tex, t.x[0], t.y[1]);
      const Vec3 t11 = texel(*tex, t.x[1], t.y[1]);
      const Vec3 dadx = (1.0 - t.fy) * (t10 - t00) + t.fy * (t11 - t01);
      const Vec3 dady = (1.0 - t.fx) * (t01 - t00) + t.fx * (t11 - t10);
      const Vec2 duv(size * da.dot(dadx), -size * da.dot(dady));
      for (int k = 0; k < 3; ++k) {
        db[k] += duv.dot(mesh.corner_uv(fr.face, k));
      }
    }

    if (mlen > 0.0 && !dn.isZero(0.0)) {
      const Vec3 dm = (dn - n * n.dot(dn)) / mlen;
      for (int k = 0; k < 3; ++k) {
        dnormals[tri[k]] += fr.b[k] * dm;
        db[k] += dm.dot(fb.vertex_normals[tri[k]]);
      }
    }

    // Ray/triangle intersection P0 + b1 e1 + b2 e2 = t d, differentiated
    // implicitly in camera space.
    const Vec3 v(db[1] - db[0], db[2] - db[0], dz);
    const Vec3 p0 = cam.to_camera(mesh.vertices[tri[0]]);
    const Vec3 p1 = cam.to_camera(mesh.vertices[tri[1]]);
    const Vec3 p2 = cam.to_camera(mesh.vertices[tri[2]]);
    Mat3 M;
    M.col(0) = p1 - p0;
    M.col(1) = p2 - p0;
    M.col(2) = -cam.ray(p % fb.width() + 0.5, p / fb.width() + 0.5);
    const Vec3 w = M.transpose().inverse() * v;
    const Vec3 gw = rt * w;
    for (int k = 0; k < 3; ++k) {
      out.vertices[tri[k]] -= fr.b[k] * gw;
    }
  }

  // Blend weights depend on where the silhouette edge crosses the pixel pair.
  for (std::size_t i = 0; i < fb.events.size(); ++i) {
    if (dalpha[i] == 0.0) {
      continue;
    }
    const SilhouetteEvent& e = fb.events[i];
    const double ds = e.target_is_outer ? dalpha[i] : -dalpha[i];
    const Vec3 pa = cam.to_camera(mesh.vertices[e.va]);
    const Vec3 pb = cam.to_camera(mesh.vertices[e.vb]);
    const Vec2 A = cam.project_camera(pa);
    const Vec2 B = cam.project_camera(pb);
    const Vec2 P = pixel_center(fb, e.inner);
    const Vec2 D = pixel_center(fb, e.outer) - P;
    const double f = cross2(B - A, P - A);
    const double g = cross2(B - A, D);
    if (g == 0.0) {
      continue;
    }
    const Vec2 dfA(B.y() - P.y(), P.x() - B.x());
    const Vec2 dfB((P - A).y(), -(P - A).x());
    const Vec2 dgB(D.y(), -D.x());
    const Vec2 dgA = -dgB;
    const Vec2 dsA = -dfA / g + f * dgA / (g * g);
    const Vec2 dsB = -dfB / g + f * dgB / (g * g);
    out.vertices[e.va] += rt * projection_backward(cam, pa, ds * dsA);
    out.vertices[e.vb] += rt * projection_backward(cam, pb, ds * dsB);
  }

  const std::vector<Vec3> from_normals = vertex_normals_backward(mesh, dnormals);
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    out.vertices[i] += from_normals[i];
  }
  return out;
}

} // namespace meshalign

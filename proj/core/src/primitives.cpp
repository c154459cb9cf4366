#include "meshalign/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "meshalign/error.hpp"

namespace meshalign {

TriangleMesh make_icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : mesh.vertices) {
    p.normalize();
  }
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return mesh;
}

TriangleMesh subdivide_midpoint(const TriangleMesh& mesh) {
  TriangleMesh out;
  out.vertices = mesh.vertices;
  out.uvs = mesh.uvs;
  out.texture = mesh.texture;
  std::map<Edge, int> vmid;
  std::map<Edge, int> uvmid;
  auto mid_vertex = [&](int a, int b) {
    auto [it, inserted] = vmid.try_emplace(make_edge(a, b), out.vertex_count());
    if (inserted) {
      out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    }
    return it->second;
  };
  auto mid_uv = [&](int a, int b) {
    auto [it, inserted] = uvmid.try_emplace(make_edge(a, b), static_cast<int>(out.uvs.size()));
    if (inserted) {
      out.uvs.push_back(0.5 * (mesh.uvs[a] + mesh.uvs[b]));
    }
    return it->second;
  };
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& t = mesh.faces[f];
    const int ab = mid_vertex(t[0], t[1]);
    const int bc = mid_vertex(t[1], t[2]);
    const int ca = mid_vertex(t[2], t[0]);
    out.faces.push_back({t[0], ab, ca});
    out.faces.push_back({ab, t[1], bc});
    out.faces.push_back({ca, bc, t[2]});
    out.faces.push_back({ab, bc, ca});
    if (mesh.has_uvs()) {
      const Tri& u = mesh.face_uvs[f];
      const int uab = mid_uv(u[0], u[1]);
      const int ubc = mid_uv(u[1], u[2]);
      const int uca = mid_uv(u[2], u[0]);
      out.face_uvs.push_back({u[0], uab, uca});
      out.face_uvs.push_back({uab, u[1], ubc});
      out.face_uvs.push_back({uca, ubc, u[2]});
      out.face_uvs.push_back({uab, ubc, uca});
    }
  }
  return out;
}

TriangleMesh make_icosphere(int levels) {
  if (levels < 0) {
    throw ConfigError("make_icosphere: levels must be non-negative");
  }
  TriangleMesh mesh = make_icosahedron();
  for (int i = 0; i < levels; ++i) {
    mesh = subdivide_midpoint(mesh);
    for (Vec3& p : mesh.vertices) {
      p.normalize();
    }
  }
  return mesh;
}

TriangleMesh make_grid(int nx, int ny) {
  if (nx < 1 || ny < 1) {
    throw ConfigError("make_grid: need at least one cell per axis");
  }
  TriangleMesh mesh;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = static_cast<double>(i) / nx;
      const double y = static_cast<double>(j) / ny;
      mesh.vertices.emplace_back(x, y, 0.0);
      mesh.uvs.emplace_back(x, y);
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Tri a{id(i, j), id(i + 1, j), id(i + 1, j + 1)};
      const Tri b{id(i, j), id(i + 1, j + 1), id(i, j + 1)};
      mesh.faces.push_back(a);
      mesh.faces.push_back(b);
      mesh.face_uvs.push_back(a);
      mesh.face_uvs.push_back(b);
    }
  }
  return mesh;
}

void assign_planar_uvs(TriangleMesh& mesh) {
  mesh.uvs.clear();
  for (const Vec3& p : mesh.vertices) {
    mesh.uvs.emplace_back(0.5 * (p.x() + 1.0), 0.5 * (p.y() + 1.0));
  }
  mesh.face_uvs = mesh.faces;
}

TriangleMesh make_capped_cylinder_sphere(int rings, int segments) {
  if (rings < 5 || segments < 6) {
    throw ConfigError("make_capped_cylinder_sphere: need at least 5 rings and 6 segments");
  }
  using std::numbers::pi;
  const int top_ring = std::max(2, rings / 4);           // last ring of the top cap
  const int bottom_ring = rings + 1 - top_ring;          // first ring of the bottom cap
  const double cap_radius = 0.16;
  const Vec2 top_center(0.25, 0.825);
  const Vec2 bottom_center(0.75, 0.825);
  const double band_top_v = 0.64;
  const double band_bottom_v = 0.01;

  TriangleMesh mesh;
  auto phi_of = [&](int r) { return pi * r / (rings + 1); };
  // theta = pi at segment 0 puts the band seam at the back (-z).
  auto theta_of = [&](int s) { return pi + 2.0 * pi * s / segments; };
  auto position = [&](double phi, double theta) {
    return Vec3(std::sin(phi) * std::sin(theta), std::cos(phi), std::sin(phi) * std::cos(theta));
  };

  mesh.vertices.push_back({0, 1, 0});
  for (int r = 1; r <= rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.vertices.push_back(position(phi_of(r), theta_of(s)));
    }
  }
  mesh.vertices.push_back({0, -1, 0});
  const int south = mesh.vertex_count() - 1;
  auto vid = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };

  // UV pools per chart.
  std::map<std::pair<int, int>, int> top_uv, bottom_uv, band_uv;
  auto cap_uv = [&](std::map<std::pair<int, int>, int>& cache, int r, int s, bool top) {
    const int key_s = r == 0 || r == rings + 1 ? 0 : s % segments;
    auto [it, inserted] = cache.try_emplace({r, key_s}, static_cast<int>(mesh.uvs.size()));
    if (inserted) {
      const double frac = top ? phi_of(r) / phi_of(top_ring)
                              : (pi - phi_of(r)) / (pi - phi_of(bottom_ring));
      const double theta = theta_of(s);
      const Vec2 c = top ? top_center : bottom_center;
      const double sign = top ? 1.0 : -1.0;
      mesh.uvs.push_back(c + cap_radius * frac * Vec2(std::sin(theta), sign * std::cos(theta)));
    }
    return it->second;
  };
  auto band = [&](int r, int s) {
    auto [it, inserted] = band_uv.try_emplace({r, s}, static_cast<int>(mesh.uvs.size()));
    if (inserted) {
      const double u = 0.01 + 0.98 * static_cast<double>(s) / segments;
      const double t = static_cast<double>(r - top_ring) / (bottom_ring - top_ring);
      mesh.uvs.push_back({u, band_top_v + t * (band_bottom_v - band_top_v)});
    }
    return it->second;
  };

  auto add = [&](Tri f, Tri uv) {
    mesh.faces.push_back(f);
    mesh.face_uvs.push_back(uv);
  };
  // Top fan and top cap.
  for (int s = 0; s < segments; ++s) {
    add({0, vid(1, s + 1), vid(1, s)},
        {cap_uv(top_uv, 0, 0, true), cap_uv(top_uv, 1, s + 1, true), cap_uv(top_uv, 1, s, true)});
  }
  for (int r = 1; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = vid(r, s), b = vid(r, s + 1), c = vid(r + 1, s), d = vid(r + 1, s + 1);
      Tri ua, ub;
      if (r < top_ring) {
        ua = {cap_uv(top_uv, r, s, true), cap_uv(top_uv, r, s + 1, true), cap_uv(top_uv, r + 1, s + 1, true)};
        ub = {cap_uv(top_uv, r, s, true), cap_uv(top_uv, r + 1, s + 1, true), cap_uv(top_uv, r + 1, s, true)};
      } else if (r >= bottom_ring) {
        ua = {cap_uv(bottom_uv, r, s, false), cap_uv(bottom_uv, r, s + 1, false),
              cap_uv(bottom_uv, r + 1, s + 1, false)};
        ub = {cap_uv(bottom_uv, r, s, false), cap_uv(bottom_uv, r + 1, s + 1, false),
              cap_uv(bottom_uv, r + 1, s, false)};
      } else {
        ua = {band(r, s), band(r, s + 1), band(r + 1, s + 1)};
        ub = {band(r, s), band(r + 1, s + 1), band(r + 1, s)};
      }
      add({a, b, d}, ua);
      add({a, d, c}, ub);
    }
  }
  for (int s = 0; s < segments; ++s) {
    add({south, vid(rings, s), vid(rings, s + 1)},
        {cap_uv(bottom_uv, rings + 1, 0, false), cap_uv(bottom_uv, rings, s, false),
         cap_uv(bottom_uv, rings, s + 1, false)});
  }

  // Orient outward.
  double volume = 0.0;
  for (const Tri& t : mesh.faces) {
    volume += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  if (volume < 0.0) {
    mesh = flip_orientation(mesh);
  }
  return mesh;
}

} // namespace meshalign

#include "meshalign/validate.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include <fmt/format.h>

namespace meshalign {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Direction in which face f traverses edge (a, b): +1 for a->b, -1 for b->a.
int traversal(const Tri& t, int a, int b) {
  for (int k = 0; k < 3; ++k) {
    if (t[k] == a && t[(k + 1) % 3] == b) {
      return 1;
    }
    if (t[k] == b && t[(k + 1) % 3] == a) {
      return -1;
    }
  }
  return 0;
}

bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  constexpr double eps = 1e-12;
  const Vec3 dir = q - p;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  const double scale = e1.norm() * e2.norm() * dir.norm();
  if (std::abs(det) <= eps * scale) {
    return false;  // parallel or coplanar; handled by the coplanar test
  }
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = s.dot(h) * inv;
  if (u < 0.0 || u > 1.0) {
    return false;
  }
  const Vec3 qv = s.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) {
    return false;
  }
  const double t = e2.dot(qv) * inv;
  return t >= 0.0 && t <= 1.0;
}

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

bool segments_cross_2d(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = orient2d(q1, q2, p1);
  const double d2 = orient2d(q1, q2, p2);
  const double d3 = orient2d(p1, p2, q1);
  const double d4 = orient2d(p1, p2, q2);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

bool point_in_triangle_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d1 = orient2d(a, b, p);
  const double d2 = orient2d(b, c, p);
  const double d3 = orient2d(c, a, p);
  return (d1 > 0 && d2 > 0 && d3 > 0) || (d1 < 0 && d2 < 0 && d3 < 0);
}

bool coplanar_overlap(const std::array<Vec3, 3>& ta, const std::array<Vec3, 3>& tb, const Vec3& normal) {
  int drop = 0;
  normal.cwiseAbs().maxCoeff(&drop);
  auto proj = [&](const Vec3& p) {
    return drop == 0 ? Vec2(p.y(), p.z()) : drop == 1 ? Vec2(p.x(), p.z()) : Vec2(p.x(), p.y());
  };
  std::array<Vec2, 3> a, b;
  for (int i = 0; i < 3; ++i) {
    a[i] = proj(ta[i]);
    b[i] = proj(tb[i]);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (segments_cross_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) {
        return true;
      }
    }
  }
  return point_in_triangle_2d(a[0], b[0], b[1], b[2]) || point_in_triangle_2d(b[0], a[0], a[1], a[2]);
}

} // namespace

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                         const Vec3& b1, const Vec3& b2) {
  const std::array<Vec3, 3> ta{a0, a1, a2};
  const std::array<Vec3, 3> tb{b0, b1, b2};
  for (int i = 0; i < 3; ++i) {
    if (segment_hits_triangle(ta[i], ta[(i + 1) % 3], b0, b1, b2) ||
        segment_hits_triangle(tb[i], tb[(i + 1) % 3], a0, a1, a2)) {
      return true;
    }
  }
  const Vec3 na = (a1 - a0).cross(a2 - a0);
  const double scale = na.norm() * std::max({(b0 - a0).norm(), (b1 - a0).norm(), (b2 - a0).norm()});
  const bool coplanar = std::abs(na.dot(b0 - a0)) <= 1e-12 * scale &&
                        std::abs(na.dot(b1 - a0)) <= 1e-12 * scale &&
                        std::abs(na.dot(b2 - a0)) <= 1e-12 * scale;
  return coplanar && coplanar_overlap(ta, tb, na);
}

int count_self_intersections(const TriangleMesh& mesh) {
  const int nf = mesh.face_count();
  struct Box {
    Vec3 lo, hi;
    int face;
  };
  std::vector<Box> boxes(nf);
  for (int f = 0; f < nf; ++f) {
    const Tri& t = mesh.faces[f];
    Box& b = boxes[f];
    b.lo = mesh.vertices[t[0]].cwiseMin(mesh.vertices[t[1]]).cwiseMin(mesh.vertices[t[2]]);
    b.hi = mesh.vertices[t[0]].cwiseMax(mesh.vertices[t[1]]).cwiseMax(mesh.vertices[t[2]]);
    b.face = f;
  }
  std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) {
    return a.lo.x() < b.lo.x() || (a.lo.x() == b.lo.x() && a.face < b.face);
  });
  int count = 0;
  for (int i = 0; i < nf; ++i) {
    const Box& bi = boxes[i];
    for (int j = i + 1; j < nf && boxes[j].lo.x() <= bi.hi.x(); ++j) {
      const Box& bj = boxes[j];
      if ((bj.lo.array() > bi.hi.array()).any() || (bi.lo.array() > bj.hi.array()).any()) {
        continue;
      }
      const Tri& ta = mesh.faces[bi.face];
      const Tri& tb = mesh.faces[bj.face];
      bool shares = false;
      for (int a : ta) {
        for (int b : tb) {
          shares = shares || a == b;
        }
      }
      if (shares) {
        continue;
      }
      if (triangles_intersect(mesh.vertices[ta[0]], mesh.vertices[ta[1]], mesh.vertices[ta[2]],
                              mesh.vertices[tb[0]], mesh.vertices[tb[1]], mesh.vertices[tb[2]])) {
        ++count;
      }
    }
  }
  return count;
}

ValidationReport validate(const TriangleMesh& mesh, const ValidateOptions& options) {
  ValidationReport r;
  r.vertex_count = mesh.vertex_count();
  r.face_count = mesh.face_count();
  for (const Tri& t : mesh.faces) {
    for (int v : t) {
      if (v < 0 || v >= r.vertex_count) {
        ++r.out_of_range_indices;
      }
    }
  }
  if (r.out_of_range_indices > 0) {
    r.orientable = false;
    return r;
  }
  if (mesh.has_uvs()) {
    r.uv_complete = mesh.face_uvs.size() == mesh.faces.size();
    for (const Tri& t : mesh.face_uvs) {
      for (int u : t) {
        r.uv_complete = r.uv_complete && u >= 0 && u < static_cast<int>(mesh.uvs.size());
      }
    }
  }

  const MeshTopology topo = build_topology(mesh);
  r.edge_count = static_cast<int>(topo.edges.size());
  r.euler_characteristic = r.vertex_count - r.edge_count + r.face_count;
  for (int f = 0; f < r.face_count; ++f) {
    const Tri& t = mesh.faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || face_cross(mesh, f).squaredNorm() == 0.0) {
      ++r.degenerate_faces;
    }
  }
  for (int v = 0; v < r.vertex_count; ++v) {
    if (topo.vertex_valence[v] == 0) {
      ++r.isolated_vertices;
    }
  }
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    const auto& adj = topo.edge_faces[e];
    if (adj.size() == 1) {
      ++r.boundary_edges;
    } else if (adj.size() > 2) {
      ++r.non_manifold_edges;
    } else if (traversal(mesh.faces[adj[0]], topo.edges[e].a, topo.edges[e].b) ==
               traversal(mesh.faces[adj[1]], topo.edges[e].a, topo.edges[e].b)) {
      r.consistently_oriented = false;
    }
  }

  // Vertex links: incident faces must form a single edge-connected fan.
  std::vector<std::vector<int>> vertex_faces(r.vertex_count);
  for (int f = 0; f < r.face_count; ++f) {
    for (int v : mesh.faces[f]) {
      vertex_faces[v].push_back(f);
    }
  }
  for (int v = 0; v < r.vertex_count; ++v) {
    const auto& fs = vertex_faces[v];
    if (fs.size() < 2) {
      continue;
    }
    UnionFind uf(static_cast<int>(fs.size()));
    for (std::size_t i = 0; i < fs.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        const Tri& t = mesh.faces[fs[i]];
        if (t[k] != v && t[(k + 1) % 3] != v) {
          continue;
        }
        const int nb = topo.face_neighbors[fs[i]][k];
        const auto it = std::find(fs.begin(), fs.end(), nb);
        if (nb >= 0 && it != fs.end()) {
          uf.unite(static_cast<int>(i), static_cast<int>(it - fs.begin()));
        }
      }
    }
    int roots = 0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      roots += uf.find(static_cast<int>(i)) == static_cast<int>(i);
    }
    if (roots > 1) {
      ++r.non_manifold_vertices;
    }
  }

  // Orientability: propagate a flip flag across manifold edges.
  std::vector<int> flip(r.face_count, -1);
  for (int seed = 0; seed < r.face_count && r.orientable; ++seed) {
    if (flip[seed] >= 0) {
      continue;
    }
    flip[seed] = 0;
    std::queue<int> q;
    q.push(seed);
    while (!q.empty() && r.orientable) {
      const int f = q.front();
      q.pop();
      for (int k = 0; k < 3; ++k) {
        const int e = topo.face_edges[f][k];
        if (topo.edge_faces[e].size() != 2) {
          continue;
        }
        const int g = topo.face_neighbors[f][k];
        const Edge ed = topo.edges[e];
        const bool same = traversal(mesh.faces[f], ed.a, ed.b) == traversal(mesh.faces[g], ed.a, ed.b);
        const int want = same ? 1 - flip[f] : flip[f];
        if (flip[g] < 0) {
          flip[g] = want;
          q.push(g);
        } else if (flip[g] != want) {
          r.orientable = false;
        }
      }
    }
  }
  if (!r.orientable) {
    r.consistently_oriented = false;
  }

  if (options.check_self_intersections && r.degenerate_faces == 0) {
    r.self_intersections = count_self_intersections(mesh);
  }
  return r;
}

std::string ValidationReport::summary() const {
  return fmt::format(
      "V={} E={} F={} chi={} boundary_edges={} non_manifold_edges={} non_manifold_vertices={} "
      "degenerate={} isolated={} self_intersections={} orientable={} consistent={}",
      vertex_count, edge_count, face_count, euler_characteristic, boundary_edges, non_manifold_edges,
      non_manifold_vertices, degenerate_faces, isolated_vertices, self_intersections, orientable,
      consistently_oriented);
}

} // namespace meshalign

#include <algorithm>
#include <cmath>
#include <queue>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/remesh.hpp"

namespace meshalign {

namespace {

using Quadric = Eigen::Matrix4d;

struct Candidate {
  double cost;
  int from;
  int to;
  int stamp_from;
  int stamp_to;
  // Min-heap on cost, ties broken by vertex ids for determinism.
  bool operator>(const Candidate& o) const {
    if (cost != o.cost) {
      return cost > o.cost;
    }
    if (from != o.from) {
      return from > o.from;
    }
    return to > o.to;
  }
};

double uv_signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

class Decimator {
 public:
  Decimator(const TriangleMesh& mesh, const DecimateOptions& options)
      : mesh_(mesh), options_(options), faces_(mesh.faces), face_uvs_(mesh.face_uvs) {
    const int n = mesh.vertex_count();
    vertex_alive_.assign(n, 1);
    face_alive_.assign(mesh.face_count(), 1);
    stamp_.assign(n, 0);
    locked_.assign(n, 0);
    vertex_faces_.resize(n);
    quadrics_.assign(n, Quadric::Zero());
    alive_vertices_ = n;

    for (int f = 0; f < mesh.face_count(); ++f) {
      const Tri& t = mesh.faces[f];
      for (int v : t) {
        vertex_faces_[v].push_back(f);
      }
      const Vec3 c = face_cross(mesh, f);
      const double len = c.norm();
      if (len == 0.0) {
        continue;
      }
      const Vec3 nrm = c / len;
      Eigen::Vector4d plane(nrm.x(), nrm.y(), nrm.z(), -nrm.dot(mesh.vertices[t[0]]));
      const Quadric q = 0.5 * len * plane * plane.transpose();
      for (int v : t) {
        quadrics_[v] += q;
      }
    }
    const MeshTopology topo = build_topology(mesh);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
      if (topo.edge_faces[e].size() != 2 || is_uv_seam(mesh, topo, static_cast<int>(e))) {
        locked_[topo.edges[e].a] = 1;
        locked_[topo.edges[e].b] = 1;
      }
    }
    for (const Edge& e : topo.edges) {
      push(e.a, e.b);
      push(e.b, e.a);
    }
  }

  int run(int target) {
    while (alive_vertices_ > target && !heap_.empty()) {
      const Candidate c = heap_.top();
      heap_.pop();
      if (!vertex_alive_[c.from] || !vertex_alive_[c.to] || stamp_[c.from] != c.stamp_from ||
          stamp_[c.to] != c.stamp_to) {
        continue;
      }
      if (!collapse(c.from, c.to)) {
        continue;
      }
    }
    return alive_vertices_;
  }

  TriangleMesh result() const {
    TriangleMesh out;
    out.texture = mesh_.texture;
    std::vector<int> vmap(mesh_.vertex_count(), -1);
    for (int v = 0; v < mesh_.vertex_count(); ++v) {
      if (vertex_alive_[v]) {
        vmap[v] = out.vertex_count();
        out.vertices.push_back(mesh_.vertices[v]);
      }
    }
    std::vector<int> uvmap(mesh_.uvs.size(), -1);
    const bool textured = mesh_.has_uvs();
    std::vector<Tri> kept_uv;
    for (int f = 0; f < mesh_.face_count(); ++f) {
      if (!face_alive_[f]) {
        continue;
      }
      const Tri& t = faces_[f];
      out.faces.push_back({vmap[t[0]], vmap[t[1]], vmap[t[2]]});
      if (textured) {
        kept_uv.push_back(face_uvs_[f]);
      }
    }
    if (textured) {
      // UV pool keeps input order restricted to referenced entries.
      for (const Tri& t : kept_uv) {
        for (int u : t) {
          uvmap[u] = 0;
        }
      }
      for (std::size_t u = 0; u < uvmap.size(); ++u) {
        if (uvmap[u] == 0) {
          uvmap[u] = static_cast<int>(out.uvs.size());
          out.uvs.push_back(mesh_.uvs[u]);
        }
      }
      for (const Tri& t : kept_uv) {
        out.face_uvs.push_back({uvmap[t[0]], uvmap[t[1]], uvmap[t[2]]});
      }
    }
    return out;
  }

 private:
  double cost(int from, int to) const {
    const Eigen::Vector4d p(mesh_.vertices[to].x(), mesh_.vertices[to].y(), mesh_.vertices[to].z(), 1.0);
    return std::max(0.0, p.dot((quadrics_[from] + quadrics_[to]) * p));
  }

  void push(int from, int to) {
    if (locked_[from]) {
      return;
    }
    heap_.push({cost(from, to), from, to, stamp_[from], stamp_[to]});
  }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vertex_faces_[v]) {
      if (!face_alive_[f]) {
        continue;
      }
      for (int w : faces_[f]) {
        if (w != v) {
          out.push_back(w);
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool collapse(int a, int b) {
    // Faces incident to both endpoints disappear.
    std::vector<int> shared;
    std::vector<int> moving;
    for (int f : vertex_faces_[a]) {
      if (!face_alive_[f]) {
        continue;
      }
      const Tri& t = faces_[f];
      if (t[0] == b || t[1] == b || t[2] == b) {
        shared.push_back(f);
      } else {
        moving.push_back(f);
      }
    }
    if (shared.size() != 2) {
      return false;
    }
    // Link condition.
    const std::vector<int> na = neighbors(a);
    const std::vector<int> nb = neighbors(b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common.size() != 2 || alive_vertices_ <= 4) {
      return false;
    }

    const bool textured = mesh_.has_uvs();
    int b_uv = -1;
    if (textured) {
      const Tri& t = faces_[shared[0]];
      for (int k = 0; k < 3; ++k) {
        if (t[k] == b) {
          b_uv = face_uvs_[shared[0]][k];
        }
      }
    }

    const Vec3& pb = mesh_.vertices[b];
    for (int f : moving) {
      const Tri& t = faces_[f];
      std::array<Vec3, 3> p;
      std::array<Vec2, 3> uv;
      for (int k = 0; k < 3; ++k) {
        p[k] = mesh_.vertices[t[k]];
        if (textured) {
          uv[k] = mesh_.uvs[face_uvs_[f][k]];
        }
      }
      const Vec3 before = (p[1] - p[0]).cross(p[2] - p[0]);
      const double uv_before = textured ? uv_signed_area(uv[0], uv[1], uv[2]) : 0.0;
      for (int k = 0; k < 3; ++k) {
        if (t[k] == a) {
          p[k] = pb;
          if (textured) {
            uv[k] = mesh_.uvs[b_uv];
          }
        }
      }
      const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
      const double lb = before.norm();
      const double la = after.norm();
      if (la <= 1e-12 * lb || after.dot(before) < options_.min_normal_cosine * la * lb) {
        return false;
      }
      if (textured) {
        const double uv_after = uv_signed_area(uv[0], uv[1], uv[2]);
        if (uv_after * uv_before <= 0.0) {
          return false;
        }
      }
    }

    for (int f : shared) {
      face_alive_[f] = 0;
    }
    for (int f : moving) {
      Tri& t = faces_[f];
      for (int k = 0; k < 3; ++k) {
        if (t[k] == a) {
          t[k] = b;
          if (textured) {
            face_uvs_[f][k] = b_uv;
          }
        }
      }
      vertex_faces_[b].push_back(f);
    }
    vertex_alive_[a] = 0;
    --alive_vertices_;
    quadrics_[b] += quadrics_[a];

    ++stamp_[b];
    const std::vector<int> ring = neighbors(b);
    for (int w : ring) {
      ++stamp_[w];
    }
    for (int w : ring) {
      push(b, w);
      push(w, b);
      for (int x : neighbors(w)) {
        push(w, x);
      }
    }
    return true;
  }

  const TriangleMesh& mesh_;
  DecimateOptions options_;
  std::vector<char> vertex_alive_;
  std::vector<char> face_alive_;
  std::vector<int> stamp_;
  std::vector<char> locked_;
  std::vector<std::vector<int>> vertex_faces_;
  std::vector<Quadric> quadrics_;
  std::vector<Tri> faces_;
  std::vector<Tri> face_uvs_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
  int alive_vertices_ = 0;
};

} // namespace

TriangleMesh decimate_preserve_uv(const TriangleMesh& mesh, int target_vertex_count,
                                  const DecimateOptions& options) {
  if (target_vertex_count < 0) {
    throw ConfigError("decimate_preserve_uv: target must be non-negative");
  }
  if (target_vertex_count >= mesh.vertex_count()) {
    return mesh;
  }
  Decimator dec(mesh, options);
  const int reached = dec.run(target_vertex_count);
  if (reached > target_vertex_count) {
    throw GeometryError(fmt::format(
        "decimate_preserve_uv: cannot reach {} vertices without collapsing UV seams; achievable minimum is {}",
        target_vertex_count, reached));
  }
  return dec.result();
}

} // namespace meshalign

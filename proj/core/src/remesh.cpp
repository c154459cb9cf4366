#include "meshalign/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "meshalign/error.hpp"

namespace meshalign {

namespace {

constexpr int kMaxRefinePasses = 64;

struct EdgeLength {
  int edge;
  double length;
};

// One pass of midpoint splits over the marked edges. Faces with one, two or
// three marked edges are split into two, three or four triangles.
TriangleMesh split_marked(const TriangleMesh& mesh, const MeshTopology& topo, const std::vector<char>& marked,
                          std::vector<Edge>* parents) {
  TriangleMesh out;
  out.vertices = mesh.vertices;
  out.uvs = mesh.uvs;
  out.texture = mesh.texture;
  std::vector<int> midpoint(topo.edges.size(), -1);
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    if (marked[e]) {
      midpoint[e] = out.vertex_count();
      out.vertices.push_back(0.5 * (mesh.vertices[topo.edges[e].a] + mesh.vertices[topo.edges[e].b]));
      if (parents) {
        parents->push_back(topo.edges[e]);
      }
    }
  }
  std::map<Edge, int> uv_mid;
  auto mid_uv = [&](int a, int b) {
    auto [it, inserted] = uv_mid.try_emplace(make_edge(a, b), static_cast<int>(out.uvs.size()));
    if (inserted) {
      out.uvs.push_back(0.5 * (mesh.uvs[a] + mesh.uvs[b]));
    }
    return it->second;
  };

  const bool textured = mesh.has_uvs();
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& c = mesh.faces[f];
    const Tri uvc = textured ? mesh.face_uvs[f] : Tri{0, 0, 0};
    std::array<int, 3> m{-1, -1, -1};
    std::array<int, 3> mu{-1, -1, -1};
    int count = 0;
    for (int k = 0; k < 3; ++k) {
      const int e = topo.face_edges[f][k];
      if (marked[e]) {
        m[k] = midpoint[e];
        if (textured) {
          mu[k] = mid_uv(uvc[k], uvc[(k + 1) % 3]);
        }
        ++count;
      }
    }
    auto emit = [&](Tri pos, Tri uv) {
      out.faces.push_back(pos);
      if (textured) {
        out.face_uvs.push_back(uv);
      }
    };
    if (count == 0) {
      emit(c, uvc);
    } else if (count == 1) {
      const int k = m[0] >= 0 ? 0 : m[1] >= 0 ? 1 : 2;
      const int k1 = (k + 1) % 3, k2 = (k + 2) % 3;
      emit({c[k], m[k], c[k2]}, {uvc[k], mu[k], uvc[k2]});
      emit({m[k], c[k1], c[k2]}, {mu[k], uvc[k1], uvc[k2]});
    } else if (count == 2) {
      const int unmarked = m[0] < 0 ? 0 : m[1] < 0 ? 1 : 2;
      const int k = (unmarked + 1) % 3;
      const int k1 = (k + 1) % 3, k2 = (k + 2) % 3;
      // Corner triangle at c[k1], then the remaining quad
      // (c[k], m[k], m[k1], c[k2]) split along its shorter diagonal.
      emit({m[k], c[k1], m[k1]}, {mu[k], uvc[k1], mu[k1]});
      const double d1 = (out.vertices[c[k]] - out.vertices[m[k1]]).squaredNorm();
      const double d2 = (out.vertices[m[k]] - out.vertices[c[k2]]).squaredNorm();
      if (d1 <= d2) {
        emit({c[k], m[k], m[k1]}, {uvc[k], mu[k], mu[k1]});
        emit({c[k], m[k1], c[k2]}, {uvc[k], mu[k1], uvc[k2]});
      } else {
        emit({c[k], m[k], c[k2]}, {uvc[k], mu[k], uvc[k2]});
        emit({m[k], m[k1], c[k2]}, {mu[k], mu[k1], uvc[k2]});
      }
    } else {
      emit({c[0], m[0], m[2]}, {uvc[0], mu[0], mu[2]});
      emit({m[0], c[1], m[1]}, {mu[0], uvc[1], mu[1]});
      emit({m[2], m[1], c[2]}, {mu[2], mu[1], uvc[2]});
      emit({m[0], m[1], m[2]}, {mu[0], mu[1], mu[2]});
    }
  }
  return out;
}

} // namespace

TriangleMesh remesh_refine(const TriangleMesh& mesh, double target_edge_factor, RefinementMap* map) {
  if (!(target_edge_factor > 0.0 && target_edge_factor < 1.0)) {
    throw ConfigError(fmt::format("remesh_refine: factor must lie in (0, 1), got {}", target_edge_factor));
  }
  if (map) {
    map->base_vertices = mesh.vertex_count();
    map->parents.clear();
  }
  if (mesh.faces.empty()) {
    return mesh;
  }
  const double target = target_edge_factor * average_edge_length(mesh);
  TriangleMesh current = mesh;
  for (int pass = 0; pass < kMaxRefinePasses; ++pass) {
    const MeshTopology topo = build_topology(current);
    std::vector<EdgeLength> lengths(topo.edges.size());
    double total = 0.0;
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
      const double len = (current.vertices[topo.edges[e].a] - current.vertices[topo.edges[e].b]).norm();
      lengths[e] = {static_cast<int>(e), len};
      total += len;
    }
    const double avg = total / static_cast<double>(lengths.size());
    if (avg <= target * (1.0 + 1e-12)) {
      break;
    }
    // Vertex count scales with (avg / target)^2 at fixed area.
    const double growth = (avg / target) * (avg / target) - 1.0;
    std::size_t wanted = static_cast<std::size_t>(std::ceil(growth * current.vertex_count()));
    wanted = std::clamp<std::size_t>(wanted, 1, lengths.size());
    std::stable_sort(lengths.begin(), lengths.end(), [&](const EdgeLength& x, const EdgeLength& y) {
      if (x.length != y.length) {
        return x.length > y.length;
      }
      return topo.edges[x.edge] < topo.edges[y.edge];
    });
    std::vector<char> marked(topo.edges.size(), 0);
    for (std::size_t i = 0; i < wanted; ++i) {
      marked[lengths[i].edge] = 1;
    }
    current = split_marked(current, topo, marked, map ? &map->parents : nullptr);
  }
  return current;
}

std::vector<Vec3> apply_refinement(const RefinementMap& map, const std::vector<Vec3>& positions) {
  if (static_cast<int>(positions.size()) != map.base_vertices) {
    throw ConfigError(fmt::format("refinement recorded for {} vertices applied to {}", map.base_vertices,
                                  positions.size()));
  }
  std::vector<Vec3> out = positions;
  out.reserve(positions.size() + map.parents.size());
  for (const Edge& e : map.parents) {
    out.push_back(0.5 * (out[e.a] + out[e.b]));
  }
  return out;
}

} // namespace meshalign

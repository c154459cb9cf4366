#include "meshalign/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/parallel.hpp"

namespace meshalign {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

double box_distance2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
  return d.squaredNorm();
}

void require_nonempty(const TriangleMesh& m, const char* what) {
  if (m.faces.empty()) {
    throw GeometryError(fmt::format("{} mesh has no faces", what));
  }
}

} // namespace

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk over vertices, edges and the face.
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    return a;
  }
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    return b;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    return a + (d1 / (d1 - d3)) * ab;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    return c;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    return a + (d2 / (d2 - d6)) * ac;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = va + vb + vc;
  if (denom == 0.0) {
    // Degenerate triangle: fall back to the nearest edge point.
    const Vec3 cands[3] = {closest_point_on_triangle(p, a, b, b), closest_point_on_triangle(p, b, c, c),
                           closest_point_on_triangle(p, c, a, a)};
    return *std::min_element(std::begin(cands), std::end(cands), [&](const Vec3& x, const Vec3& y) {
      return (x - p).squaredNorm() < (y - p).squaredNorm();
    });
  }
  const double v = vb / denom;
  const double w = vc / denom;
  return a + v * ab + w * ac;
}

MeshDistance::MeshDistance(const TriangleMesh& mesh) : mesh_(&mesh) {
  require_nonempty(mesh, "distance query");
  const int n = mesh.face_count();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids(n);
  normals_.resize(n);
  for (int f = 0; f < n; ++f) {
    const Tri& t = mesh.faces[f];
    centroids[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    const Vec3 c = face_cross(mesh, f);
    const double len = c.norm();
    normals_[f] = len > 0.0 ? Vec3(c / len) : Vec3::Zero();
  }
  nodes_.reserve(2 * n);
  build(0, n, centroids);
}

int MeshDistance::build(int begin, int end, std::vector<Vec3>& centroids) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  Vec3 clo = node.lo;
  Vec3 chi = node.hi;
  for (int i = begin; i < end; ++i) {
    const Tri& t = mesh_->faces[order_[i]];
    for (int k = 0; k < 3; ++k) {
      node.lo = node.lo.cwiseMin(mesh_->vertices[t[k]]);
      node.hi = node.hi.cwiseMax(mesh_->vertices[t[k]]);
    }
    clo = clo.cwiseMin(centroids[order_[i]]);
    chi = chi.cwiseMax(centroids[order_[i]]);
  }
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 4) {
    nodes_[index].left = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int x, int y) {
    const double cx = centroids[x][axis];
    const double cy = centroids[y][axis];
    return cx < cy || (cx == cy && x < y);
  });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

MeshDistance::Hit MeshDistance::closest(const Vec3& p) const {
  Hit best;
  double best2 = std::numeric_limits<double>::infinity();
  // Depth-first with the nearer child on top; boxes farther than the current
  // best are pruned.
  std::array<std::pair<int, double>, 128> stack;
  int top = 0;
  stack[top++] = {0, box_distance2(p, nodes_[0].lo, nodes_[0].hi)};
  while (top > 0) {
    const auto [ni, d2] = stack[--top];
    if (d2 > best2) {
      continue;
    }
    const Node& node = nodes_[ni];
    if (node.count > 0) {
      for (int i = node.left; i < node.left + node.count; ++i) {
        const int f = order_[i];
        const Tri& t = mesh_->faces[f];
        const Vec3 q = closest_point_on_triangle(p, mesh_->vertices[t[0]], mesh_->vertices[t[1]],
                                                 mesh_->vertices[t[2]]);
        const double e2 = (q - p).squaredNorm();
        if (e2 < best2 || (e2 == best2 && f < best.face)) {
          best2 = e2;
          best.face = f;
          best.point = q;
        }
      }
      continue;
    }
    const int l = node.left;
    const int r = node.right;
    const double dl = box_distance2(p, nodes_[l].lo, nodes_[l].hi);
    const double dr = box_distance2(p, nodes_[r].lo, nodes_[r].hi);
    if (top + 2 > static_cast<int>(stack.size())) {
      throw NumericError("BVH traversal stack overflow");
    }
    if (dl <= dr) {
      stack[top++] = {r, dr};
      stack[top++] = {l, dl};
    } else {
      stack[top++] = {l, dl};
      stack[top++] = {r, dr};
    }
  }
  best.distance = std::sqrt(best2);
  return best;
}

double point_to_mesh_distance(const Vec3& p, const TriangleMesh& mesh) {
  return MeshDistance(mesh).distance(p);
}

SurfaceSamples sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
  require_nonempty(mesh, "sampled");
  if (count <= 0) {
    throw ConfigError("sample count must be positive");
  }
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    total += face_area(mesh, f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) {
    throw GeometryError("cannot sample a mesh with zero surface area");
  }
  SurfaceSamples s;
  s.points.resize(count);
  s.normals.resize(count);
  s.faces.resize(count);
  parallel_for(count, [&](int i) {
    const std::uint64_t base = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    const double u0 = unit_double(splitmix64(base + 1)) * total;
    const double r1 = std::sqrt(unit_double(splitmix64(base + 2)));
    const double r2 = unit_double(splitmix64(base + 3));
    const int f = std::min<int>(static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u0) - cdf.begin()),
                                mesh.face_count() - 1);
    const Tri& t = mesh.faces[f];
    s.points[i] = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                  r1 * r2 * mesh.vertices[t[2]];
    s.normals[i] = face_cross(mesh, f).normalized();
    s.faces[i] = f;
  });
  return s;
}

namespace {

struct Directed {
  std::vector<double> dist;
  double mean_dist = 0.0;
  double mean_nc = 0.0;
};

Directed directed(const SurfaceSamples& from, const MeshDistance& to) {
  Directed d;
  const int n = static_cast<int>(from.points.size());
  d.dist.resize(n);
  std::vector<double> nc(n);
  parallel_for(n, [&](int i) {
    const MeshDistance::Hit h = to.closest(from.points[i]);
    d.dist[i] = h.distance;
    nc[i] = std::abs(from.normals[i].dot(to.face_normal(h.face)));
  });
  // Fixed summation order keeps results thread-count independent.
  for (int i = 0; i < n; ++i) {
    d.mean_dist += d.dist[i];
    d.mean_nc += nc[i];
  }
  d.mean_dist /= n;
  d.mean_nc /= n;
  return d;
}

} // namespace

GeoReport evaluate_geometry(const TriangleMesh& candidate, const TriangleMesh& gt, int samples,
                            std::uint64_t seed, const std::vector<double>& thresholds) {
  const SurfaceSamples sc = sample_surface(candidate, samples, seed);
  const SurfaceSamples sg = sample_surface(gt, samples, seed);
  const MeshDistance dc(candidate);
  const MeshDistance dg(gt);
  const Directed c2g = directed(sc, dg);
  const Directed g2c = directed(sg, dc);
  GeoReport r;
  r.samples = samples;
  r.seed = seed;
  r.candidate_to_gt = c2g.mean_dist;
  r.gt_to_candidate = g2c.mean_dist;
  r.chamfer_l1 = 0.5 * (c2g.mean_dist + g2c.mean_dist);
  r.normal_consistency = 0.5 * (c2g.mean_nc + g2c.mean_nc);
  for (double tau : thresholds) {
    if (!(tau > 0.0)) {
      throw ConfigError("F-score threshold must be positive");
    }
    const double precision =
        static_cast<double>(std::count_if(c2g.dist.begin(), c2g.dist.end(), [&](double d) { return d <= tau; })) /
        samples;
    const double recall =
        static_cast<double>(std::count_if(g2c.dist.begin(), g2c.dist.end(), [&](double d) { return d <= tau; })) /
        samples;
    r.f_score[tau] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return r;
}

double chamfer_l1(const TriangleMesh& candidate, const TriangleMesh& gt, int samples, std::uint64_t seed) {
  return evaluate_geometry(candidate, gt, samples, seed, {}).chamfer_l1;
}

double normal_consistency(const TriangleMesh& candidate, const TriangleMesh& gt, int samples,
                          std::uint64_t seed) {
  return evaluate_geometry(candidate, gt, samples, seed, {}).normal_consistency;
}

double f_score(const TriangleMesh& candidate, const TriangleMesh& gt, double tau, int samples,
               std::uint64_t seed) {
  return evaluate_geometry(candidate, gt, samples, seed, {tau}).f_score.at(tau);
}

namespace {

void require_same_shape(const ImageD& a, const ImageD& b) {
  if (!a.same_shape(b) || a.empty()) {
    throw ConfigError(fmt::format("image shapes differ or are empty: {}x{}x{} vs {}x{}x{}", a.width(),
                                  a.height(), a.channels(), b.width(), b.height(), b.channels()));
  }
}

// Separable "valid" Gaussian filter of one channel.
std::vector<double> gaussian_valid(const std::vector<double>& img, int w, int h, const std::array<double, 11>& k) {
  const int ow = w - 10;
  const int oh = h - 10;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) {
        s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      }
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) {
        s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

} // namespace

double psnr(const ImageD& a, const ImageD& b) {
  require_same_shape(a, b);
  double se = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data().size());
  if (mse == 0.0) {
    return kPsnrCap;
  }
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const ImageD& a, const ImageD& b) {
  require_same_shape(a, b);
  const int w = a.width();
  const int h = a.height();
  if (w < 11 || h < 11) {
    throw ConfigError("SSIM needs images of at least 11x11 pixels");
  }
  std::array<double, 11> k{};
  double ks = 0.0;
  for (int i = 0; i < 11; ++i) {
    k[i] = std::exp(-((i - 5) * (i - 5)) / (2.0 * 1.5 * 1.5));
    ks += k[i];
  }
  for (double& v : k) {
    v /= ks;
  }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  std::size_t windows = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.pixel(p)[c];
      y[p] = b.pixel(p)[c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = gaussian_valid(x, w, h, k);
    const auto my = gaussian_valid(y, w, h, k);
    const auto sxx = gaussian_valid(xx, w, h, k);
    const auto syy = gaussian_valid(yy, w, h, k);
    const auto sxy = gaussian_valid(xy, w, h, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    windows += mx.size();
  }
  return total / static_cast<double>(windows);
}

} // namespace meshalign

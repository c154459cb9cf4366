#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "meshalign/image.hpp"
#include "meshalign/mesh.hpp"

namespace meshalign {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding-volume hierarchy over a mesh's triangles for closest-point queries.
class MeshDistance {
 public:
  explicit MeshDistance(const TriangleMesh& mesh);

  struct Hit {
    double distance = 0.0;
    int face = -1;
    Vec3 point = Vec3::Zero();
  };

  [[nodiscard]] Hit closest(const Vec3& p) const;
  [[nodiscard]] double distance(const Vec3& p) const { return closest(p).distance; }
  [[nodiscard]] const Vec3& face_normal(int face) const { return normals_[face]; }

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    int left = -1;   // child index, or first triangle slot for leaves
    int right = -1;
    int count = 0;   // > 0 for leaves
  };
  int build(int begin, int end, std::vector<Vec3>& centroids);

  const TriangleMesh* mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> normals_;
};

double point_to_mesh_distance(const Vec3& p, const TriangleMesh& mesh);

/// Area-uniform surface samples. Sample i depends only on (seed, i).
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<int> faces;
};
SurfaceSamples sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

struct GeoReport {
  double chamfer_l1 = 0.0;
  double candidate_to_gt = 0.0;
  double gt_to_candidate = 0.0;
  double normal_consistency = 0.0;
  std::map<double, double> f_score;
  int samples = 0;
  std::uint64_t seed = 0;
};

/// All geometric metrics from one pair of sample sets.
GeoReport evaluate_geometry(const TriangleMesh& candidate, const TriangleMesh& gt, int samples,
                            std::uint64_t seed, const std::vector<double>& thresholds);

/// Mean of the two directed mean point-to-mesh distances.
double chamfer_l1(const TriangleMesh& candidate, const TriangleMesh& gt, int samples, std::uint64_t seed);

/// Mean |n_sample . n_closest| over both directions.
double normal_consistency(const TriangleMesh& candidate, const TriangleMesh& gt, int samples,
                          std::uint64_t seed);

double f_score(const TriangleMesh& candidate, const TriangleMesh& gt, double tau, int samples,
               std::uint64_t seed);

struct ImgReport {
  double psnr = 0.0;
  double ssim = 0.0;
};

constexpr double kPsnrCap = 99.0;

/// Peak 1, capped at kPsnrCap. Images must share a shape.
double psnr(const ImageD& a, const ImageD& b);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, dynamic range 1)
/// averaged over valid windows and channels.
double ssim(const ImageD& a, const ImageD& b);

} // namespace meshalign

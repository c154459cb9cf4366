#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "meshalign/camera.hpp"
#include "meshalign/image.hpp"
#include "meshalign/lighting.hpp"
#include "meshalign/mesh.hpp"
#include "meshalign/raster.hpp"

namespace meshalign {

enum class Constraint { Color = 0, Depth = 1, Normal = 2 };

std::string to_string(Constraint c);
Constraint parse_constraint(const std::string& name);

/// Cameras with reference photographs plus cached renders of the scan.
class ViewSet {
 public:
  ViewSet() = default;
  ViewSet(const ViewSet& other);
  ViewSet& operator=(const ViewSet& other);

  /// `reference` is linear RGB; `foreground` is one channel of 0/1 (pass an
  /// empty image to treat every pixel as foreground).
  void add_view(const Camera& camera, ImageD reference, ImageD foreground);

  /// Renders and caches depth and normal images of the scan in every view.
  void set_scan(std::shared_ptr<const TriangleMesh> scan);
  /// Attaches a scan together with previously cached renders of it.
  void set_scan_renders(std::shared_ptr<const TriangleMesh> scan, std::vector<ImageD> depth,
                        std::vector<ImageD> normal);

  SHLighting lighting;
  Vec3 background = Vec3::Zero();

  [[nodiscard]] int size() const { return static_cast<int>(cameras_.size()); }
  [[nodiscard]] const Camera& camera(int j) const { return cameras_.at(j); }
  /// Reference color image; every call is counted.
  [[nodiscard]] const ImageD& reference(int j) const;
  [[nodiscard]] const ImageD& foreground(int j) const { return foregrounds_.at(j); }
  [[nodiscard]] const ImageD& scan_depth(int j) const;
  [[nodiscard]] const ImageD& scan_normal(int j) const;
  [[nodiscard]] const std::shared_ptr<const TriangleMesh>& scan() const { return scan_; }
  [[nodiscard]] long reference_reads() const { return reference_reads_.load(); }

 private:
  std::vector<Camera> cameras_;
  std::vector<ImageD> references_;
  std::vector<ImageD> foregrounds_;
  std::vector<ImageD> scan_depth_;
  std::vector<ImageD> scan_normal_;
  std::shared_ptr<const TriangleMesh> scan_;
  mutable std::atomic<long> reference_reads_{0};
};

/// Views whose references are renders of a textured scan: color from its
/// texture under `light`, foreground = scan coverage. The scan is attached.
ViewSet render_reference_views(const TriangleMesh& scan, const std::vector<Camera>& cameras, const SHLighting& light,
                               const Vec3& background = Vec3::Zero());

struct HraConfig {
  // Active constraints in rotation order.
  std::vector<Constraint> rotation{Constraint::Color, Constraint::Depth, Constraint::Normal};
  // Per-term weights indexed by Constraint.
  std::array<double, 3> weights{1.0, 1.0, 1.0};
  // Texture-space mask; null means all ones.
  std::shared_ptr<const MaskImage> mask;

  void validate() const;
};

struct LossResult {
  Constraint constraint = Constraint::Color;
  double loss = 0.0;
  std::vector<Vec3> grad;
  // Only filled by color_loss when texel gradients are requested.
  ImageD texel_grad;
};

/// Geometry-dependent state shared by all views for one mesh topology.
struct LossContext {
  const MeshTopology* topology = nullptr;
  bool texel_gradients = false;
  bool vertex_gradients = true;
};

LossResult color_loss(const TriangleMesh& mesh, const ViewSet& views, const TextureImage& albedo,
                      const MaskImage* mask, const LossContext& ctx = {});
LossResult depth_loss(const TriangleMesh& mesh, const ViewSet& views, const LossContext& ctx = {});
LossResult normal_loss(const TriangleMesh& mesh, const ViewSet& views, const LossContext& ctx = {});

/// Constraint selected at `iteration` by the rotation.
Constraint scheduled_constraint(const HraConfig& cfg, int iteration);

/// Weighted loss of one constraint; uses the mesh's own texture for color.
LossResult constraint_loss(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& cfg, Constraint c,
                           const LossContext& ctx = {});

/// Evaluates only the scheduled constraint.
LossResult hra_step_loss(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& cfg, int iteration,
                         const LossContext& ctx = {});

/// Weighted sum over all active constraints.
LossResult hra_total_loss(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& cfg,
                          const LossContext& ctx = {});

} // namespace meshalign

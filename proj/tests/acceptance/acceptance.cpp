// Acceptance checks. Each criterion prints one PASS/FAIL line; the exit
// status is nonzero when any selected criterion fails.

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/gradcheck.hpp"
#include "meshalign/harness/commands.hpp"
#include "meshalign/harness/scene.hpp"
#include "meshalign/laplacian.hpp"
#include "meshalign/metrics.hpp"
#include "meshalign/obj_io.hpp"
#include "meshalign/optim.hpp"
#include "meshalign/parallel.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/raster.hpp"
#include "meshalign/registration.hpp"
#include "meshalign/remesh.hpp"
#include "meshalign/synthetic.hpp"
#include "oracles.hpp"
#include "raster_fixtures.hpp"

using namespace meshalign;
using meshalign::harness::Json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw IoError(fmt::format("cannot read '{}'", p.string()));
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// Shared head fixture: three expression scenes and a template fitted to the
// first one.

const int kHeadViews = 6;
const int kHeadSize = 256;

Json head_scene_doc(int expression, int views = kHeadViews, int size = kHeadSize) {
  return {{"scan", {{"generator", "blob-head"}, {"seed", 1}, {"expression", expression}}},
          {"cameras", {{"rig", "frontal-side"}, {"count", views}, {"size", size}}},
          {"lighting", "head"}};
}

Json head_template_config() {
  return {{"seed", 1},
          {"fit", {{"iterations_per_phase", 100}, {"eta_fraction", 0.1}}},
          {"texture", {{"size", 512}, {"iterations", 100}}},
          {"target_vertices", 1000},
          {"mask", {{"generator", "mouth-interior"}}}};
}

struct HeadFixture {
  fs::path scene[3];
  fs::path template_dir;
};

HeadFixture head_fixture(const fs::path& work, bool rebuild) {
  HeadFixture f;
  for (int e = 0; e < 3; ++e) {
    f.scene[e] = work / fmt::format("head_scene_e{}", e);
  }
  f.template_dir = work / "head_template";
  const bool complete = fs::exists(f.scene[0] / "scene.json") && fs::exists(f.scene[1] / "scene.json") &&
                        fs::exists(f.scene[2] / "scene.json") && fs::exists(f.template_dir / "template.json");
  if (complete && !rebuild) {
    return f;
  }
  for (int e = 0; e < 3; ++e) {
    harness::make_scene(harness::parse_scene_config(head_scene_doc(e), work), fresh_dir(f.scene[e]));
  }
  harness::TemplateOptions t;
  t.scene = f.scene[0];
  t.out = fresh_dir(f.template_dir);
  t.config = head_template_config();
  harness::make_template_cmd(t);
  return f;
}

fs::path register_head(const fs::path& scene, const fs::path& tmpl, const fs::path& out, const Json& config = {}) {
  harness::RegisterOptions r;
  r.scene = scene;
  r.template_dir = tmpl;
  r.out = fresh_dir(out);
  r.config = config.is_null() ? Json::object() : config;
  r.deterministic = true;
  harness::register_cmd(r);
  return out;
}

Json evaluate_head(const fs::path& reg_dir, const fs::path& scene) {
  harness::EvaluateOptions e;
  e.mesh = reg_dir / "aligned.obj";
  e.scene = scene;
  e.samples = 20000;
  e.seed = 1;
  e.thresholds = {0.005};
  return harness::evaluate_cmd(e);
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness.

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const int saved_threads = thread_count();
  set_thread_count(1);
  const TriangleMesh scan = fixture::ramp_icosphere(2, 256);
  const ViewSet views = render_reference_views(scan, fixture::ring_cameras(64, 3.5), fixture::directional_light());
  const TriangleMesh mesh = fixture::jittered(scan, 0.01, 3);

  bool ok = true;
  std::string detail;
  for (Constraint c : {Constraint::Color, Constraint::Depth, Constraint::Normal}) {
    GradCheckConfig cfg;
    cfg.constraint = c;
    cfg.samples = 200;
    cfg.tolerance = 1e-2;
    cfg.step_fraction = 1e-3;
    cfg.min_gradient = 1e-6;
    const GradCheckReport r = grad_check(mesh, views, cfg);
    ok = ok && r.tested == 200 && r.pass_rate() >= 0.95;
    detail += fmt::format("{} {}/{} ", to_string(c), r.passed, r.tested);
  }

  // Whole-object translation against a shifted copy: the loss change comes
  // from coverage moving across pixels, so silhouettes carry the gradient.
  const double diag = bounding_box_diagonal(scan);
  auto moved = [&](const Vec3& t) {
    TriangleMesh m = scan;
    for (Vec3& v : m.vertices) {
      v += t;
    }
    return m;
  };
  const std::vector<Camera> cams = fixture::ring_cameras(64, 3.5);
  const ViewSet shifted = render_reference_views(moved(Vec3(0.03, -0.02, 0.01) * diag), cams, views.lighting);
  double worst = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    LossContext ctx;
    const LossResult r = color_loss(scan, shifted, *scan.texture, nullptr, ctx);
    double analytic = 0.0;
    for (const Vec3& g : r.grad) {
      analytic += g[axis];
    }
    const double h = 1e-3 * diag;
    Vec3 e = Vec3::Zero();
    e[axis] = h;
    const TriangleMesh plus = moved(e);
    const TriangleMesh minus = moved(-e);
    const double fd = (color_loss(plus, shifted, *scan.texture, nullptr, ctx).loss -
                       color_loss(minus, shifted, *scan.texture, nullptr, ctx).loss) /
                      (2 * h);
    const double rel = std::abs(analytic - fd) / std::abs(fd);
    worst = std::max(worst, rel);
    ok = ok && std::abs(fd) > 0.0 && rel <= 0.2;
  }
  set_thread_count(saved_threads);
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  return {ok, fmt::format("{}(need >= 190/200 each); translation rel err max {:.3f} (<= 0.2); {:.1f} s "
                          "single-threaded (< 120)",
                          detail, worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. Optimizer equivalence.

Outcome optimizer() {
  TriangleMesh m = make_capped_cylinder_sphere(20, 25);
  oracle::jitter(m, 0.005, 11);
  const int n = m.vertex_count();
  const double lambda = 120.0;
  const LaplacianPrecond precond(cotangent_laplacian(m), lambda);
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(n, n) + lambda * oracle::cotangent_laplacian(m);
  const Eigen::LDLT<Eigen::MatrixXd> dense(a);

  // Smooth loss with a minimum away from the start: 0.5|x - t|^2 + 0.05 sum cos(3x).
  RowMatrixX3d target = m.positions();
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    target.row(i) *= 1.0 + 0.1 * std::sin(2.0 * target(i, 1));
  }
  auto gradient = [&](const RowMatrixX3d& x) -> RowMatrixX3d {
    return (x - target) - 0.15 * (3.0 * x).array().sin().matrix();
  };

  OptState single;
  single.mesh = m;
  single.eta = set_eta(m, 0.1);
  reset_latent(single, precond);
  OptState latent = single;
  Eigen::MatrixXd mu = a * Eigen::MatrixXd(m.positions());
  Eigen::MatrixXd x = m.positions();

  double worst = 0.0;
  double worst_lib = 0.0;
  double travel = 0.0;
  for (int it = 0; it < 50; ++it) {
    step(single, precond, gradient(single.mesh.positions()));
    step_latent(latent, precond, gradient(latent.mesh.positions()));
    // mu <- mu - eta (dx/dmu)^T dL/dx, x = A^-1 mu, with dx/dmu = A^-1.
    const RowMatrixX3d g = gradient(x);
    mu -= single.eta * dense.solve(Eigen::MatrixXd(g));
    x = dense.solve(mu);
    worst = std::max(worst, (Eigen::MatrixXd(single.mesh.positions()) - x).cwiseAbs().maxCoeff());
    worst_lib = std::max(worst_lib, (single.mesh.positions() - latent.mesh.positions()).cwiseAbs().maxCoeff());
  }
  travel = (Eigen::MatrixXd(m.positions()) - x).cwiseAbs().maxCoeff();
  const bool ok = n >= 500 && worst <= 1e-6 && worst_lib <= 1e-6 && travel > 1e-3;
  return {ok, fmt::format("{} vertices, 50 iterations; single update vs explicit latent path max diff {:.2e}, "
                          "library latent path {:.2e} (<= 1e-6); max vertex travel {:.3f}",
                          n, worst, worst_lib, travel)};
}

// ---------------------------------------------------------------------------
// 3. Laplacian suite.

Outcome laplacian() {
  std::vector<TriangleMesh> meshes;
  meshes.push_back(make_icosphere(2));
  oracle::jitter(meshes.back(), 0.02, 5);
  meshes.push_back(make_capped_cylinder_sphere(8, 12));
  oracle::jitter(meshes.back(), 0.02, 6);
  meshes.push_back(make_grid(9, 9));
  oracle::jitter(meshes.back(), 0.01, 7);

  double asym = 0.0, rowsum = 0.0, min_eig = 1e300, vs_oracle = 0.0, ident = 0.0;
  int max_n = 0;
  for (const TriangleMesh& m : meshes) {
    const SparseLaplacian sl = cotangent_laplacian(m);
    const Eigen::MatrixXd l(sl.matrix);
    max_n = std::max(max_n, m.vertex_count());
    const double scale = l.diagonal().cwiseAbs().maxCoeff();
    asym = std::max(asym, (l - l.transpose()).cwiseAbs().maxCoeff());
    rowsum = std::max(rowsum, l.rowwise().sum().cwiseAbs().maxCoeff() / scale);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(l).eigenvalues().minCoeff());
    vs_oracle = std::max(vs_oracle, (l - oracle::cotangent_laplacian(m)).cwiseAbs().maxCoeff() / scale);

    const LaplacianPrecond p0(sl, 0.0);
    const Eigen::MatrixXd a0(p0.matrix());
    ident = std::max(ident, (a0 - Eigen::MatrixXd::Identity(a0.rows(), a0.cols())).cwiseAbs().maxCoeff());
    RowMatrixX3d b = m.positions();
    ident = std::max(ident, (p0.solve(b) - b).cwiseAbs().maxCoeff());
  }
  const bool ok = max_n <= 200 && asym == 0.0 && rowsum <= 1e-10 && min_eig >= -1e-10 && ident == 0.0 &&
                  vs_oracle <= 1e-12;
  return {ok, fmt::format("n <= {}; asymmetry {:.1e} (0), row sums {:.1e} rel (<= 1e-10), min eigenvalue "
                          "{:.2e} (>= -1e-10), lambda=0 deviation from identity {:.1e} (0), vs dense oracle {:.1e}",
                          max_n, asym, rowsum, min_eig, ident, vs_oracle)};
}

// ---------------------------------------------------------------------------
// 4. End-to-end synthetic registration.

struct E2eMetrics {
  double chamfer_percent = 0.0;
  double nc = 0.0;
  double f = 0.0;
  double psnr = 0.0;
};

E2eMetrics metrics_of(const Json& report) {
  E2eMetrics m;
  m.chamfer_percent = report["geometry"]["chamfer_percent_of_diagonal"].get<double>();
  m.nc = report["geometry"]["normal_consistency"].get<double>();
  m.f = report["geometry"]["f_score"][0]["f_score"].get<double>();
  m.psnr = report["image"]["psnr"].get<double>();
  return m;
}

fs::path baseline_path() { return fs::path(MESHALIGN_TEST_DATA_DIR) / "baselines.json"; }

Outcome end_to_end(const fs::path& work, bool write_baselines) {
  const auto t0 = std::chrono::steady_clock::now();
  const int saved_threads = thread_count();
  set_thread_count(1);
  const HeadFixture f = head_fixture(work, false);
  std::vector<E2eMetrics> got;
  for (int e = 0; e < 3; ++e) {
    const fs::path out = register_head(f.scene[e], f.template_dir, work / fmt::format("e2e_e{}", e));
    const Json rep = harness::read_json(out / "report.json");
    if (rep["iterations"].get<int>() != 1500) {
      set_thread_count(saved_threads);
      return {false, fmt::format("expected 1500 iterations, ran {}", rep["iterations"].get<int>())};
    }
    got.push_back(metrics_of(evaluate_head(out, f.scene[e])));
  }
  set_thread_count(saved_threads);
  const double secs = seconds_since(t0);

  auto meets_thresholds = [](const E2eMetrics& g) {
    return g.chamfer_percent <= 1.0 && g.nc >= 0.95 && g.f >= 0.90 && g.psnr >= 25.0;
  };
  // Only a run meeting the absolute thresholds may become the baseline.
  if (write_baselines && std::all_of(got.begin(), got.end(), meets_thresholds)) {
    Json b;
    for (int e = 0; e < 3; ++e) {
      b[fmt::format("expression_{}", e)] = {{"chamfer_percent_of_diagonal", got[e].chamfer_percent},
                                            {"normal_consistency", got[e].nc},
                                            {"f_score_0.5_percent", got[e].f},
                                            {"psnr", got[e].psnr}};
    }
    harness::write_json(baseline_path(), b);
  }
  if (!fs::exists(baseline_path())) {
    return {false, fmt::format("no baseline file at {}", baseline_path().string())};
  }
  const Json base = harness::read_json(baseline_path());

  bool ok = secs <= 1800.0;
  std::string detail;
  for (int e = 0; e < 3; ++e) {
    const E2eMetrics& g = got[e];
    const Json& b = base.at(fmt::format("expression_{}", e));
    const bool thresholds = meets_thresholds(g);
    // Regression: no metric worse than its baseline by more than 10%.
    const bool regression = g.chamfer_percent <= 1.1 * b["chamfer_percent_of_diagonal"].get<double>() &&
                            (1.0 - g.nc) <= 1.1 * (1.0 - b["normal_consistency"].get<double>()) + 1e-12 &&
                            g.f >= 0.9 * b["f_score_0.5_percent"].get<double>() &&
                            g.psnr >= 0.9 * b["psnr"].get<double>();
    ok = ok && thresholds && regression;
    detail += fmt::format("e{}: chamfer {:.4f}% NC {:.4f} F {:.4f} PSNR {:.2f}{}{}; ", e, g.chamfer_percent, g.nc,
                          g.f, g.psnr, thresholds ? "" : " [threshold]", regression ? "" : " [regression]");
  }
  return {ok, fmt::format("{}{:.0f} s single-threaded (<= 1800)", detail, secs)};
}

// ---------------------------------------------------------------------------
// 5. Shared parametrization.

Json small_register_config() { return {{"iterations_per_phase", 6}}; }

Outcome shared_parametrization(const fs::path& work) {
  const fs::path root = fresh_dir(work / "shared_uv");
  fs::path scenes[3];
  for (int e = 0; e < 3; ++e) {
    scenes[e] = root / fmt::format("scene_e{}", e);
    harness::make_scene(harness::parse_scene_config(head_scene_doc(e, 4, 96), root), scenes[e]);
  }
  harness::TemplateOptions t;
  t.scene = scenes[0];
  t.out = root / "template";
  t.config = {{"fit", {{"iterations_per_phase", 20}}}, {"texture", {{"size", 256}, {"iterations", 40}}},
              {"target_vertices", 600}};
  harness::make_template_cmd(t);

  // Pool: the template's UVs as refined by the registration schedule,
  // written and read back like the outputs.
  const RegistrationConfig cfg = harness::registration_config_from_json(small_register_config());
  TriangleMesh refined = load_obj(t.out / "template.obj");
  for (const PhaseConfig& p : cfg.phases) {
    if (p.remesh_before) {
      refined = remesh_refine(refined, p.edge_factor);
    }
  }
  save_obj(refined, root / "refined_template.obj");
  refined = load_obj(root / "refined_template.obj");
  const std::set<std::pair<double, double>> pool = [&] {
    std::set<std::pair<double, double>> s;
    for (const Vec2& uv : refined.uvs) {
      s.insert({uv.x(), uv.y()});
    }
    return s;
  }();
  const TriangleMesh original = load_obj(t.out / "template.obj");

  const std::string tex = file_bytes(t.out / "texture.png");
  bool ok = true;
  bool same_texture = true;
  int corners = 0, missing = 0;
  std::vector<TriangleMesh> outs;
  for (int e = 0; e < 3; ++e) {
    const fs::path out = register_head(scenes[e], t.out, root / fmt::format("reg_e{}", e), small_register_config());
    same_texture = same_texture && file_bytes(out / "texture.png") == tex;
    std::string mtl = file_bytes(out / "aligned.mtl");
    ok = ok && mtl.find("map_Kd texture.png") != std::string::npos;
    outs.push_back(load_obj(out / "aligned.obj"));
    const TriangleMesh& m = outs.back();
    for (int fi = 0; fi < m.face_count(); ++fi) {
      for (int k = 0; k < 3; ++k) {
        const Vec2 uv = m.corner_uv(fi, k);
        ++corners;
        missing += pool.count({uv.x(), uv.y()}) == 0;
      }
    }
  }
  const bool same_layout = outs[0].faces == outs[1].faces && outs[1].faces == outs[2].faces &&
                           outs[0].face_uvs == outs[1].face_uvs && outs[1].face_uvs == outs[2].face_uvs;
  int original_kept = 0;
  for (const Vec2& uv : original.uvs) {
    original_kept += std::find(outs[0].uvs.begin(), outs[0].uvs.end(), uv) != outs[0].uvs.end();
  }
  ok = ok && same_texture && missing == 0 && same_layout && original_kept == int(original.uvs.size());
  return {ok, fmt::format("3 expressions; texture bytes identical: {}; {} output corner UVs, {} outside the "
                          "template pool ({} template UVs, {} after refinement); identical faces/UV indices: {}",
                          same_texture ? "yes" : "no", corners, missing, original.uvs.size(), pool.size(),
                          same_layout ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 6. Mask neutrality.

// Boundary pixels of the zero region of a rendered mask.
std::vector<std::pair<int, int>> mask_contour(const ImageD& m) {
  std::vector<std::pair<int, int>> out;
  for (int y = 1; y + 1 < m.height(); ++y) {
    for (int x = 1; x + 1 < m.width(); ++x) {
      if (m.at(x, y, 0) != 0.0) {
        continue;
      }
      if (m.at(x - 1, y, 0) != 0.0 || m.at(x + 1, y, 0) != 0.0 || m.at(x, y - 1, 0) != 0.0 ||
          m.at(x, y + 1, 0) != 0.0) {
        out.emplace_back(x, y);
      }
    }
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

Outcome mask_neutrality(const fs::path& work) {
  const HeadFixture f = head_fixture(work, false);
  const harness::LoadedTemplate tmpl = harness::load_template(f.template_dir);

  // Exact part: masked texels carry no gradient and do not influence the
  // loss or the vertex gradients.
  const harness::Scene s0 = harness::load_scene(f.scene[0]);
  GradCheckConfig gc;
  gc.samples = 10;
  TriangleMesh tm = tmpl.mesh;
  tm.texture = tmpl.texture;
  const GradCheckReport r = grad_check(tm, s0.views, gc, tmpl.mask.get());
  const bool exact = r.mask_checked && r.masked_texel_analytic_max == 0.0 && r.masked_loss_change == 0.0 &&
                     r.masked_vertex_grad_change == 0.0;

  // Open-mouth fixture whose mouth interior disagrees with the template.
  const BlobHeadParams params;
  const Expression open = preset_expression(0);
  TriangleMesh scan = make_blob_head(params, open);
  const MaskImage scan_mask = mouth_interior_mask(scan, scan.texture->size(), params, open);
  ImageF texels = scan.texture->texels();
  for (std::size_t t = 0; t < texels.pixel_count(); ++t) {
    if (scan_mask.texels().pixel(t)[0] == 0.0f) {
      texels.pixel(t)[0] = 0.92f;
      texels.pixel(t)[1] = 0.9f;
      texels.pixel(t)[2] = 0.85f;
    }
  }
  scan.texture = std::make_shared<const TextureImage>(std::move(texels));
  const ViewSet views = render_reference_views(scan, head_cameras(kHeadViews, kHeadSize), head_lighting());

  RegistrationConfig cfg;
  cfg.eta_fraction = 0.02;
  double med[2];
  int counts[2];
  for (int masked = 0; masked < 2; ++masked) {
    HraConfig h;
    if (masked) {
      h.mask = tmpl.mask;
    }
    const RegistrationResult res = run_registration(tm, views, cfg, h);
    std::vector<double> disp;
    for (int j = 0; j < views.size(); ++j) {
      const Camera& cam = views.camera(j);
      const auto ref = mask_contour(render_mask(rasterize(scan, cam), scan, scan_mask));
      const auto got = mask_contour(render_mask(rasterize(res.mesh, cam), res.mesh, *tmpl.mask));
      if (ref.empty()) {
        continue;
      }
      for (const auto& [x, y] : got) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [rx, ry] : ref) {
          best = std::min(best, std::hypot(double(x - rx), double(y - ry)));
        }
        disp.push_back(best);
      }
    }
    med[masked] = median(disp);
    counts[masked] = static_cast<int>(disp.size());
  }
  const bool ok = exact && med[1] < 1.0 && med[0] > med[1];
  return {ok, fmt::format("masked texel grad max {:.1e}, loss change {:.1e}, vertex grad change {:.1e} (all 0); "
                          "mouth contour displacement median masked {:.2f} px (< 1, {} px), unmasked {:.2f} px "
                          "(> masked, {} px)",
                          r.masked_texel_analytic_max, r.masked_loss_change, r.masked_vertex_grad_change, med[1],
                          counts[1], med[0], counts[0])};
}

// ---------------------------------------------------------------------------
// 7. Metrics oracles.

Outcome metrics() {
  TriangleMesh m = make_capped_cylinder_sphere(12, 18);
  oracle::jitter(m, 0.02, 9);
  const MeshDistance bvh(m);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.6, 1.6);
  double dist_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    dist_err = std::max(dist_err, std::abs(bvh.distance(p) - oracle::point_mesh_distance(p, m)));
  }

  std::uniform_real_distribution<double> c(0.0, 1.0);
  double ssim_err = 0.0;
  for (int k = 0; k < 3; ++k) {
    ImageD a(40, 33, 3), b(40, 33, 3);
    for (int y = 0; y < 33; ++y) {
      for (int x = 0; x < 40; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          const double base = 0.5 + 0.35 * std::sin(0.21 * x + 0.17 * y * (ch + 1) + k);
          a.at(x, y, ch) = base;
          b.at(x, y, ch) = std::clamp(base + 0.15 * (c(rng) - 0.5) * k, 0.0, 1.0);
        }
      }
    }
    ssim_err = std::max(ssim_err, std::abs(ssim(a, b) - oracle::ssim(a, b)));
  }

  const ImageD p(32, 32, 3, 0.3), q(32, 32, 3, 0.4);
  const double p20 = psnr(p, q);
  const bool ok = dist_err < 1e-9 && ssim_err < 1e-4 && std::abs(p20 - 20.0) < 1e-9;
  return {ok, fmt::format("point-to-mesh vs brute force max {:.1e} over 1000 queries (< 1e-9); SSIM vs oracle "
                          "{:.1e} (< 1e-4); PSNR at constant 0.1 difference {:.12f} dB (20)",
                          dist_err, ssim_err, p20)};
}

// ---------------------------------------------------------------------------
// 8. Ablation direction.

Outcome ablation(const fs::path& work) {
  const HeadFixture f = head_fixture(work, false);
  const std::vector<std::pair<std::string, Json>> runs = {
      {"full", Json::array({"color", "depth", "normal"})},
      {"-color", Json::array({"depth", "normal"})},
      {"-depth", Json::array({"color", "normal"})},
      {"-normal", Json::array({"color", "depth"})}};
  std::vector<double> chamfer;
  std::string detail;
  for (const auto& [name, rotation] : runs) {
    const fs::path out =
        register_head(f.scene[1], f.template_dir, work / ("ablation_" + name), Json{{"rotation", rotation}});
    const Json rep = evaluate_head(out, f.scene[1]);
    chamfer.push_back(rep["geometry"]["chamfer_percent_of_diagonal"].get<double>());
    detail += fmt::format("{} {:.4f}%{} ", name, chamfer.back(),
                          chamfer.size() > 1 ? (chamfer.back() > chamfer.front() ? " (worse)" : " (NOT worse)") : "");
  }
  bool ok = true;
  for (std::size_t i = 1; i < chamfer.size(); ++i) {
    ok = ok && chamfer[i] > chamfer[0];
  }
  return {ok, "expression 1 chamfer: " + detail};
}

// ---------------------------------------------------------------------------
// 9. Determinism across invocations of the command-line tool.

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = fmt::format("\"{}\" {} > \"{}\" 2>&1", MESHALIGN_CLI, args, log.string());
  return std::system(cmd.c_str());
}

Outcome determinism(const fs::path& work) {
  const fs::path root = fresh_dir(work / "determinism");
  harness::write_json(root / "scene_config.json", head_scene_doc(2, 3, 96));
  harness::write_json(root / "template_config.json",
                      {{"fit", {{"iterations_per_phase", 15}}}, {"texture", {{"size", 128}, {"iterations", 20}}},
                       {"target_vertices", 500}});
  harness::write_json(root / "register_config.json", small_register_config());
  auto p = [&](const char* name) { return (root / name).string(); };
  int rc = run_cli(fmt::format("--config \"{}\" make-scene --out \"{}\"", p("scene_config.json"), p("scene")),
                   root / "make_scene.log");
  rc |= run_cli(fmt::format("--config \"{}\" make-template --scene \"{}\" --out \"{}\"", p("template_config.json"),
                            p("scene"), p("template")),
                root / "make_template.log");
  if (rc != 0) {
    return {false, "scene or template generation failed; see logs under " + root.string()};
  }
  // Identical command lines: each run writes to out/ and is then moved aside.
  for (const char* run : {"run1", "run2"}) {
    fs::remove_all(root / "out");
    rc |= run_cli(fmt::format("--deterministic --config \"{}\" register --scene \"{}\" --template \"{}\" --out \"{}\"",
                              p("register_config.json"), p("scene"), p("template"), p("out/reg")),
                  root / fmt::format("{}_register.log", run));
    rc |= run_cli(fmt::format("--deterministic evaluate --mesh \"{}\" --scene \"{}\" --out \"{}\"",
                              p("out/reg/aligned.obj"), p("scene"), p("out/evaluate.json")),
                  root / fmt::format("{}_evaluate.log", run));
    if (rc == 0) {
      fs::rename(root / "out", root / run);
    }
  }
  if (rc != 0) {
    return {false, "register or evaluate exited with an error; see logs under " + root.string()};
  }
  int files = 0;
  std::vector<std::string> differ;
  for (const auto& entry : fs::recursive_directory_iterator(root / "run1")) {
    if (!entry.is_regular_file()) {
      continue;
    }
    const fs::path rel = fs::relative(entry.path(), root / "run1");
    ++files;
    if (!fs::exists(root / "run2" / rel) || file_bytes(entry.path()) != file_bytes(root / "run2" / rel)) {
      differ.push_back(rel.string());
    }
  }
  const bool ok = files >= 6 && differ.empty();
  std::string list;
  for (const auto& d : differ) {
    list += " " + d;
  }
  return {ok, fmt::format("two --deterministic register + evaluate invocations: {} files compared, {} differ{}",
                          files, differ.size(), list)};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  std::string work = (fs::temp_directory_path() / "meshalign_acceptance").string();
  bool setup = false;
  bool write_baselines = false;
  app.add_option("criteria", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--work", work, "Working directory for scenes and outputs");
  app.add_flag("--setup", setup, "Build the shared head scenes and template, then exit");
  app.add_flag("--write-baselines", write_baselines, "Record the end-to-end metrics as the committed baseline");
  CLI11_PARSE(app, argc, argv);

  const fs::path wd(work);
  fs::create_directories(wd);
  if (setup) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      head_fixture(wd, true);
    } catch (const std::exception& e) {
      fmt::print("setup: FAIL  {}\n", e.what());
      return 1;
    }
    fmt::print("setup: head scenes and template built in {:.0f} s\n", seconds_since(t0));
    return 0;
  }
  if (selected.empty()) {
    selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  }

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"gradient correctness", gradients}},
      {2, {"optimizer equivalence", optimizer}},
      {3, {"Laplacian suite", laplacian}},
      {4, {"end-to-end registration", [&] { return end_to_end(wd, write_baselines); }}},
      {5, {"shared parametrization", [&] { return shared_parametrization(wd); }}},
      {6, {"mask neutrality", [&] { return mask_neutrality(wd); }}},
      {7, {"metrics oracles", metrics}},
      {8, {"ablation direction", [&] { return ablation(wd); }}},
      {9, {"determinism", [&] { return determinism(wd); }}}};

  int failed = 0;
  for (int id : selected) {
    const auto& [name, fn] = criteria.at(id);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    fmt::print("criterion {} {}: {}  {}\n", id, name, o.pass ? "PASS" : "FAIL", o.detail);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}

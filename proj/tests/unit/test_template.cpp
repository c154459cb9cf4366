#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <doctest.h>

#include "meshalign/error.hpp"
#include "meshalign/metrics.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/raster.hpp"
#include "meshalign/synthetic.hpp"
#include "meshalign/template.hpp"
#include "meshalign/validate.hpp"
#include "oracles.hpp"
#include "raster_fixtures.hpp"

using namespace meshalign;

namespace {

TriangleMesh textured_sphere(int rings, int segments, int tex_size) {
  TriangleMesh m = make_capped_cylinder_sphere(rings, segments);
  m.texture = std::make_shared<const TextureImage>(fixture::smooth_texture(tex_size));
  return m;
}

// Texels some view samples: nonzero texel gradient of the color loss
// from a black texture, where every covered residual has the same sign.
std::vector<char> sampled_texels(const TriangleMesh& mesh, const ViewSet& views, int size) {
  const TextureImage black = TextureImage::constant(size, 0.0f, 0.0f, 0.0f);
  LossContext ctx;
  ctx.texel_gradients = true;
  ctx.vertex_gradients = false;
  const LossResult r = color_loss(mesh, views, black, nullptr, ctx);
  std::vector<char> known(static_cast<std::size_t>(size) * size, 0);
  for (std::size_t t = 0; t < known.size(); ++t) {
    const double* g = r.texel_grad.pixel(t);
    known[t] = g[0] != 0.0 || g[1] != 0.0 || g[2] != 0.0;
  }
  return known;
}

double render_psnr(const TriangleMesh& mesh, const TextureImage& tex, const ViewSet& views) {
  double sum = 0.0;
  for (int j = 0; j < views.size(); ++j) {
    const FrameBuffer fb = rasterize(mesh, views.camera(j));
    sum += psnr(shade_color(fb, mesh, views.lighting, tex, {views.background}), views.reference(j));
  }
  return sum / views.size();
}

} // namespace

TEST_CASE("bust is a closed genus-0 mesh with a clean UV layout") {
  const BustParams p;
  const TriangleMesh a = make_bust(p, 7);
  const ValidationReport r = validate(a);
  CHECK(r.ok());
  CHECK(r.closed());
  CHECK(r.euler_characteristic == 2);
  CHECK(r.self_intersections == 0);
  CHECK(oracle::uv_overlap_count(a) == 0);

  const TriangleMesh b = make_bust(p, 7);
  CHECK(std::equal(a.vertices.begin(), a.vertices.end(), b.vertices.begin(), b.vertices.end()));
  const TriangleMesh c = make_bust(p, 8);
  CHECK_FALSE(std::equal(a.vertices.begin(), a.vertices.end(), c.vertices.begin(), c.vertices.end()));
}

TEST_CASE("texture recovery reproduces the references") {
  const TriangleMesh scan = textured_sphere(16, 24, 128);
  const ViewSet views = render_reference_views(scan, fixture::ring_cameras(128, 3.5), fixture::directional_light());
  TriangleMesh geom = scan;
  geom.texture.reset();

  TextureRecoveryConfig cfg;
  cfg.size = 128;
  cfg.iterations = 300;
  const TextureRecoveryResult r = recover_texture(geom, views, cfg);
  REQUIRE(r.loss.size() == 301);
  CHECK(r.loss.back() < 0.05 * r.loss.front());
  CHECK(render_psnr(geom, r.texture, views) >= 35.0);

  const std::vector<char> known = sampled_texels(geom, views, cfg.size);
  CHECK(std::count(known.begin(), known.end(), 1) == r.covered_texels);

  // Texels no view samples copy a nearest sampled texel.
  const int n = cfg.size;
  const ImageF& out = r.texture.texels();
  int checked = 0;
  for (int t = 0; t < n * n; t += 7) {
    if (known[t]) {
      continue;
    }
    const int x = t % n, y = t / n;
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n * n; ++s) {
      if (known[s]) {
        best = std::min(best, double(s % n - x) * (s % n - x) + double(s / n - y) * (s / n - y));
      }
    }
    bool matched = false;
    for (int s = 0; s < n * n && !matched; ++s) {
      if (known[s] && double(s % n - x) * (s % n - x) + double(s / n - y) * (s / n - y) == best) {
        matched = std::equal(out.pixel(t), out.pixel(t) + 3, out.pixel(s));
      }
    }
    CHECK(matched);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("texture recovery loss is monotone on a single flat-colored view") {
  TriangleMesh scan = make_capped_cylinder_sphere(12, 16);
  scan.texture = std::make_shared<const TextureImage>(TextureImage::constant(32, 1.0f, 0.0f, 0.0f));
  const ViewSet views = render_reference_views(scan, {fixture::ring_cameras(64, 3.5)[0]}, SHLighting::uniform(0.9));
  TriangleMesh geom = scan;
  geom.texture.reset();
  TextureRecoveryConfig cfg;
  cfg.size = 32;
  cfg.iterations = 60;
  cfg.init = Vec3(1.0, 1.0, 1.0);
  const TextureRecoveryResult r = recover_texture(geom, views, cfg);
  for (std::size_t i = 1; i < r.loss.size(); ++i) {
    CHECK(r.loss[i] <= r.loss[i - 1] + 1e-12);
  }
  CHECK(r.loss.back() < 1e-3 * r.loss.front());
}

TEST_CASE("texture recovery rejects bad settings") {
  TriangleMesh geom = make_capped_cylinder_sphere(6, 8);
  const TriangleMesh scan = textured_sphere(6, 8, 16);
  const ViewSet views = render_reference_views(scan, fixture::ring_cameras(32, 3.5), SHLighting::uniform(1.0));
  TextureRecoveryConfig cfg;
  cfg.size = 16;
  cfg.step = 0.0;
  CHECK_THROWS_AS(recover_texture(geom, views, cfg), ConfigError);
  geom.uvs.clear();
  geom.face_uvs.clear();
  CHECK_THROWS_AS(recover_texture(geom, views, TextureRecoveryConfig{}), ConfigError);
}

TEST_CASE("depth-only fit leaves an exact match in place and never reads colors") {
  TriangleMesh bust = make_bust(BustParams{.rings = 12, .segments = 16}, 3);
  bust.texture = std::make_shared<const TextureImage>(TextureImage::constant(16, 0.5f, 0.5f, 0.5f));
  const ViewSet views = render_reference_views(bust, fixture::ring_cameras(64, 4.0), SHLighting::uniform(1.0));
  const RegistrationResult r = fit_depth_only(bust, views, RegistrationConfig::single_phase(200.0, 20));
  CHECK(views.reference_reads() == 0);
  REQUIRE(r.mesh.vertex_count() == bust.vertex_count());
  double moved = 0.0;
  for (int i = 0; i < bust.vertex_count(); ++i) {
    moved = std::max(moved, (r.mesh.vertices[i] - bust.vertices[i]).norm());
  }
  CHECK(moved < 1e-9);
  for (const IterationRecord& rec : r.log) {
    CHECK(rec.constraint == Constraint::Depth);
  }
}

TEST_CASE("build_template shares one texture and keeps the dense UV pool") {
  const TriangleMesh scan = textured_sphere(14, 20, 64);
  const ViewSet views = render_reference_views(scan, fixture::ring_cameras(64, 3.5), fixture::directional_light());
  const TriangleMesh bust = make_bust(BustParams{.rings = 14, .segments = 20}, 1);

  TemplateConfig cfg;
  cfg.fit = RegistrationConfig::single_phase(200.0, 10);
  cfg.texture.size = 64;
  cfg.texture.iterations = 20;
  cfg.target_vertices = 100000;
  const TemplateBundle whole = build_template(bust, views, cfg);
  CHECK(whole.mesh.vertex_count() == whole.dense.vertex_count());
  CHECK(whole.mesh.faces == whole.dense.faces);
  CHECK(whole.mesh.texture.get() == whole.texture.get());
  CHECK(whole.dense.texture.get() == whole.texture.get());
  REQUIRE(whole.mask);
  CHECK(whole.mask->size() == 64);
  for (std::size_t t = 0; t < whole.mask->texels().pixel_count(); ++t) {
    CHECK(whole.mask->texels().pixel(t)[0] == 1.0f);
  }
  CHECK(whole.fit_log.log.size() == 10);
  CHECK(whole.texture_loss.size() == 21);

  cfg.target_vertices = 120;
  const TemplateBundle small = build_template(bust, views, cfg);
  CHECK(small.mesh.vertex_count() <= 120);
  CHECK(validate(small.mesh).ok());
  for (const Vec2& uv : small.mesh.uvs) {
    CHECK(std::find(small.dense.uvs.begin(), small.dense.uvs.end(), uv) != small.dense.uvs.end());
  }

  cfg.mask = std::make_shared<const MaskImage>(MaskImage::ones(32));
  CHECK_THROWS_AS(build_template(bust, views, cfg), ConfigError);
}

TEST_CASE("short template pipeline on the blob head") {
  BlobHeadParams hp;
  hp.rings = 48;
  hp.segments = 64;
  hp.texture_size = 256;
  TriangleMesh scan = make_blob_head(hp, preset_expression(0));
  const ViewSet views = render_reference_views(scan, head_cameras(6, 128), head_lighting());
  TemplateConfig cfg;
  cfg.fit = RegistrationConfig{};
  for (PhaseConfig& p : cfg.fit.phases) {
    p.iterations = 30;
  }
  cfg.fit.eta_fraction = 0.02;
  cfg.texture.size = 256;
  cfg.texture.iterations = 60;
  cfg.target_vertices = 1000;
  const TemplateBundle b = build_template(make_bust(BustParams{}, 1), views, cfg);
  CHECK(b.mesh.vertex_count() <= 1000);
  CHECK(validate(b.mesh).ok());
  CHECK(chamfer_l1(b.dense, scan, 5000, 1) < 0.01 * bounding_box_diagonal(scan));
  CHECK(render_psnr(b.mesh, *b.texture, views) >= 25.0);
}

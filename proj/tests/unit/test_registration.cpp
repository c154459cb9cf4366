#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <doctest.h>

#include "meshalign/error.hpp"
#include "meshalign/metrics.hpp"
#include "meshalign/obj_io.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/registration.hpp"
#include "meshalign/remesh.hpp"
#include "raster_fixtures.hpp"

using namespace meshalign;
namespace fs = std::filesystem;

namespace {

TriangleMesh textured_sphere(int rings = 10, int segments = 14) {
  TriangleMesh m = make_capped_cylinder_sphere(rings, segments);
  m.texture = std::make_shared<const TextureImage>(fixture::smooth_texture(64));
  return m;
}

TriangleMesh stretched(TriangleMesh m, const Vec3& s) {
  for (Vec3& v : m.vertices) {
    v = v.cwiseProduct(s);
  }
  return m;
}

ViewSet views_of(const TriangleMesh& scan, int size = 64) {
  return render_reference_views(scan, fixture::ring_cameras(size, 3.5), fixture::directional_light());
}

RegistrationConfig short_multiscale(int iterations) {
  RegistrationConfig cfg;
  cfg.phases = {{200.0, iterations, false}, {120.0, iterations, true}, {80.0, iterations, true}};
  cfg.eta_fraction = 0.02;
  return cfg;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("meshalign_test_registration_" + name);
  fs::remove_all(d);
  return d;
}

} // namespace

TEST_CASE("an exact match is a fixed point") {
  const TriangleMesh scan = textured_sphere();
  const ViewSet views = views_of(scan);
  RegistrationConfig cfg = RegistrationConfig::single_phase(200.0, 30);
  cfg.plateau_window = 6;
  const RegistrationResult r = run_registration(scan, views, cfg, HraConfig{});
  REQUIRE(r.log.size() == 30);
  double moved = 0.0;
  for (int i = 0; i < scan.vertex_count(); ++i) {
    moved = std::max(moved, (r.mesh.vertices[i] - scan.vertices[i]).norm());
  }
  CHECK(moved < 1e-9);
  const Constraint order[3] = {Constraint::Color, Constraint::Depth, Constraint::Normal};
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].iteration == int(i));
    CHECK(r.log[i].constraint == order[i % 3]);
    CHECK(r.log[i].loss < 1e-12);
  }
  // A loss stuck at zero never decreases, so each constraint warns once.
  CHECK(r.warnings.size() == 3);
  for (const std::string& w : r.warnings) {
    CHECK(w.find("did not decrease") != std::string::npos);
  }
}

TEST_CASE("registration moves a sphere toward an ellipsoid") {
  const TriangleMesh tmpl = textured_sphere();
  const TriangleMesh scan = stretched(textured_sphere(16, 24), Vec3(1.1, 0.9, 1.0));
  const ViewSet views = views_of(scan);
  RegistrationConfig cfg = RegistrationConfig::single_phase(200.0, 600);
  cfg.eta_fraction = 0.02;
  const RegistrationResult r = run_registration(tmpl, views, cfg, HraConfig{});
  const double before = chamfer_l1(tmpl, scan, 4000, 2);
  const double after = chamfer_l1(r.mesh, scan, 4000, 2);
  CHECK(after < 0.6 * before);
}

TEST_CASE("remeshing refines between phases and the log follows the budget") {
  const TriangleMesh tmpl = textured_sphere();
  const ViewSet views = views_of(stretched(textured_sphere(16, 24), Vec3(1.05, 0.95, 1.0)));
  const RegistrationConfig cfg = short_multiscale(4);
  std::vector<int> counts;
  std::vector<int> phases;
  const RegistrationResult r =
      run_registration(tmpl, views, cfg, HraConfig{}, [&](const IterationRecord& rec, const TriangleMesh& m) {
        counts.push_back(m.vertex_count());
        phases.push_back(rec.phase);
        CHECK(rec.vertices == m.vertex_count());
      });
  REQUIRE(int(r.log.size()) == cfg.budget());
  REQUIRE(counts.size() == r.log.size());
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (phases[i] == phases[i - 1]) {
      CHECK(counts[i] == counts[i - 1]);
    } else {
      CHECK(phases[i] == phases[i - 1] + 1);
      CHECK(counts[i] > counts[i - 1]);
    }
  }
  CHECK(counts.front() == tmpl.vertex_count());
}

TEST_CASE("every target gets the connectivity and UV pool of the refined template") {
  const TriangleMesh tmpl = textured_sphere();
  const RegistrationConfig cfg = short_multiscale(3);
  const RegistrationResult a =
      run_registration(tmpl, views_of(stretched(textured_sphere(16, 24), Vec3(1.1, 0.9, 1.0))), cfg, HraConfig{});
  const RegistrationResult b =
      run_registration(tmpl, views_of(stretched(textured_sphere(16, 24), Vec3(0.9, 1.0, 1.15))), cfg, HraConfig{});
  CHECK(a.mesh.faces == b.mesh.faces);
  CHECK(a.mesh.face_uvs == b.mesh.face_uvs);
  CHECK(a.mesh.uvs == b.mesh.uvs);

  TriangleMesh rest = tmpl;
  for (const PhaseConfig& p : cfg.phases) {
    if (p.remesh_before) {
      rest = remesh_refine(rest, p.edge_factor);
    }
  }
  CHECK(a.mesh.faces == rest.faces);
  CHECK(a.mesh.face_uvs == rest.face_uvs);
  CHECK(a.mesh.uvs == rest.uvs);
  CHECK(a.mesh.texture.get() == tmpl.texture.get());
}

TEST_CASE("invalid registration settings are rejected") {
  const TriangleMesh tmpl = textured_sphere(6, 8);
  const ViewSet views = views_of(tmpl, 32);
  const HraConfig hra;
  auto rejects = [&](RegistrationConfig cfg) {
    CHECK_THROWS_AS(run_registration(tmpl, views, cfg, hra), ConfigError);
  };
  RegistrationConfig cfg = RegistrationConfig::single_phase(200.0, 2);
  cfg.phases.clear();
  rejects(cfg);
  cfg = RegistrationConfig::single_phase(0.0, 2);
  rejects(cfg);
  cfg = RegistrationConfig::single_phase(200.0, -1);
  rejects(cfg);
  cfg = RegistrationConfig::single_phase(200.0, 2);
  cfg.eta_fraction = 0.0;
  rejects(cfg);
  cfg = RegistrationConfig::single_phase(200.0, 2);
  cfg.moment_decay = 1.0;
  rejects(cfg);
  cfg = RegistrationConfig::single_phase(200.0, 2);
  cfg.checkpoint_every = -1;
  rejects(cfg);
  cfg = short_multiscale(2);
  cfg.phases[1].edge_factor = 1.5;
  rejects(cfg);

  TriangleMesh bare = tmpl;
  bare.texture.reset();
  CHECK_THROWS_AS(run_registration(bare, views, RegistrationConfig::single_phase(200.0, 2), hra), ConfigError);
  HraConfig geometry_only;
  geometry_only.rotation = {Constraint::Depth, Constraint::Normal};
  CHECK_NOTHROW(run_registration(bare, views, RegistrationConfig::single_phase(200.0, 2), geometry_only));
  CHECK_THROWS_AS(run_registration(tmpl, ViewSet{}, RegistrationConfig::single_phase(200.0, 2), hra), ConfigError);
}

TEST_CASE("checkpoints and the iteration log are written") {
  const TriangleMesh tmpl = textured_sphere(6, 8);
  const ViewSet views = views_of(stretched(textured_sphere(8, 12), Vec3(1.05, 1.0, 0.95)), 32);
  const fs::path dir = scratch_dir("ckpt");
  RegistrationConfig cfg = RegistrationConfig::single_phase(200.0, 10);
  cfg.checkpoint_every = 4;
  cfg.checkpoint_dir = dir;
  const RegistrationResult r = run_registration(tmpl, views, cfg, HraConfig{});
  CHECK(fs::exists(dir / "checkpoint_00004.obj"));
  CHECK(fs::exists(dir / "checkpoint_00008.obj"));
  CHECK_FALSE(fs::exists(dir / "checkpoint_00010.obj"));
  CHECK(load_obj(dir / "checkpoint_00008.obj").vertex_count() == tmpl.vertex_count());

  write_log_csv(dir / "log.csv", r.log, false);
  std::ifstream in(dir / "log.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,phase,constraint,loss,grad_inf,n_vertices,wall_ms");
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) {
      fields.push_back(field);
    }
    REQUIRE(fields.size() == 7);
    CHECK(std::stoi(fields[0]) == rows);
    CHECK(fields[1] == "1");
    CHECK(std::stod(fields[3]) == r.log[rows].loss);
    CHECK(std::stoi(fields[5]) == tmpl.vertex_count());
    CHECK(fields[6] == "0.000");
    ++rows;
  }
  CHECK(rows == 10);
  CHECK_THROWS_AS(write_log_csv(dir / "missing" / "log.csv", r.log), IoError);
  fs::remove_all(dir);
}

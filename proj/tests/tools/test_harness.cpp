#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <doctest.h>

#include "meshalign/error.hpp"
#include "meshalign/harness/commands.hpp"
#include "meshalign/harness/scene.hpp"
#include "meshalign/obj_io.hpp"

using namespace meshalign;
using namespace meshalign::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("meshalign_test_harness_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json head_scene(int expression, int views = 4, int size = 64) {
  return {{"scan",
           {{"generator", "blob-head"},
            {"seed", 2},
            {"rings", 24},
            {"segments", 32},
            {"texture_size", 128},
            {"expression", expression}}},
          {"cameras", {{"rig", "frontal-side"}, {"count", views}, {"size", size}}},
          {"lighting", "head"}};
}

fs::path build_scene(const Json& doc, const std::string& name) {
  const fs::path out = scratch(name);
  make_scene(parse_scene_config(doc, "."), out);
  return out;
}

} // namespace

TEST_CASE("make_scene is reproducible and loads back") {
  const fs::path a = build_scene(head_scene(0, 8, 48), "scene_a");
  const fs::path b = build_scene(head_scene(0, 8, 48), "scene_b");
  for (const auto& entry : fs::directory_iterator(a)) {
    CAPTURE(entry.path().filename().string());
    CHECK(bytes(entry.path()) == bytes(b / entry.path().filename()));
  }
  for (int j = 0; j < 8; ++j) {
    const std::string id = j < 10 ? "0" + std::to_string(j) : std::to_string(j);
    CHECK(fs::exists(a / ("ref_" + id + ".pfm")));
    CHECK(fs::exists(a / ("ref_" + id + ".png")));
    CHECK(fs::exists(a / ("fg_" + id + ".png")));
  }

  const Scene s = load_scene(a);
  REQUIRE(s.views.size() == 8);
  CHECK(s.views.camera(3).width == 48);
  CHECK(s.views.reference(0).width() == 48);
  CHECK(s.generator.has_value());
  CHECK(s.document["format"] == "meshalign-scene");

  // The resolved document rebuilds the same scene.
  const fs::path c = scratch("scene_c");
  make_scene(parse_scene_config(s.document, a), c);
  CHECK(bytes(a / "ref_05.pfm") == bytes(c / "ref_05.pfm"));
  CHECK(bytes(a / "scan.obj") == bytes(c / "scan.obj"));

  fs::remove(a / "depth_02.pfm");
  CHECK_THROWS_AS(load_scene(a), IoError);
  CHECK_THROWS_AS(load_scene(scratch("empty")), IoError);
}

TEST_CASE("scene documents are validated") {
  Json doc = head_scene(0);
  doc["cameras"] = Json::array({camera_to_json(
      Camera::look_at(Vec3(0, 0, 4.5), Vec3(0, 0, 9.0), Vec3(0, 1, 0), 30.0, 32, 32, 0.1, 20.0))});
  CHECK_THROWS_AS(make_scene(parse_scene_config(doc, "."), scratch("behind")), ConfigError);

  doc = head_scene(0);
  doc["references"] = "photographs";
  CHECK_THROWS_AS(parse_scene_config(doc, "."), ConfigError);
  doc = head_scene(0);
  doc.erase("cameras");
  CHECK_THROWS_AS(parse_scene_config(doc, "."), ParseError);
  doc = head_scene(0);
  doc["cameras"]["count"] = 9;
  CHECK_THROWS_AS(parse_scene_config(doc, "."), ConfigError);
  doc = head_scene(0);
  doc["scan"]["expression"] = 7;
  CHECK_THROWS_AS(parse_scene_config(doc, "."), ConfigError);
  CHECK_THROWS_AS(parse_scene_config(Json::array(), "."), ParseError);

  const fs::path bad = scratch("bad_json") / "scene.json";
  std::ofstream(bad) << "{\"scan\": ";
  CHECK_THROWS_AS(load_scene_config(bad), ParseError);
  CHECK_THROWS_AS(load_scene_config(bad.parent_path() / "absent.json"), IoError);
}

TEST_CASE("evaluating the scan against itself is exact") {
  const fs::path dir = build_scene(head_scene(1), "self_eval");
  EvaluateOptions opts;
  opts.mesh = dir / "scan.obj";
  opts.scene = dir;
  opts.texture = dir / "scan_texture.png";
  opts.samples = 4000;
  const Json r = evaluate_cmd(opts);
  CHECK(r["geometry"]["chamfer_l1"].get<double>() < 1e-9);
  CHECK(r["geometry"]["normal_consistency"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  for (const Json& f : r["geometry"]["f_score"]) {
    CHECK(f["f_score"].get<double>() == 1.0);
  }
  REQUIRE(r["image"].is_object());
  CHECK(r["image"]["psnr"].get<double>() >= 60.0);
  CHECK(r["image"]["ssim"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));

  opts.texture.reset();
  const Json g = evaluate_cmd(opts);
  CHECK(g["image"].is_null());
  CHECK(g["geometry"]["chamfer_l1"] == r["geometry"]["chamfer_l1"]);
}

TEST_CASE("template and registration commands share one texture across expressions") {
  const fs::path s0 = build_scene(head_scene(0), "reg_scene0");
  const fs::path s1 = build_scene(head_scene(1), "reg_scene1");

  TemplateOptions t;
  t.scene = s0;
  t.out = scratch("template");
  t.config = {{"fit", {{"iterations_per_phase", 15}, {"eta_fraction", 0.02}}},
              {"texture", {{"size", 128}, {"iterations", 30}}},
              {"target_vertices", 400},
              {"mask", {{"generator", "mouth-interior"}}}};
  const Json tj = make_template_cmd(t);
  for (const char* f : {"template.obj", "template.mtl", "texture.png", "mask.png", "dense.obj", "fit_log.csv",
                        "template.json"}) {
    CHECK(fs::exists(t.out / f));
  }
  const LoadedTemplate tmpl = load_template(t.out);
  CHECK(tmpl.mesh.vertex_count() <= 400);
  CHECK(tmpl.mask->size() == 128);

  const Json reg = {{"iterations_per_phase", 3}};
  auto run = [&](const fs::path& scene, const std::string& name) {
    RegisterOptions r;
    r.scene = scene;
    r.template_dir = t.out;
    r.out = scratch(name);
    r.config = reg;
    r.deterministic = true;
    const Json rep = register_cmd(r);
    CHECK(rep["iterations"].get<int>() == 15);
    CHECK_FALSE(rep.contains("wall_seconds"));
    return r.out;
  };
  const fs::path a = run(s0, "reg_a");
  const fs::path b = run(s1, "reg_b");
  const fs::path a2 = run(s0, "reg_a2");

  CHECK(bytes(a / "texture.png") == bytes(t.out / "texture.png"));
  CHECK(bytes(b / "texture.png") == bytes(t.out / "texture.png"));
  const TriangleMesh ma = load_obj(a / "aligned.obj");
  const TriangleMesh mb = load_obj(b / "aligned.obj");
  CHECK(ma.faces == mb.faces);
  CHECK(ma.face_uvs == mb.face_uvs);
  CHECK(ma.uvs == mb.uvs);
  CHECK(ma.vertex_count() > tmpl.mesh.vertex_count());

  for (const char* f : {"aligned.obj", "log.csv", "report.json", "compare_00.png"}) {
    CAPTURE(f);
    CHECK(bytes(a / f) == bytes(a2 / f));
  }
  std::ifstream log(a / "log.csv");
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    ++lines;
  }
  CHECK(lines == 16);
}

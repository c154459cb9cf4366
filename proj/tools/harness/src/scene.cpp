#include "meshalign/harness/scene.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/image.hpp"
#include "meshalign/obj_io.hpp"
#include "meshalign/parallel.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/raster.hpp"
#include "meshalign/texture_ops.hpp"

namespace meshalign::harness {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSceneFile = "scene.json";
constexpr const char* kFormat = "meshalign-scene";

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(fmt::format("scene field '{}': {}", key, e.what()));
  }
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Expression expression_from_json(const Json& j) {
  if (j.is_number_integer()) {
    return preset_expression(j.get<int>());
  }
  if (!j.is_object()) {
    throw ParseError("expression must be a preset index or an object");
  }
  Expression e;
  e.name = get_or<std::string>(j, "name", "custom");
  e.mouth_open = get_or(j, "mouth_open", 0.0);
  e.smile = get_or(j, "smile", 0.0);
  e.brow_raise = get_or(j, "brow_raise", 0.0);
  e.cheek_puff = get_or(j, "cheek_puff", 0.0);
  return e;
}

Json expression_to_json(const Expression& e) {
  return {{"name", e.name},
          {"mouth_open", e.mouth_open},
          {"smile", e.smile},
          {"brow_raise", e.brow_raise},
          {"cheek_puff", e.cheek_puff}};
}

std::vector<Camera> cameras_from_json(const Json& j) {
  std::vector<Camera> cams;
  if (j.is_object()) {
    const std::string rig = get_or<std::string>(j, "rig", "frontal-side");
    if (rig != "frontal-side") {
      throw ConfigError(fmt::format("unknown camera rig '{}'", rig));
    }
    cams = head_cameras(get_or(j, "count", 6), get_or(j, "size", 256), get_or(j, "distance", 4.5),
                        get_or(j, "fov", 30.0));
  } else if (j.is_array()) {
    for (const Json& c : j) {
      cams.push_back(camera_from_json(c));
    }
  } else {
    throw ParseError("'cameras' must be a rig object or a list of cameras");
  }
  if (cams.empty()) {
    throw ConfigError("a scene needs at least one camera");
  }
  return cams;
}

SHLighting lighting_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "head") {
      throw ConfigError(fmt::format("unknown lighting preset '{}'", j.get<std::string>()));
    }
    return head_lighting();
  }
  const Json& sh = j.at("sh");
  if (!sh.is_array() || sh.size() != 9) {
    throw ParseError("lighting 'sh' must hold 9 RGB triples");
  }
  SHLighting light;
  for (int k = 0; k < 9; ++k) {
    light.coeffs[k] = vec3_from_json(sh[k], "sh coefficient");
  }
  light.validate();
  return light;
}

Json lighting_to_json(const SHLighting& light) {
  Json sh = Json::array();
  for (const Vec3& c : light.coeffs) {
    sh.push_back(vec3_json(c));
  }
  return {{"sh", sh}};
}

// Seeded albedo affine in UV. Bilinear lookup reproduces it exactly, so
// finite differences of the color loss see no texel-line kinks.
struct UvRamp {
  Vec3 base;
  Vec3 du;
  Vec3 dv;
  [[nodiscard]] Vec3 operator()(const Vec2& uv) const { return base + uv.x() * du + uv.y() * dv; }
};

UvRamp seeded_ramp(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> slope(-0.3, 0.3);
  UvRamp r;
  for (int k = 0; k < 3; ++k) {
    r.du[k] = slope(rng);
    r.dv[k] = slope(rng);
    // Keeps the ramp inside [0.15, 0.85].
    r.base[k] = 0.5 - 0.5 * (r.du[k] + r.dv[k]);
  }
  return r;
}

TriangleMesh generate_scan(const GeneratorConfig& g) {
  if (g.name == "blob-head") {
    BlobHeadParams p = g.head;
    p.seed = g.seed;
    return make_blob_head(p, g.expression);
  }
  if (g.name == "icosphere") {
    if (g.level < 0 || g.level > 6) {
      throw ConfigError(fmt::format("icosphere level must lie in [0, 6], got {}", g.level));
    }
    TriangleMesh m = make_icosphere(g.level);
    assign_planar_uvs(m);
    const UvRamp ramp = seeded_ramp(g.seed);
    m.texture = std::make_shared<const TextureImage>(
        bake_texture(m, g.texture_size, [&](int f, const Vec3& b) {
          const Vec2 uv = b[0] * m.corner_uv(f, 0) + b[1] * m.corner_uv(f, 1) + b[2] * m.corner_uv(f, 2);
          return ramp(uv);
        }));
    return m;
  }
  throw ConfigError(fmt::format("unknown scan generator '{}'", g.name));
}

TriangleMesh load_textured_scan(const fs::path& mesh_path, const fs::path& texture_path) {
  TriangleMesh m = load_obj(mesh_path);
  if (!m.has_uvs()) {
    throw GeometryError(fmt::format("scan '{}' has no texture coordinates", mesh_path.string()));
  }
  m.texture = std::make_shared<const TextureImage>(read_texture_png(texture_path));
  return m;
}

fs::path require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) {
    throw IoError(fmt::format("missing scene file '{}'", p.string()));
  }
  return p;
}

ImageD one_channel(const ImageF& img, const fs::path& path) {
  if (img.channels() == 1) {
    return to_double(img);
  }
  ImageD out(img.width(), img.height(), 1);
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    out.data()[p] = img.pixel(p)[0];
  }
  if (img.channels() != 3) {
    throw ParseError(fmt::format("'{}': unexpected channel count {}", path.string(), img.channels()));
  }
  return out;
}

} // namespace

Vec3 vec3_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(fmt::format("{} must be a 3-element array", what));
  }
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) {
      throw ParseError(fmt::format("{} must hold numbers", what));
    }
    v[k] = j[k].get<double>();
  }
  return v;
}

Json camera_to_json(const Camera& c) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    rot.push_back(Json::array({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)}));
  }
  return {{"fx", c.fx},       {"fy", c.fy},         {"cx", c.cx},
          {"cy", c.cy},       {"rotation", rot},    {"translation", vec3_json(c.translation)},
          {"width", c.width}, {"height", c.height}, {"near", c.near},
          {"far", c.far}};
}

Camera camera_from_json(const Json& j) {
  Camera c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.near = get_or(j, "near", c.near);
    c.far = get_or(j, "far", c.far);
    const Json& rot = j.at("rotation");
    if (!rot.is_array() || rot.size() != 3) {
      throw ParseError("camera rotation must be a 3x3 row list");
    }
    for (int r = 0; r < 3; ++r) {
      c.rotation.row(r) = vec3_from_json(rot[r], "camera rotation row").transpose();
    }
    c.translation = vec3_from_json(j.at("translation"), "camera translation");
  } catch (const Json::exception& e) {
    throw ParseError(fmt::format("camera: {}", e.what()));
  }
  c.validate();
  return c;
}

Json generator_to_json(const GeneratorConfig& g) {
  Json j{{"generator", g.name}, {"seed", g.seed}};
  if (g.name == "blob-head") {
    j["expression"] = expression_to_json(g.expression);
    j["rings"] = g.head.rings;
    j["segments"] = g.head.segments;
    j["radii"] = vec3_json(g.head.radii);
    j["bumps"] = g.head.bumps;
    j["bump_amplitude"] = g.head.bump_amplitude;
    j["bump_width"] = g.head.bump_width;
    j["texture_size"] = g.head.texture_size;
  } else {
    j["level"] = g.level;
    j["texture_size"] = g.texture_size;
  }
  return j;
}

GeneratorConfig generator_from_json(const Json& j) {
  GeneratorConfig g;
  g.name = get_or<std::string>(j, "generator", g.name);
  g.seed = get_or<std::uint64_t>(j, "seed", g.seed);
  if (g.name == "blob-head") {
    BlobHeadParams& p = g.head;
    p.rings = get_or(j, "rings", p.rings);
    p.segments = get_or(j, "segments", p.segments);
    if (j.contains("radii")) {
      p.radii = vec3_from_json(j["radii"], "radii");
    }
    p.bumps = get_or(j, "bumps", p.bumps);
    p.bump_amplitude = get_or(j, "bump_amplitude", p.bump_amplitude);
    p.bump_width = get_or(j, "bump_width", p.bump_width);
    p.texture_size = get_or(j, "texture_size", p.texture_size);
    p.seed = g.seed;
    g.expression = j.contains("expression") ? expression_from_json(j["expression"]) : Expression{};
  } else if (g.name == "icosphere") {
    g.level = get_or(j, "level", g.level);
    g.texture_size = get_or(j, "texture_size", g.texture_size);
  } else {
    throw ConfigError(fmt::format("unknown scan generator '{}'", g.name));
  }
  return g;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(fmt::format("cannot open '{}'", path.string()));
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const Json& doc) {
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError(fmt::format("cannot write '{}'", path.string()));
  }
}

void save_textured_obj(const TriangleMesh& mesh, const fs::path& obj_path, const std::string& texture_file) {
  fs::path mtl = obj_path;
  mtl.replace_extension(".mtl");
  std::ofstream out(mtl, std::ios::binary);
  out << "newmtl material0\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nmap_Kd " << texture_file << '\n';
  if (!out) {
    throw IoError(fmt::format("cannot write '{}'", mtl.string()));
  }
  save_obj(mesh, obj_path, mtl.filename().string());
}

SceneConfig parse_scene_config(const Json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) {
    throw ParseError("scene document must be a JSON object");
  }
  SceneConfig cfg;
  if (!doc.contains("scan")) {
    throw ParseError("scene needs a 'scan' entry");
  }
  const Json& scan = doc["scan"];
  if (scan.contains("generator")) {
    cfg.generator = generator_from_json(scan);
  } else {
    cfg.scan_mesh = base_dir / scan.at("mesh").get<std::string>();
    cfg.scan_texture = base_dir / scan.at("texture").get<std::string>();
  }
  if (!doc.contains("cameras")) {
    throw ParseError("scene needs 'cameras'");
  }
  cfg.cameras = cameras_from_json(doc["cameras"]);
  cfg.lighting = doc.contains("lighting") ? lighting_from_json(doc["lighting"]) : head_lighting();
  if (doc.contains("background")) {
    cfg.background = vec3_from_json(doc["background"], "background");
  }
  cfg.units = get_or<std::string>(doc, "units", cfg.units);
  const std::string refs = get_or<std::string>(doc, "references", "render-from-scan");
  if (refs != "render-from-scan") {
    throw ConfigError(fmt::format("unsupported reference source '{}'", refs));
  }
  return cfg;
}

SceneConfig load_scene_config(const fs::path& path) {
  return parse_scene_config(read_json(path), path.parent_path());
}

void make_scene(const SceneConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  TriangleMesh scan = cfg.generator ? generate_scan(*cfg.generator)
                                    : load_textured_scan(cfg.scan_mesh, cfg.scan_texture);
  if (!scan.texture) {
    throw ConfigError("scan has no texture");
  }
  save_textured_obj(scan, out_dir / "scan.obj", "scan_texture.png");
  write_texture_png(out_dir / "scan_texture.png", *scan.texture);
  // Render from the files as written so loaders see exactly this scan.
  scan = load_textured_scan(out_dir / "scan.obj", out_dir / "scan_texture.png");

  const ViewSet views = render_reference_views(scan, cfg.cameras, cfg.lighting, cfg.background);
  for (int j = 0; j < views.size(); ++j) {
    double covered = 0.0;
    for (std::size_t p = 0; p < views.foreground(j).pixel_count(); ++p) {
      covered += views.foreground(j).data()[p];
    }
    if (covered == 0.0) {
      const Vec3 eye = cfg.cameras[j].center();
      throw ConfigError(fmt::format("camera {} (at {:.3f}, {:.3f}, {:.3f}) sees no part of the scan; "
                                    "it may be behind the scan or pointing away",
                                    j, eye.x(), eye.y(), eye.z()));
    }
  }

  Json doc;
  doc["format"] = kFormat;
  doc["version"] = 1;
  doc["units"] = cfg.units;
  doc["scan"] = {{"mesh", "scan.obj"}, {"texture", "scan_texture.png"}};
  if (cfg.generator) {
    doc["generator"] = generator_to_json(*cfg.generator);
  }
  doc["lighting"] = lighting_to_json(cfg.lighting);
  doc["background"] = vec3_json(cfg.background);
  doc["cameras"] = Json::array();
  doc["views"] = Json::array();
  std::vector<Json> entries(views.size());
  parallel_for(views.size(), [&](int j) {
    const std::string id = fmt::format("{:02d}", j);
    write_pfm(out_dir / ("ref_" + id + ".pfm"), views.reference(j));
    write_png_linear(out_dir / ("ref_" + id + ".png"), views.reference(j));
    write_png_linear(out_dir / ("fg_" + id + ".png"), views.foreground(j));
    write_pfm(out_dir / ("depth_" + id + ".pfm"), views.scan_depth(j));
    write_pfm(out_dir / ("normal_" + id + ".pfm"), views.scan_normal(j));
    entries[j] = {{"reference", "ref_" + id + ".pfm"},
                  {"preview", "ref_" + id + ".png"},
                  {"foreground", "fg_" + id + ".png"},
                  {"depth", "depth_" + id + ".pfm"},
                  {"normal", "normal_" + id + ".pfm"}};
  });
  for (int j = 0; j < views.size(); ++j) {
    doc["cameras"].push_back(camera_to_json(cfg.cameras[j]));
    doc["views"].push_back(entries[j]);
  }
  write_json(out_dir / kSceneFile, doc);
}

Scene load_scene(const fs::path& dir_or_file) {
  Scene s;
  const fs::path file = fs::is_directory(dir_or_file) ? dir_or_file / kSceneFile : dir_or_file;
  s.dir = file.parent_path();
  s.document = read_json(require_file(file));
  const Json& doc = s.document;
  if (get_or<std::string>(doc, "format", "") != kFormat || !doc.contains("views")) {
    throw ParseError(fmt::format("'{}' is not a generated scene; run make-scene first", file.string()));
  }
  const SceneConfig cfg = parse_scene_config(doc, s.dir);
  if (doc.contains("generator")) {
    s.generator = generator_from_json(doc["generator"]);
  }
  auto scan = std::make_shared<TriangleMesh>(
      load_textured_scan(require_file(cfg.scan_mesh), require_file(cfg.scan_texture)));
  s.scan = scan;

  const Json& views = doc["views"];
  if (!views.is_array() || views.size() != cfg.cameras.size()) {
    throw ParseError("scene 'views' must list one entry per camera");
  }
  s.views.lighting = cfg.lighting;
  s.views.background = cfg.background;
  const int n = static_cast<int>(cfg.cameras.size());
  std::vector<ImageD> refs(n), fgs(n), depth(n), normal(n);
  for (int j = 0; j < n; ++j) {
    const Json& v = views[j];
    auto path = [&](const char* key) {
      if (!v.contains(key)) {
        throw ParseError(fmt::format("view {} lacks '{}'", j, key));
      }
      return require_file(s.dir / v[key].get<std::string>());
    };
    refs[j] = to_double(read_pfm(path("reference")));
    const fs::path fg = path("foreground");
    fgs[j] = one_channel(read_png_linear(fg), fg);
    depth[j] = to_double(read_pfm(path("depth")));
    normal[j] = to_double(read_pfm(path("normal")));
  }
  for (int j = 0; j < n; ++j) {
    s.views.add_view(cfg.cameras[j], std::move(refs[j]), std::move(fgs[j]));
  }
  s.views.set_scan_renders(s.scan, std::move(depth), std::move(normal));
  return s;
}

} // namespace meshalign::harness

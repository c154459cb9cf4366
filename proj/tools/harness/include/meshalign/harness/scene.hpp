#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshalign/camera.hpp"
#include "meshalign/hra.hpp"
#include "meshalign/lighting.hpp"
#include "meshalign/mesh.hpp"
#include "meshalign/synthetic.hpp"

namespace meshalign::harness {

using Json = nlohmann::json;

/// Procedural scan description: "blob-head" (with an expression) or
/// "icosphere" (textured unit sphere for small gradient fixtures).
struct GeneratorConfig {
  std::string name = "blob-head";
  std::uint64_t seed = 1;
  BlobHeadParams head;
  Expression expression;
  int level = 2;
  int texture_size = 64;
};

struct SceneConfig {
  // Either a generator or an existing textured OBJ (with its texture PNG).
  std::optional<GeneratorConfig> generator;
  std::filesystem::path scan_mesh;
  std::filesystem::path scan_texture;
  std::vector<Camera> cameras;
  SHLighting lighting;
  Vec3 background = Vec3::Zero();
  std::string units = "scene units (procedural head about 1.9 tall)";
};

/// Parses a scene document. Relative paths resolve against `base_dir`.
/// Cameras are either an explicit list or a rig
/// {"rig": "frontal-side", "count", "size", "distance", "fov"}; lighting is
/// {"sh": 9 RGB triples} or the preset name "head".
SceneConfig parse_scene_config(const Json& doc, const std::filesystem::path& base_dir);
SceneConfig load_scene_config(const std::filesystem::path& path);

/// Writes the scan, its texture and per-view references (linear PFM plus an
/// sRGB PNG preview), foregrounds and scan depth/normal renders to
/// `out_dir`, with a resolved scene.json. Every camera must see the scan.
void make_scene(const SceneConfig& cfg, const std::filesystem::path& out_dir);

struct Scene {
  std::filesystem::path dir;
  Json document;
  std::shared_ptr<const TriangleMesh> scan;
  ViewSet views;
  std::optional<GeneratorConfig> generator;
};

/// Loads a directory written by make_scene (or its scene.json path).
Scene load_scene(const std::filesystem::path& dir_or_file);

Json camera_to_json(const Camera& c);
Camera camera_from_json(const Json& j);
Json generator_to_json(const GeneratorConfig& g);
GeneratorConfig generator_from_json(const Json& j);
Vec3 vec3_from_json(const Json& j, const char* what);

/// Reads a JSON document, wrapping failures in ParseError / IoError.
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& doc);

/// Textured OBJ with a sibling MTL referencing `texture_file`.
void save_textured_obj(const TriangleMesh& mesh, const std::filesystem::path& obj_path,
                       const std::string& texture_file);

} // namespace meshalign::harness

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/harness/commands.hpp"
#include "meshalign/parallel.hpp"

namespace fs = std::filesystem;
using namespace meshalign;
using namespace meshalign::harness;

namespace {

// Exit codes: 0 success, 1 check failed, 2 usage, 3+ error kinds.
int error_code(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e)) return 4;
  if (dynamic_cast<const IoError*>(&e)) return 5;
  if (dynamic_cast<const GeometryError*>(&e)) return 6;
  if (dynamic_cast<const NumericError*>(&e)) return 7;
  return 8;
}

const char* error_kind(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const GeometryError*>(&e)) return "geometry";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  return "error";
}

void emit(const Json& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_json(out, doc);
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view mesh registration with rendering losses on synthetic scenes"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool deterministic = false;
  app.add_option("--config", config, "JSON configuration for the subcommand");
  app.add_option("--seed", seed, "Seed overriding the configuration");
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", deterministic, "Single-threaded run with timing omitted from outputs");

  auto* scene_cmd = app.add_subcommand("make-scene", "Generate a scan, cameras and reference renders");
  std::string scene_out;
  scene_cmd->add_option("--out", scene_out, "Scene directory")->required();

  auto* tmpl_cmd = app.add_subcommand("make-template", "Fit, texture and decimate a template from a scene");
  std::string tmpl_scene, tmpl_out;
  tmpl_cmd->add_option("--scene", tmpl_scene, "Scene directory")->required();
  tmpl_cmd->add_option("--out", tmpl_out, "Template directory")->required();

  auto* reg_cmd = app.add_subcommand("register", "Register a template to a scene");
  RegisterOptions reg;
  std::string reg_scene, reg_template, reg_out;
  reg_cmd->add_option("--scene", reg_scene, "Scene directory")->required();
  reg_cmd->add_option("--template", reg_template, "Template directory")->required();
  reg_cmd->add_option("--out", reg_out, "Output directory")->required();
  reg_cmd->add_option("--checkpoint-every", reg.checkpoint_every, "Write a mesh every k iterations")
      ->check(CLI::NonNegativeNumber);
  reg_cmd->add_flag("--dump-buffers", reg.dump_buffers, "Write per-view color, depth, normal and mask PFMs");

  auto* eval_cmd = app.add_subcommand("evaluate", "Geometric and photometric report for a mesh");
  EvaluateOptions ev;
  std::string eval_mesh, eval_scene, eval_texture, eval_out;
  eval_cmd->add_option("--mesh", eval_mesh, "Candidate OBJ")->required();
  eval_cmd->add_option("--scene", eval_scene, "Scene directory")->required();
  eval_cmd->add_option("--texture", eval_texture, "Texture PNG (default: texture.png next to the mesh)");
  eval_cmd->add_option("--samples", ev.samples, "Surface samples per mesh");
  eval_cmd->add_option("--thresholds", ev.thresholds, "F-score thresholds as fractions of the scan diagonal");
  eval_cmd->add_option("--out", eval_out, "Report path (default: stdout)");

  auto* gc_cmd = app.add_subcommand("grad-check", "Compare vertex gradients against finite differences");
  GradCheckOptions gc;
  std::string gc_scene, gc_constraint = "color", gc_mesh, gc_texture, gc_mask, gc_out;
  gc_cmd->add_option("--scene", gc_scene, "Scene directory")->required();
  gc_cmd->add_option("--constraint", gc_constraint, "color, depth or normal");
  gc_cmd->add_option("--mesh", gc_mesh, "Mesh to differentiate (default: jittered scan)");
  gc_cmd->add_option("--texture", gc_texture, "Texture PNG for the mesh");
  gc_cmd->add_option("--mask", gc_mask, "Mask PNG; also checks masked-texel neutrality");
  gc_cmd->add_option("--tolerance", gc.check.tolerance, "Relative error tolerance");
  gc_cmd->add_option("--samples", gc.check.samples, "Sampled vertex coordinates");
  gc_cmd->add_option("--step", gc.check.step_fraction, "Step as a fraction of the bounding-box diagonal");
  gc_cmd->add_option("--min-pass-rate", gc.min_pass_rate, "Fraction of coordinates that must pass");
  gc_cmd->add_option("--out", gc_out, "Report path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  set_thread_count(deterministic ? 1 : threads);
  try {
    const Json cfg = config.empty() ? Json::object() : read_json(config);
    const fs::path cfg_dir = config.empty() ? fs::path(".") : fs::path(config).parent_path();
    if (scene_cmd->parsed()) {
      if (config.empty()) {
        throw ConfigError("make-scene needs --config with a scene document");
      }
      SceneConfig sc = parse_scene_config(cfg, cfg_dir);
      if (seed && sc.generator) {
        sc.generator->seed = *seed;
        sc.generator->head.seed = *seed;
      }
      make_scene(sc, scene_out);
    } else if (tmpl_cmd->parsed()) {
      TemplateOptions t{tmpl_scene, tmpl_out, cfg, cfg_dir, seed};
      emit(make_template_cmd(t), "");
    } else if (reg_cmd->parsed()) {
      reg.scene = reg_scene;
      reg.template_dir = reg_template;
      reg.out = reg_out;
      reg.config = cfg;
      reg.deterministic = deterministic;
      reg.seed = seed.value_or(0);
      emit(register_cmd(reg), "");
    } else if (eval_cmd->parsed()) {
      ev.mesh = eval_mesh;
      ev.scene = eval_scene;
      if (!eval_texture.empty()) {
        ev.texture = eval_texture;
      }
      ev.seed = seed.value_or(ev.seed);
      emit(evaluate_cmd(ev), eval_out);
    } else if (gc_cmd->parsed()) {
      gc.scene = gc_scene;
      gc.check.constraint = parse_constraint(gc_constraint);
      gc.check.seed = seed.value_or(gc.check.seed);
      if (!gc_mesh.empty()) gc.mesh = gc_mesh;
      if (!gc_texture.empty()) gc.texture = gc_texture;
      if (!gc_mask.empty()) gc.mask = gc_mask;
      const Json rep = grad_check_cmd(gc);
      emit(rep, gc_out);
      return rep["pass"].get<bool>() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << Json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << '\n';
    return error_code(e);
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 9;
  }
  return 0;
}

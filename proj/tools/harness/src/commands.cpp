#include "meshalign/harness/commands.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/image.hpp"
#include "meshalign/metrics.hpp"
#include "meshalign/obj_io.hpp"
#include "meshalign/parallel.hpp"
#include "meshalign/raster.hpp"

namespace meshalign::harness {

namespace fs = std::filesystem;

namespace {

template <typename T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(fmt::format("config field '{}': {}", key, e.what()));
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ImageD render_color(const TriangleMesh& mesh, const ViewSet& views, int j, const TextureImage& texture) {
  const FrameBuffer fb = rasterize(mesh, views.camera(j));
  ColorOptions opts;
  opts.background = views.background;
  return shade_color(fb, mesh, views.lighting, texture, opts);
}

// PSNR restricted to pixels where either image shows the subject.
double foreground_psnr(const ImageD& a, const ImageD& b, const ImageD& fg_a, const ImageD& fg_b) {
  double se = 0.0;
  long count = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (fg_a.data()[p] == 0.0 && fg_b.data()[p] == 0.0) {
      continue;
    }
    for (int c = 0; c < a.channels(); ++c) {
      const double d = a.pixel(p)[c] - b.pixel(p)[c];
      se += d * d;
    }
    count += a.channels();
  }
  if (count == 0 || se == 0.0) {
    return kPsnrCap;
  }
  return std::min(kPsnrCap, -10.0 * std::log10(se / static_cast<double>(count)));
}

ImageD coverage(const TriangleMesh& mesh, const Camera& cam) {
  const FrameBuffer fb = rasterize(mesh, cam);
  ImageD out(fb.width(), fb.height(), 1);
  for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
    out.data()[p] = fb.covered(p) ? 1.0 : 0.0;
  }
  return out;
}

Json loss_by_constraint(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& hra) {
  Json out = Json::object();
  LossContext ctx;
  ctx.vertex_gradients = false;
  for (Constraint c : hra.rotation) {
    out[to_string(c)] = constraint_loss(mesh, views, hra, c, ctx).loss;
  }
  return out;
}

std::shared_ptr<const MaskImage> template_mask(const Json& mask_doc, const Scene& scene, const TriangleMesh& dense,
                                               int size, const fs::path& base) {
  if (mask_doc.is_null()) {
    return nullptr;
  }
  if (mask_doc.contains("path")) {
    auto m = std::make_shared<const MaskImage>(read_mask_png(base / mask_doc["path"].get<std::string>()));
    return m;
  }
  const std::string gen = field<std::string>(mask_doc, "generator", "");
  if (gen != "mouth-interior") {
    throw ConfigError(fmt::format("unknown mask generator '{}'", gen));
  }
  if (!scene.generator || scene.generator->name != "blob-head") {
    throw ConfigError("the mouth-interior mask needs a blob-head scene");
  }
  BlobHeadParams p = scene.generator->head;
  p.seed = scene.generator->seed;
  return std::make_shared<const MaskImage>(
      mouth_interior_mask(dense, size, p, scene.generator->expression, field(mask_doc, "margin", 0.03)));
}

} // namespace

RegistrationConfig registration_config_from_json(const Json& j, RegistrationConfig cfg) {
  if (!j.is_object()) {
    throw ParseError("registration config must be a JSON object");
  }
  if (j.contains("phases")) {
    cfg.phases.clear();
    for (const Json& p : j["phases"]) {
      PhaseConfig ph;
      ph.lambda = field(p, "lambda", ph.lambda);
      ph.iterations = field(p, "iterations", ph.iterations);
      ph.remesh_before = field(p, "remesh_before", ph.remesh_before);
      ph.edge_factor = field(p, "edge_factor", ph.edge_factor);
      cfg.phases.push_back(ph);
    }
  } else if (j.contains("schedule")) {
    const std::string s = j["schedule"].get<std::string>();
    if (s == "default") {
      cfg.phases = RegistrationConfig::default_phases();
    } else if (s == "single") {
      cfg.phases = RegistrationConfig::single_phase().phases;
    } else {
      throw ConfigError(fmt::format("unknown schedule '{}'", s));
    }
  }
  if (j.contains("iterations_per_phase")) {
    const int n = j["iterations_per_phase"].get<int>();
    for (PhaseConfig& ph : cfg.phases) {
      ph.iterations = n;
    }
  }
  cfg.eta_fraction = field(j, "eta_fraction", cfg.eta_fraction);
  cfg.eta_phase_decay = field(j, "eta_phase_decay", cfg.eta_phase_decay);
  cfg.eta_final_ratio = field(j, "eta_final_ratio", cfg.eta_final_ratio);
  cfg.moment_decay = field(j, "moment_decay", cfg.moment_decay);
  cfg.plateau_window = field(j, "plateau_window", cfg.plateau_window);
  cfg.validate();
  return cfg;
}

Json registration_config_to_json(const RegistrationConfig& cfg) {
  Json phases = Json::array();
  for (const PhaseConfig& p : cfg.phases) {
    phases.push_back({{"lambda", p.lambda},
                      {"iterations", p.iterations},
                      {"remesh_before", p.remesh_before},
                      {"edge_factor", p.edge_factor}});
  }
  return {{"phases", phases},
          {"eta_fraction", cfg.eta_fraction},
          {"eta_phase_decay", cfg.eta_phase_decay},
          {"eta_final_ratio", cfg.eta_final_ratio},
          {"moment_decay", cfg.moment_decay},
          {"plateau_window", cfg.plateau_window}};
}

HraConfig hra_config_from_json(const Json& j) {
  HraConfig h;
  if (j.contains("rotation")) {
    h.rotation.clear();
    for (const Json& c : j["rotation"]) {
      h.rotation.push_back(parse_constraint(c.get<std::string>()));
    }
  }
  if (j.contains("weights")) {
    const Vec3 w = vec3_from_json(j["weights"], "weights");
    h.weights = {w.x(), w.y(), w.z()};
  }
  h.validate();
  return h;
}

Json make_template_cmd(const TemplateOptions& opts) {
  const Json& cj = opts.config;
  const Scene scene = load_scene(opts.scene);
  const std::uint64_t seed = opts.seed.value_or(field<std::uint64_t>(cj, "seed", 1));

  BustParams bp;
  if (cj.contains("bust")) {
    const Json& b = cj["bust"];
    bp.rings = field(b, "rings", bp.rings);
    bp.segments = field(b, "segments", bp.segments);
    if (b.contains("radii")) {
      bp.radii = vec3_from_json(b["radii"], "bust radii");
    }
    bp.nose = field(b, "nose", bp.nose);
    bp.radius_jitter = field(b, "radius_jitter", bp.radius_jitter);
  }
  TemplateConfig tc;
  tc.fit = registration_config_from_json(cj.value("fit", Json::object()));
  if (cj.contains("texture")) {
    const Json& t = cj["texture"];
    tc.texture.size = field(t, "size", tc.texture.size);
    tc.texture.iterations = field(t, "iterations", tc.texture.iterations);
    tc.texture.step = field(t, "step", tc.texture.step);
    tc.texture.final_step = field(t, "final_step", tc.texture.final_step);
  }
  tc.target_vertices = field(cj, "target_vertices", tc.target_vertices);

  const TriangleMesh bust = make_bust(bp, seed);
  TemplateBundle bundle = build_template(bust, scene.views, tc);
  if (auto m = template_mask(cj.value("mask", Json()), scene, bundle.dense, tc.texture.size, opts.config_dir)) {
    if (m->size() != bundle.texture->size()) {
      throw ConfigError(fmt::format("mask is {}x{} but the texture is {}x{}", m->size(), m->size(),
                                    bundle.texture->size(), bundle.texture->size()));
    }
    bundle.mask = std::move(m);
  }

  fs::create_directories(opts.out);
  save_textured_obj(bundle.mesh, opts.out / "template.obj", "texture.png");
  save_obj(bundle.dense, opts.out / "dense.obj");
  write_texture_png(opts.out / "texture.png", *bundle.texture);
  write_mask_png(opts.out / "mask.png", *bundle.mask);
  write_log_csv(opts.out / "fit_log.csv", bundle.fit_log.log, false);

  // Score the template as written, since registration reads these files.
  const LoadedTemplate written = load_template_files(opts.out / "template.obj", opts.out / "texture.png");
  double mean_psnr = 0.0;
  for (int j = 0; j < scene.views.size(); ++j) {
    mean_psnr += psnr(render_color(written.mesh, scene.views, j, *written.texture), scene.views.reference(j));
  }
  mean_psnr /= scene.views.size();

  Json doc;
  doc["mesh"] = "template.obj";
  doc["texture"] = "texture.png";
  doc["mask"] = "mask.png";
  doc["seed"] = seed;
  doc["bust_vertices"] = bust.vertex_count();
  doc["dense_vertices"] = bundle.dense.vertex_count();
  doc["template_vertices"] = bundle.mesh.vertex_count();
  doc["template_faces"] = bundle.mesh.face_count();
  doc["fit"] = registration_config_to_json(tc.fit);
  doc["fit_final_loss"] = bundle.fit_log.log.empty() ? 0.0 : bundle.fit_log.log.back().loss;
  doc["fit_warnings"] = bundle.fit_log.warnings;
  doc["texture_size"] = tc.texture.size;
  doc["texture_iterations"] = tc.texture.iterations;
  doc["texture_loss_initial"] = bundle.texture_loss.empty() ? 0.0 : bundle.texture_loss.front();
  doc["texture_loss_final"] = bundle.texture_loss.empty() ? 0.0 : bundle.texture_loss.back();
  doc["render_psnr_mean"] = mean_psnr;
  write_json(opts.out / "template.json", doc);
  return doc;
}

LoadedTemplate load_template_files(const fs::path& obj, const fs::path& texture) {
  LoadedTemplate t;
  if (!fs::is_regular_file(obj)) {
    throw IoError(fmt::format("missing template mesh '{}'", obj.string()));
  }
  if (!fs::is_regular_file(texture)) {
    throw IoError(fmt::format("missing template texture '{}'", texture.string()));
  }
  t.mesh = load_obj(obj);
  if (!t.mesh.has_uvs()) {
    throw GeometryError(fmt::format("template '{}' has no texture coordinates", obj.string()));
  }
  t.texture = std::make_shared<const TextureImage>(read_texture_png(texture));
  t.mesh.texture = t.texture;
  t.texture_file = texture;
  return t;
}

LoadedTemplate load_template(const fs::path& dir) {
  const Json doc = read_json(dir / "template.json");
  LoadedTemplate t = load_template_files(dir / doc.value("mesh", "template.obj"),
                                         dir / doc.value("texture", "texture.png"));
  const fs::path mask = dir / doc.value("mask", "mask.png");
  t.mask = fs::is_regular_file(mask) ? std::make_shared<const MaskImage>(read_mask_png(mask))
                                     : std::make_shared<const MaskImage>(MaskImage::ones(t.texture->size()));
  return t;
}

Json register_cmd(const RegisterOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scene scene = load_scene(opts.scene);
  const LoadedTemplate tmpl = load_template(opts.template_dir);

  RegistrationConfig base;
  base.eta_fraction = 0.02;
  RegistrationConfig cfg = registration_config_from_json(opts.config, base);
  cfg.checkpoint_every = opts.checkpoint_every;
  cfg.checkpoint_dir = opts.out / "checkpoints";
  HraConfig hra = hra_config_from_json(opts.config);
  const bool use_mask = field(opts.config, "use_mask", true);
  if (use_mask) {
    hra.mask = tmpl.mask;
  }

  fs::create_directories(opts.out);
  const Json initial = loss_by_constraint(tmpl.mesh, scene.views, hra);
  RegistrationResult res = run_registration(tmpl.mesh, scene.views, cfg, hra);
  res.mesh.texture = tmpl.texture;
  const Json final_loss = loss_by_constraint(res.mesh, scene.views, hra);

  save_textured_obj(res.mesh, opts.out / "aligned.obj", "texture.png");
  fs::copy_file(tmpl.texture_file, opts.out / "texture.png", fs::copy_options::overwrite_existing);
  write_log_csv(opts.out / "log.csv", res.log, !opts.deterministic);

  const int nv = scene.views.size();
  if (opts.dump_buffers) {
    fs::create_directories(opts.out / "buffers");
  }
  parallel_for(nv, [&](int j) {
    const std::string id = fmt::format("{:02d}", j);
    const FrameBuffer fb = rasterize(res.mesh, scene.views.camera(j));
    ColorOptions co;
    co.background = scene.views.background;
    const ImageD render = shade_color(fb, res.mesh, scene.views.lighting, *tmpl.texture, co);
    const ImageD& ref = scene.views.reference(j);
    ImageD strip(3 * render.width(), render.height(), 3);
    for (int y = 0; y < render.height(); ++y) {
      for (int x = 0; x < render.width(); ++x) {
        for (int c = 0; c < 3; ++c) {
          strip.at(x, y, c) = ref.at(x, y, c);
          strip.at(x + render.width(), y, c) = render.at(x, y, c);
          strip.at(x + 2 * render.width(), y, c) = std::min(1.0, 4.0 * std::abs(ref.at(x, y, c) - render.at(x, y, c)));
        }
      }
    }
    write_png_linear(opts.out / ("compare_" + id + ".png"), strip);
    if (opts.dump_buffers) {
      const fs::path dir = opts.out / "buffers";
      write_pfm(dir / ("color_" + id + ".pfm"), render);
      write_pfm(dir / ("depth_" + id + ".pfm"), render_depth(fb, res.mesh));
      write_pfm(dir / ("normal_" + id + ".pfm"), render_normal(fb, res.mesh));
      write_pfm(dir / ("mask_" + id + ".pfm"), render_mask(fb, res.mesh, *tmpl.mask));
    }
  });

  Json rotation = Json::array();
  for (Constraint c : hra.rotation) {
    rotation.push_back(to_string(c));
  }
  Json report;
  report["scene"] = opts.scene.string();
  report["template"] = opts.template_dir.string();
  report["seed"] = opts.seed;
  report["registration"] = registration_config_to_json(cfg);
  report["rotation"] = rotation;
  report["weights"] = hra.weights;
  report["use_mask"] = use_mask;
  report["iterations"] = res.log.size();
  report["vertices"] = res.mesh.vertex_count();
  report["faces"] = res.mesh.face_count();
  report["initial_loss"] = initial;
  report["final_loss"] = final_loss;
  report["warnings"] = res.warnings;
  report["mesh"] = "aligned.obj";
  report["texture"] = "texture.png";
  if (!opts.deterministic) {
    report["wall_seconds"] = seconds_since(t0);
    report["threads"] = thread_count();
  }
  write_json(opts.out / "report.json", report);
  return report;
}

Json evaluate_cmd(const EvaluateOptions& opts) {
  if (opts.samples <= 0) {
    throw ConfigError("sample count must be positive");
  }
  const Scene scene = load_scene(opts.scene);
  if (!fs::is_regular_file(opts.mesh)) {
    throw IoError(fmt::format("missing candidate mesh '{}'", opts.mesh.string()));
  }
  TriangleMesh cand = load_obj(opts.mesh);
  const TriangleMesh& gt = *scene.scan;
  const double diag = bounding_box_diagonal(gt);
  std::vector<double> taus;
  for (double f : opts.thresholds) {
    if (!(f > 0.0)) {
      throw ConfigError(fmt::format("F-score threshold must be positive, got {}", f));
    }
    taus.push_back(f * diag);
  }
  const GeoReport geo = evaluate_geometry(cand, gt, opts.samples, opts.seed, taus);

  Json report;
  report["mesh"] = opts.mesh.string();
  report["scene"] = opts.scene.string();
  Json f = Json::array();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    f.push_back({{"fraction_of_diagonal", opts.thresholds[i]}, {"tau", taus[i]}, {"f_score", geo.f_score.at(taus[i])}});
  }
  report["geometry"] = {{"chamfer_l1", geo.chamfer_l1},
                        {"chamfer_percent_of_diagonal", 100.0 * geo.chamfer_l1 / diag},
                        {"candidate_to_scan", geo.candidate_to_gt},
                        {"scan_to_candidate", geo.gt_to_candidate},
                        {"normal_consistency", geo.normal_consistency},
                        {"f_score", f},
                        {"scan_diagonal", diag},
                        {"samples", geo.samples},
                        {"seed", geo.seed}};

  fs::path tex_path;
  if (opts.texture) {
    tex_path = *opts.texture;
  } else if (fs::is_regular_file(opts.mesh.parent_path() / "texture.png")) {
    tex_path = opts.mesh.parent_path() / "texture.png";
  }
  if (tex_path.empty() || !cand.has_uvs()) {
    report["image"] = nullptr;
    report["image_note"] = "no texture or UVs for the candidate; photometric report skipped";
    return report;
  }
  if (!fs::is_regular_file(tex_path)) {
    throw IoError(fmt::format("missing texture '{}'", tex_path.string()));
  }
  const TextureImage texture = read_texture_png(tex_path);
  const int nv = scene.views.size();
  std::vector<double> p(nv), s(nv), pf(nv);
  parallel_for(nv, [&](int j) {
    const ImageD img = render_color(cand, scene.views, j, texture);
    const ImageD& ref = scene.views.reference(j);
    p[j] = psnr(img, ref);
    s[j] = ssim(img, ref);
    pf[j] = foreground_psnr(img, ref, coverage(cand, scene.views.camera(j)), scene.views.foreground(j));
  });
  double mp = 0.0, ms = 0.0, mf = 0.0;
  for (int j = 0; j < nv; ++j) {
    mp += p[j] / nv;
    ms += s[j] / nv;
    mf += pf[j] / nv;
  }
  report["image"] = {{"texture", tex_path.string()},
                     {"psnr", mp},
                     {"ssim", ms},
                     {"psnr_foreground", mf},
                     {"psnr_per_view", p},
                     {"ssim_per_view", s},
                     {"psnr_foreground_per_view", pf}};
  return report;
}

Json grad_check_cmd(const GradCheckOptions& opts) {
  const Scene scene = load_scene(opts.scene);
  const GradCheckConfig& cc = opts.check;
  TriangleMesh mesh;
  if (opts.mesh) {
    if (!fs::is_regular_file(*opts.mesh)) {
      throw IoError(fmt::format("missing mesh '{}'", opts.mesh->string()));
    }
    mesh = load_obj(*opts.mesh);
    const fs::path tex = opts.texture ? *opts.texture : opts.mesh->parent_path() / "texture.png";
    if (fs::is_regular_file(tex)) {
      mesh.texture = std::make_shared<const TextureImage>(read_texture_png(tex));
    }
  } else {
    mesh = *scene.scan;
    std::mt19937_64 rng(cc.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double amp = opts.jitter * bounding_box_diagonal(mesh);
    for (Vec3& v : mesh.vertices) {
      v += amp * Vec3(u(rng), u(rng), u(rng));
    }
    if (opts.texture) {
      mesh.texture = std::make_shared<const TextureImage>(read_texture_png(*opts.texture));
    }
  }
  std::shared_ptr<const MaskImage> mask;
  if (opts.mask) {
    mask = std::make_shared<const MaskImage>(read_mask_png(*opts.mask));
  }
  const GradCheckReport rep = grad_check(mesh, scene.views, cc, mask.get());

  Json failures = Json::array();
  for (const CoordinateCheck& c : rep.coordinates) {
    if (!c.pass) {
      failures.push_back({{"vertex", c.vertex},
                          {"axis", c.axis},
                          {"analytic", c.analytic},
                          {"numeric", c.numeric},
                          {"rel_error", c.rel_error}});
    }
  }
  bool pass = rep.tested > 0 && rep.pass_rate() >= opts.min_pass_rate;
  Json out;
  out["constraint"] = to_string(rep.constraint);
  out["seed"] = cc.seed;
  out["step"] = rep.step;
  out["tolerance"] = cc.tolerance;
  out["stable_pixels"] = rep.pixels;
  out["tested"] = rep.tested;
  out["passed"] = rep.passed;
  out["pass_rate"] = rep.pass_rate();
  out["max_rel_error"] = rep.max_rel_error;
  out["median_rel_error"] = rep.median_rel_error;
  out["failures"] = failures;
  if (rep.mask_checked) {
    const bool neutral = rep.masked_texel_analytic_max == 0.0 && rep.masked_loss_change == 0.0 &&
                         rep.masked_vertex_grad_change == 0.0;
    out["mask"] = {{"texel_grad_max", rep.masked_texel_analytic_max},
                   {"loss_change", rep.masked_loss_change},
                   {"vertex_grad_change", rep.masked_vertex_grad_change},
                   {"neutral", neutral}};
    pass = pass && neutral;
  }
  out["pass"] = pass;
  return out;
}

} // namespace meshalign::harness

#include "meshalign/template.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/primitives.hpp"
#include "meshalign/raster.hpp"
#include "meshalign/remesh.hpp"
#include "meshalign/texture_ops.hpp"

namespace meshalign {

TriangleMesh make_bust(const BustParams& params, std::uint64_t seed) {
  TriangleMesh m = make_capped_cylinder_sphere(params.rings, params.segments);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 radii = params.radii;
  for (int k = 0; k < 3; ++k) {
    radii[k] *= 1.0 + params.radius_jitter * u(rng);
  }
  for (Vec3& v : m.vertices) {
    const Vec3 d = v.normalized();
    const double a = std::atan2(d.x(), d.z());
    const double e = std::asin(std::clamp(d.y(), -1.0, 1.0));
    const double nose = params.nose * std::exp(-0.5 * ((a / 0.2) * (a / 0.2) + (e / 0.25) * (e / 0.25)));
    v = radii.cwiseProduct(d) * (1.0 + nose);
  }
  return m;
}

RegistrationResult fit_depth_only(const TriangleMesh& bust, const ViewSet& views, const RegistrationConfig& cfg) {
  HraConfig depth;
  depth.rotation = {Constraint::Depth};
  return run_registration(bust, views, cfg, depth);
}

TextureRecoveryResult recover_texture(const TriangleMesh& mesh, const ViewSet& views,
                                      const TextureRecoveryConfig& cfg) {
  if (!mesh.has_uvs()) {
    throw ConfigError("texture recovery needs a mesh with UVs");
  }
  if (cfg.size < 4 || cfg.iterations < 0 || !(cfg.step > 0.0) || !(cfg.final_step > 0.0)) {
    throw ConfigError("invalid texture recovery settings");
  }
  const MeshTopology topo = build_topology(mesh);
  TextureImage tex = TextureImage::constant(cfg.size, static_cast<float>(cfg.init.x()),
                                            static_cast<float>(cfg.init.y()), static_cast<float>(cfg.init.z()));

  // Total shading weight each texel receives; bounds the per-texel gradient.
  ImageD weight(cfg.size, cfg.size, 3);
  for (int j = 0; j < views.size(); ++j) {
    const FrameBuffer fb = rasterize(mesh, views.camera(j), {}, &topo);
    const ImageD ones(fb.width(), fb.height(), 3, 1.0);
    const ColorInputs ci{&views.lighting, &tex, {views.background, nullptr, true}};
    const RasterGradients g = backward(fb, mesh, {&ones, nullptr, nullptr}, &ci, true);
    for (std::size_t i = 0; i < weight.data().size(); ++i) {
      weight.data()[i] += g.texels.data()[i];
    }
  }
  std::vector<char> known(static_cast<std::size_t>(cfg.size) * cfg.size, 0);
  int covered = 0;
  for (std::size_t t = 0; t < known.size(); ++t) {
    const double* w = weight.pixel(t);
    known[t] = w[0] > 0.0 || w[1] > 0.0 || w[2] > 0.0;
    covered += known[t];
  }
  if (covered == 0) {
    throw GeometryError("no texel is visible in any view");
  }

  TextureRecoveryResult out;
  LossContext ctx;
  ctx.topology = &topo;
  ctx.texel_gradients = true;
  ctx.vertex_gradients = false;
  for (int it = 0; it < cfg.iterations; ++it) {
    const LossResult r = color_loss(mesh, views, tex, nullptr, ctx);
    out.loss.push_back(r.loss);
    const double frac = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 0.0;
    const double step = cfg.step * std::pow(cfg.final_step / cfg.step, frac);
    ImageF& texels = tex.mutable_texels();
    for (std::size_t i = 0; i < texels.data().size(); ++i) {
      const double w = weight.data()[i];
      if (w > 0.0) {
        const double v = texels.data()[i] - step * r.texel_grad.data()[i] / w;
        texels.data()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  out.loss.push_back(color_loss(mesh, views, tex, nullptr, LossContext{&topo, false, false}).loss);
  out.texture = TextureImage(fill_nearest(tex.texels(), known));
  out.covered_texels = covered;
  return out;
}

TemplateBundle build_template(const TriangleMesh& bust, const ViewSet& views, const TemplateConfig& cfg) {
  TemplateBundle b;
  b.fit_log = fit_depth_only(bust, views, cfg.fit);
  b.dense = b.fit_log.mesh;
  TextureRecoveryResult tr = recover_texture(b.dense, views, cfg.texture);
  b.texture_loss = std::move(tr.loss);
  b.texture = std::make_shared<const TextureImage>(std::move(tr.texture));
  b.dense.texture = b.texture;
  b.mesh = b.dense.vertex_count() > cfg.target_vertices ? decimate_preserve_uv(b.dense, cfg.target_vertices)
                                                        : b.dense;
  b.mesh.texture = b.texture;
  b.mask = cfg.mask ? cfg.mask : std::make_shared<const MaskImage>(MaskImage::ones(cfg.texture.size));
  if (b.mask->size() != b.texture->size()) {
    throw ConfigError(fmt::format("mask is {}x{} but the texture is {}x{}", b.mask->size(), b.mask->size(),
                                  b.texture->size(), b.texture->size()));
  }
  return b;
}

} // namespace meshalign

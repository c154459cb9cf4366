#include "meshalign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/parallel.hpp"
#include "meshalign/raster.hpp"

namespace meshalign {

namespace {

struct ViewProbe {
  std::vector<int> pixels;
  ImageD sign;
};

std::vector<int> stable_pixels(const FrameBuffer& fb, const ImageD* weight) {
  std::vector<char> band(fb.pixel_count(), 0);
  for (const SilhouetteEvent& e : fb.events) {
    band[e.inner] = 1;
    band[e.outer] = 1;
  }
  std::vector<int> out;
  const int w = fb.width();
  for (int y = 1; y + 1 < fb.height(); ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const int p = y * w + x;
      if (band[p] || !fb.covered(p) || (weight && weight->data()[p] == 0.0)) {
        continue;
      }
      bool same = true;
      for (int dy = -1; dy <= 1 && same; ++dy) {
        for (int dx = -1; dx <= 1 && same; ++dx) {
          same = fb.face[p + dy * w + dx] == fb.face[p];
        }
      }
      if (same) {
        out.push_back(p);
      }
    }
  }
  return out;
}

ImageD render(Constraint c, const FrameBuffer& fb, const TriangleMesh& mesh, const ViewSet& views,
              const ImageD* weight) {
  switch (c) {
    case Constraint::Color: {
      ColorOptions opts;
      opts.background = views.background;
      opts.pixel_mask = weight;
      return shade_color(fb, mesh, views.lighting, *mesh.texture, opts);
    }
    case Constraint::Depth: return render_depth(fb, mesh);
    case Constraint::Normal: return render_normal(fb, mesh);
  }
  return {};
}

const ImageD& target(Constraint c, const ViewSet& views, int j) {
  switch (c) {
    case Constraint::Color: return views.reference(j);
    case Constraint::Depth: return views.scan_depth(j);
    case Constraint::Normal: return views.scan_normal(j);
  }
  throw ConfigError("unknown constraint");
}

} // namespace

GradCheckReport grad_check(const TriangleMesh& mesh, const ViewSet& views, const GradCheckConfig& cfg,
                           const MaskImage* mask) {
  if (!(cfg.step_fraction > 0.0)) {
    throw ConfigError(fmt::format("finite-difference step must be positive, got {}", cfg.step_fraction));
  }
  if (!(cfg.tolerance > 0.0) || cfg.samples <= 0) {
    throw ConfigError("gradient check needs a positive tolerance and sample count");
  }
  const Constraint c = cfg.constraint;
  if (c == Constraint::Color && !mesh.texture) {
    throw ConfigError("color gradient check needs a textured mesh");
  }
  const MeshTopology topo = build_topology(mesh);
  const int nv = views.size();

  std::vector<ImageD> weights(nv);
  std::vector<ViewProbe> probes(nv);
  std::vector<Vec3> analytic(mesh.vertices.size(), Vec3::Zero());
  for (int j = 0; j < nv; ++j) {
    const FrameBuffer fb = rasterize(mesh, views.camera(j), {}, &topo);
    const ImageD* w = nullptr;
    if (c == Constraint::Color && mask) {
      weights[j] = render_mask(fb, mesh, *mask);
      w = &weights[j];
    }
    ViewProbe& probe = probes[j];
    probe.pixels = stable_pixels(fb, w);
    const ImageD img = render(c, fb, mesh, views, w);
    const ImageD& t = target(c, views, j);
    probe.sign = ImageD(img.width(), img.height(), img.channels());
    for (int p : probe.pixels) {
      for (int k = 0; k < img.channels(); ++k) {
        const double d = img.pixel(p)[k] - t.pixel(p)[k];
        probe.sign.pixel(p)[k] = static_cast<double>((d > 0.0) - (d < 0.0));
      }
    }
    Upstream up{nullptr, nullptr, nullptr};
    (c == Constraint::Color ? up.color : c == Constraint::Depth ? up.depth : up.normal) = &probe.sign;
    ColorOptions opts;
    opts.background = views.background;
    opts.pixel_mask = w;
    const ColorInputs ci{&views.lighting, mesh.texture.get(), opts};
    const RasterGradients g = backward(fb, mesh, up, c == Constraint::Color ? &ci : nullptr);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      analytic[i] += g.vertices[i];
    }
  }

  auto frozen_loss = [&](const TriangleMesh& m) {
    double s = 0.0;
    for (int j = 0; j < nv; ++j) {
      const FrameBuffer fb = rasterize(m, views.camera(j), {}, &topo);
      const ImageD img = render(c, fb, m, views, weights[j].empty() ? nullptr : &weights[j]);
      const ImageD& t = target(c, views, j);
      for (int p : probes[j].pixels) {
        for (int k = 0; k < img.channels(); ++k) {
          s += probes[j].sign.pixel(p)[k] * (img.pixel(p)[k] - t.pixel(p)[k]);
        }
      }
    }
    return s;
  };

  GradCheckReport rep;
  rep.constraint = c;
  rep.step = cfg.step_fraction * bounding_box_diagonal(mesh);
  for (const ViewProbe& p : probes) {
    rep.pixels += static_cast<int>(p.pixels.size());
  }
  std::vector<std::pair<int, int>> coords;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(analytic[v][k]) > cfg.min_gradient) {
        coords.emplace_back(v, k);
      }
    }
  }
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (static_cast<int>(coords.size()) > cfg.samples) {
    coords.resize(cfg.samples);
  }
  rep.coordinates.resize(coords.size());
  parallel_for(static_cast<int>(coords.size()), [&](int i) {
    const auto [v, k] = coords[i];
    TriangleMesh m = mesh;
    m.vertices[v][k] += rep.step;
    const double lp = frozen_loss(m);
    m.vertices[v][k] = mesh.vertices[v][k] - rep.step;
    const double lm = frozen_loss(m);
    CoordinateCheck& cc = rep.coordinates[i];
    cc.vertex = v;
    cc.axis = k;
    cc.analytic = analytic[v][k];
    cc.numeric = (lp - lm) / (2.0 * rep.step);
    cc.rel_error = std::abs(cc.analytic - cc.numeric) / std::max(std::abs(cc.analytic), std::abs(cc.numeric));
    cc.pass = cc.rel_error <= cfg.tolerance;
  });
  std::vector<double> errs;
  for (const CoordinateCheck& cc : rep.coordinates) {
    rep.passed += cc.pass;
    rep.max_rel_error = std::max(rep.max_rel_error, cc.rel_error);
    errs.push_back(cc.rel_error);
  }
  rep.tested = static_cast<int>(rep.coordinates.size());
  if (!errs.empty()) {
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    rep.median_rel_error = errs[errs.size() / 2];
  }

  if (c == Constraint::Color && mask) {
    rep.mask_checked = true;
    LossContext ctx;
    ctx.topology = &topo;
    ctx.texel_gradients = true;
    const LossResult base = color_loss(mesh, views, *mesh.texture, mask, ctx);
    ImageF texels = mesh.texture->texels();
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (std::size_t t = 0; t < texels.pixel_count(); ++t) {
      if (mask->texels().pixel(t)[0] == 0.0f) {
        for (int k = 0; k < 3; ++k) {
          rep.masked_texel_analytic_max =
              std::max(rep.masked_texel_analytic_max, std::abs(base.texel_grad.pixel(t)[k]));
          texels.pixel(t)[k] = u(rng);
        }
      }
    }
    const TextureImage perturbed(std::move(texels));
    const LossResult moved = color_loss(mesh, views, perturbed, mask, ctx);
    rep.masked_loss_change = std::abs(moved.loss - base.loss);
    for (std::size_t i = 0; i < base.grad.size(); ++i) {
      rep.masked_vertex_grad_change =
          std::max(rep.masked_vertex_grad_change, (moved.grad[i] - base.grad[i]).cwiseAbs().maxCoeff());
    }
  }
  return rep;
}

} // namespace meshalign

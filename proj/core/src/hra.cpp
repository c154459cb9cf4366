#include "meshalign/hra.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "meshalign/error.hpp"
#include "meshalign/parallel.hpp"

namespace meshalign {

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::Color: return "color";
    case Constraint::Depth: return "depth";
    case Constraint::Normal: return "normal";
  }
  return "unknown";
}

Constraint parse_constraint(const std::string& name) {
  if (name == "color") return Constraint::Color;
  if (name == "depth") return Constraint::Depth;
  if (name == "normal") return Constraint::Normal;
  throw ConfigError(fmt::format("unknown constraint '{}' (expected color, depth or normal)", name));
}

ViewSet::ViewSet(const ViewSet& other)
    : lighting(other.lighting),
      background(other.background),
      cameras_(other.cameras_),
      references_(other.references_),
      foregrounds_(other.foregrounds_),
      scan_depth_(other.scan_depth_),
      scan_normal_(other.scan_normal_),
      scan_(other.scan_) {}

ViewSet& ViewSet::operator=(const ViewSet& other) {
  if (this != &other) {
    lighting = other.lighting;
    background = other.background;
    cameras_ = other.cameras_;
    references_ = other.references_;
    foregrounds_ = other.foregrounds_;
    scan_depth_ = other.scan_depth_;
    scan_normal_ = other.scan_normal_;
    scan_ = other.scan_;
    reference_reads_.store(0);
  }
  return *this;
}

void ViewSet::add_view(const Camera& camera, ImageD reference, ImageD foreground) {
  camera.validate();
  if (reference.width() != camera.width || reference.height() != camera.height || reference.channels() != 3) {
    throw ConfigError(fmt::format("reference image is {}x{}x{} but camera expects {}x{}x3", reference.width(),
                                  reference.height(), reference.channels(), camera.width, camera.height));
  }
  if (foreground.empty()) {
    foreground = ImageD(camera.width, camera.height, 1, 1.0);
  }
  if (foreground.width() != camera.width || foreground.height() != camera.height || foreground.channels() != 1) {
    throw ConfigError("foreground mask must be one channel at the camera resolution");
  }
  cameras_.push_back(camera);
  references_.push_back(std::move(reference));
  foregrounds_.push_back(std::move(foreground));
  if (scan_) {
    set_scan(scan_);
  }
}

void ViewSet::set_scan(std::shared_ptr<const TriangleMesh> scan) {
  scan_ = std::move(scan);
  scan_depth_.assign(cameras_.size(), ImageD());
  scan_normal_.assign(cameras_.size(), ImageD());
  if (!scan_) {
    return;
  }
  const MeshTopology topo = build_topology(*scan_);
  parallel_for(size(), [&](int j) {
    const FrameBuffer fb = rasterize(*scan_, cameras_[j], {}, &topo);
    scan_depth_[j] = render_depth(fb, *scan_);
    scan_normal_[j] = render_normal(fb, *scan_);
  });
}

void ViewSet::set_scan_renders(std::shared_ptr<const TriangleMesh> scan, std::vector<ImageD> depth,
                               std::vector<ImageD> normal) {
  if (depth.size() != cameras_.size() || normal.size() != cameras_.size()) {
    throw ConfigError(fmt::format("cached scan renders cover {}/{} views, expected {}", depth.size(), normal.size(),
                                  cameras_.size()));
  }
  for (std::size_t j = 0; j < cameras_.size(); ++j) {
    const Camera& c = cameras_[j];
    if (depth[j].width() != c.width || depth[j].height() != c.height || depth[j].channels() != 1 ||
        normal[j].width() != c.width || normal[j].height() != c.height || normal[j].channels() != 3) {
      throw ConfigError(fmt::format("cached scan render of view {} does not match the camera", j));
    }
  }
  scan_ = std::move(scan);
  scan_depth_ = std::move(depth);
  scan_normal_ = std::move(normal);
}

const ImageD& ViewSet::reference(int j) const {
  reference_reads_.fetch_add(1);
  return references_.at(j);
}

const ImageD& ViewSet::scan_depth(int j) const {
  if (!scan_) {
    throw ConfigError("depth constraint needs a scan");
  }
  return scan_depth_.at(j);
}

const ImageD& ViewSet::scan_normal(int j) const {
  if (!scan_) {
    throw ConfigError("normal constraint needs a scan");
  }
  return scan_normal_.at(j);
}

ViewSet render_reference_views(const TriangleMesh& scan, const std::vector<Camera>& cameras, const SHLighting& light,
                               const Vec3& background) {
  if (!scan.texture) {
    throw ConfigError("reference rendering needs a textured scan");
  }
  ViewSet vs;
  vs.lighting = light;
  vs.background = background;
  const MeshTopology topo = build_topology(scan);
  std::vector<ImageD> colors(cameras.size());
  std::vector<ImageD> fgs(cameras.size());
  parallel_for(static_cast<int>(cameras.size()), [&](int j) {
    const FrameBuffer fb = rasterize(scan, cameras[j], {}, &topo);
    ColorOptions opts;
    opts.background = background;
    colors[j] = shade_color(fb, scan, light, *scan.texture, opts);
    fgs[j] = ImageD(fb.width(), fb.height(), 1);
    for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
      fgs[j].data()[p] = fb.covered(p) ? 1.0 : 0.0;
    }
  });
  for (std::size_t j = 0; j < cameras.size(); ++j) {
    vs.add_view(cameras[j], std::move(colors[j]), std::move(fgs[j]));
  }
  vs.set_scan(std::make_shared<const TriangleMesh>(scan));
  return vs;
}

void HraConfig::validate() const {
  if (rotation.empty()) {
    throw ConfigError("at least one constraint must be active");
  }
  std::array<int, 3> seen{};
  for (Constraint c : rotation) {
    if (++seen[static_cast<int>(c)] > 1) {
      throw ConfigError(fmt::format("constraint '{}' appears twice in the rotation", to_string(c)));
    }
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("constraint weights must be finite and non-negative");
    }
  }
}

namespace {

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

struct ViewResult {
  double loss = 0.0;
  RasterGradients grads;
};

template <typename PerView>
LossResult accumulate(const TriangleMesh& mesh, const ViewSet& views, Constraint c, bool texels, PerView&& fn) {
  std::vector<ViewResult> per(views.size());
  parallel_for(views.size(), [&](int j) { per[j] = fn(j); });
  LossResult out;
  out.constraint = c;
  out.grad.assign(mesh.vertices.size(), Vec3::Zero());
  for (const ViewResult& r : per) {
    out.loss += r.loss;
    for (std::size_t i = 0; i < r.grads.vertices.size(); ++i) {
      out.grad[i] += r.grads.vertices[i];
    }
    if (texels && !r.grads.texels.empty()) {
      if (out.texel_grad.empty()) {
        out.texel_grad = r.grads.texels;
      } else {
        for (std::size_t i = 0; i < out.texel_grad.data().size(); ++i) {
          out.texel_grad.data()[i] += r.grads.texels.data()[i];
        }
      }
    }
  }
  return out;
}

void check_view_shape(const ImageD& a, const ImageD& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ConfigError(fmt::format("{} image is {}x{}x{} but the render is {}x{}x{}", what, b.width(), b.height(),
                                  b.channels(), a.width(), a.height(), a.channels()));
  }
}

} // namespace

LossResult color_loss(const TriangleMesh& mesh, const ViewSet& views, const TextureImage& albedo,
                      const MaskImage* mask, const LossContext& ctx) {
  if (!mesh.has_uvs()) {
    throw ConfigError("color loss needs a textured mesh");
  }
  return accumulate(mesh, views, Constraint::Color, ctx.texel_gradients, [&](int j) {
    ViewResult r;
    const FrameBuffer fb = rasterize(mesh, views.camera(j), {}, ctx.topology);
    const ImageD m = mask ? render_mask(fb, mesh, *mask) : ImageD(fb.width(), fb.height(), 1, 1.0);
    ColorOptions opts;
    opts.background = views.background;
    opts.pixel_mask = &m;
    const ImageD img = shade_color(fb, mesh, views.lighting, albedo, opts);
    const ImageD& ref = views.reference(j);
    check_view_shape(img, ref, "reference");
    const ImageD& fg = views.foreground(j);
    // Blend-band pixels next to masked fragments carry masked color in the
    // reference, so they are dropped from the loss as well.
    ImageD weight = m;
    for (const SilhouetteEvent& e : fb.events) {
      if (m.data()[e.inner] == 0.0 || m.data()[e.outer] == 0.0) {
        weight.data()[e.inner] = 0.0;
        weight.data()[e.outer] = 0.0;
      }
    }
    // Counted pixels: rendered coverage, blend-band targets, reference foreground.
    std::vector<char> counted(fb.pixel_count(), 0);
    for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
      counted[p] = fb.covered(p) || fg.data()[p] > 0.5;
    }
    for (const SilhouetteEvent& e : fb.events) {
      counted[e.target()] = 1;
    }
    ImageD up(fb.width(), fb.height(), 3);
    for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
      const double w = weight.data()[p];
      if (!counted[p] || w == 0.0) {
        continue;
      }
      for (int c = 0; c < 3; ++c) {
        const double d = (img.pixel(p)[c] - ref.pixel(p)[c]) * w;
        r.loss += std::abs(d);
        up.pixel(p)[c] = sign(d) * w;
      }
    }
    if (ctx.vertex_gradients || ctx.texel_gradients) {
      const ColorInputs ci{&views.lighting, &albedo, opts};
      r.grads = backward(fb, mesh, {&up, nullptr, nullptr}, &ci, ctx.texel_gradients);
    }
    return r;
  });
}

LossResult depth_loss(const TriangleMesh& mesh, const ViewSet& views, const LossContext& ctx) {
  return accumulate(mesh, views, Constraint::Depth, false, [&](int j) {
    ViewResult r;
    const FrameBuffer fb = rasterize(mesh, views.camera(j), {}, ctx.topology);
    const ImageD img = render_depth(fb, mesh);
    const ImageD& target = views.scan_depth(j);
    check_view_shape(img, target, "scan depth");
    ImageD up(fb.width(), fb.height(), 1);
    for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
      const double d = img.data()[p] - target.data()[p];
      r.loss += std::abs(d);
      up.data()[p] = sign(d);
    }
    if (ctx.vertex_gradients) {
      r.grads = backward(fb, mesh, {nullptr, &up, nullptr});
    }
    return r;
  });
}

LossResult normal_loss(const TriangleMesh& mesh, const ViewSet& views, const LossContext& ctx) {
  return accumulate(mesh, views, Constraint::Normal, false, [&](int j) {
    ViewResult r;
    const FrameBuffer fb = rasterize(mesh, views.camera(j), {}, ctx.topology);
    const ImageD img = render_normal(fb, mesh);
    const ImageD& target = views.scan_normal(j);
    check_view_shape(img, target, "scan normal");
    ImageD up(fb.width(), fb.height(), 3);
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      const double d = img.data()[i] - target.data()[i];
      r.loss += std::abs(d);
      up.data()[i] = sign(d);
    }
    if (ctx.vertex_gradients) {
      r.grads = backward(fb, mesh, {nullptr, nullptr, &up});
    }
    return r;
  });
}

Constraint scheduled_constraint(const HraConfig& cfg, int iteration) {
  if (cfg.rotation.empty()) {
    throw ConfigError("at least one constraint must be active");
  }
  const int n = static_cast<int>(cfg.rotation.size());
  return cfg.rotation[((iteration % n) + n) % n];
}

LossResult constraint_loss(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& cfg, Constraint c,
                           const LossContext& ctx) {
  LossResult r;
  switch (c) {
    case Constraint::Color:
      if (!mesh.texture) {
        throw ConfigError("color constraint needs a mesh texture");
      }
      r = color_loss(mesh, views, *mesh.texture, cfg.mask.get(), ctx);
      break;
    case Constraint::Depth: r = depth_loss(mesh, views, ctx); break;
    case Constraint::Normal: r = normal_loss(mesh, views, ctx); break;
  }
  const double w = cfg.weights[static_cast<int>(c)];
  if (w != 1.0) {
    r.loss *= w;
    for (Vec3& g : r.grad) {
      g *= w;
    }
    for (double& t : r.texel_grad.storage()) {
      t *= w;
    }
  }
  return r;
}

LossResult hra_step_loss(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& cfg, int iteration,
                         const LossContext& ctx) {
  return constraint_loss(mesh, views, cfg, scheduled_constraint(cfg, iteration), ctx);
}

LossResult hra_total_loss(const TriangleMesh& mesh, const ViewSet& views, const HraConfig& cfg,
                          const LossContext& ctx) {
  cfg.validate();
  LossResult total;
  total.grad.assign(mesh.vertices.size(), Vec3::Zero());
  for (Constraint c : cfg.rotation) {
    const LossResult r = constraint_loss(mesh, views, cfg, c, ctx);
    total.loss += r.loss;
    for (std::size_t i = 0; i < total.grad.size(); ++i) {
      total.grad[i] += r.grad[i];
    }
  }
  total.constraint = cfg.rotation.front();
  return total;
}

} // namespace meshalign

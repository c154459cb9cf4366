#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "meshalign/hra.hpp"
#include "meshalign/laplacian.hpp"
#include "meshalign/metrics.hpp"
#include "meshalign/optim.hpp"
#include "meshalign/parallel.hpp"
#include "meshalign/raster.hpp"
#include "meshalign/synthetic.hpp"

using namespace meshalign;

namespace {

const TriangleMesh& head() {
  static const TriangleMesh mesh = [] {
    BlobHeadParams p;
    p.rings = 64;
    p.segments = 80;
    p.texture_size = 256;
    return make_blob_head(p, preset_expression(0));
  }();
  return mesh;
}

void BM_RasterizeShade(benchmark::State& state) {
  set_thread_count(1);
  const int size = static_cast<int>(state.range(0));
  const Camera cam = head_cameras(1, size)[0];
  const SHLighting light = head_lighting();
  for (auto _ : state) {
    const FrameBuffer fb = rasterize(head(), cam);
    benchmark::DoNotOptimize(shade_color(fb, head(), light, *head().texture));
  }
}
BENCHMARK(BM_RasterizeShade)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ColorLossGradient(benchmark::State& state) {
  set_thread_count(1);
  const ViewSet views = render_reference_views(head(), head_cameras(6, 256), head_lighting());
  TriangleMesh m = head();
  m.vertices[0] += Vec3(0.001, 0.0, 0.0);
  const MeshTopology topo = build_topology(m);
  LossContext ctx;
  ctx.topology = &topo;
  for (auto _ : state) {
    benchmark::DoNotOptimize(color_loss(m, views, *m.texture, nullptr, ctx));
  }
}
BENCHMARK(BM_ColorLossGradient)->Unit(benchmark::kMillisecond);

void BM_PrecondFactorSolve(benchmark::State& state) {
  const SparseLaplacian l = cotangent_laplacian(head());
  const RowMatrixX3d g = RowMatrixX3d::Random(head().vertex_count(), 3);
  for (auto _ : state) {
    const LaplacianPrecond p(l, 200.0);
    benchmark::DoNotOptimize(p.solve(p.solve(g)));
  }
  state.counters["vertices"] = head().vertex_count();
}
BENCHMARK(BM_PrecondFactorSolve)->Unit(benchmark::kMillisecond);

void BM_PointToMesh(benchmark::State& state) {
  const MeshDistance d(head());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(d.distance(Vec3(u(rng), u(rng), u(rng))));
  }
}
BENCHMARK(BM_PointToMesh);

} // namespace

BENCHMARK_MAIN();

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "nex/export.hpp"
#include "nex/render.hpp"
#include "nex/synth.hpp"

using namespace nex;

namespace {

const SceneDataset& scene() {
  static const SceneDataset ds = [] {
    SynthOptions o;
    o.kind = SceneKind::specular;
    o.views = 4;
    return generate_scene(o);
  }();
  return ds;
}

const MpiModel& model() {
  static const MpiModel m = [] {
    ModelOptions o;
    o.planes = 8;
    o.sharing = 4;
    o.shape = {64, 3, 32, 2};
    o.margin = 4;
    return make_model(scene().reference(), scene().near, scene().far, o);
  }();
  return m;
}

Camera side_view() {
  Camera c = scene().reference();
  c.center += Eigen::Vector3d(0.05, -0.02, 0.0);
  return c;
}

void BM_RenderSerial(benchmark::State& state) {
  const Camera cam = side_view();
  for (auto _ : state) benchmark::DoNotOptimize(render_image_serial(model(), cam));
  state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}
BENCHMARK(BM_RenderSerial)->Unit(benchmark::kMillisecond);

void BM_RenderParallel(benchmark::State& state) {
  const Camera cam = side_view();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(render_image(model(), cam, workers));
  state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}
BENCHMARK(BM_RenderParallel)->Arg(0)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Composite(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  const int d = static_cast<int>(state.range(0));
  std::vector<double> a(d);
  std::vector<Rgb> c(d);
  for (int i = 0; i < d; ++i) {
    a[i] = u(rng);
    c[i] = {u(rng), u(rng), u(rng)};
  }
  for (auto _ : state) benchmark::DoNotOptimize(composite(a, c));
}
BENCHMARK(BM_Composite)->Arg(8)->Arg(32)->Arg(192);

void BM_RayEvaluatorBackward(benchmark::State& state) {
  const Camera cam = side_view();
  const int workers = static_cast<int>(state.range(0));
  std::vector<Eigen::Vector2d> px;
  for (int i = 0; i < 256; ++i) px.emplace_back(0.5 + (i * 7) % cam.width, 0.5 + (i * 5) % cam.height);
  const std::vector<Rgb> grad(px.size(), Rgb(0.1, -0.2, 0.3));
  for (auto _ : state) {
    const RayEvaluator ev(model(), cam, px, {}, workers);
    ModelGradient g = ModelGradient::zeros_like(model());
    ev.backward(grad, g, workers);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(px.size()));
}
BENCHMARK(BM_RayEvaluatorBackward)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_RenderBaked(benchmark::State& state) {
  const BakedMpi b = bake(model());
  const Camera cam = side_view();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(render_baked(b, cam, workers));
  state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}
BENCHMARK(BM_RenderBaked)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "autr/metrics.hpp"
#include "autr/model.hpp"
#include "autr/objective.hpp"
#include "autr/ops.hpp"
#include "autr/transformer.hpp"

namespace {

using namespace autr;

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-1, 1);
  return t;
}

TrainScene random_scene(const ModelDims& d, uint64_t seed) {
  Rng rng(seed);
  TrainScene sc;
  sc.video.frames =
      random_tensor({d.frames, 3, d.image_size, d.image_size}, rng);
  sc.audio.spectrograms =
      random_tensor({d.frames, d.audio_size, d.audio_size}, rng);
  sc.gt.mask = Tensor::zeros({d.frames, d.image_size, d.image_size});
  for (auto& v : sc.gt.mask.data()) v = rng.uniform(0, 1) < 0.3 ? 1.0 : 0.0;
  sc.gt.present.assign(d.frames, true);
  return sc;
}

void BM_Matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(1);
  NoGradGuard no_grad;
  Tensor a = random_tensor({n, n}, rng);
  Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_Attention(benchmark::State& state) {
  const int64_t tokens = state.range(0);
  ModelDims d;
  Rng rng(2);
  ParamStore p;
  init_encoder(p, d, rng);
  NoGradGuard no_grad;
  Tensor x = random_tensor({d.frames, tokens, d.fusion_dim}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        multi_head_attention(x, x, x, p, "enc.layer0.attn", d.heads));
  }
}
BENCHMARK(BM_Attention)->Arg(84)->Arg(336);

void BM_ModelForward(benchmark::State& state) {
  ModelDims d;
  Model model(d, 3);
  TrainScene sc = random_scene(d, 4);
  NoGradGuard no_grad;
  for (auto _ : state)
    benchmark::DoNotOptimize(model.forward(sc.video, sc.audio));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  ModelDims d;
  Model model(d, 5);
  TrainScene sc = random_scene(d, 6);
  AdamW::Options o;
  o.lr = 1e-4;
  AdamW opt(o);
  TrainStepOptions step;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        training_step(model, sc.video, sc.audio, sc.gt, step, opt));
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  autr::set_compute_threads(4);
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}

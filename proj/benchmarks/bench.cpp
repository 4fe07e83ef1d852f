// Microbenchmarks for the hot paths: forward evaluation, reverse-mode
// gradients, and the attack loops that stack them.

#include <benchmark/benchmark.h>

#include "advpc/attack.hpp"
#include "advpc/augment.hpp"
#include "advpc/dataset.hpp"
#include "advpc/model_zoo.hpp"

namespace {

using namespace advpc;

Classifier probe_model(Architecture arch) {
  ModelSpec spec;
  spec.architecture = arch;
  Checkpoint cp;
  cp.spec = spec;
  cp.params = init_params(spec);
  return make_classifier(cp);
}

const Example& probe_example() {
  static const Dataset ds = make_synthetic_dataset(1, 1);
  return ds.examples[0];
}

void BM_ForwardLogits(benchmark::State& state, Architecture arch) {
  const Classifier m = probe_model(arch);
  const Example& ex = probe_example();
  for (auto _ : state) benchmark::DoNotOptimize(logits_of(m, ex.image));
}

void BM_InputGradient(benchmark::State& state, Architecture arch) {
  const Classifier m = probe_model(arch);
  const Example& ex = probe_example();
  for (auto _ : state)
    benchmark::DoNotOptimize(plain_gradient(m, ex.image, ex.label));
}

void BM_Attack(benchmark::State& state, const char* id_text) {
  const Classifier m = probe_model(Architecture::CnnSmall);
  const Example& ex = probe_example();
  const AttackId id = AttackId::parse(id_text);
  AttackConfig cfg;
  cfg.iterations = 10;
  cfg.predictions = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_attack(id, m, ex.image, ex.label, cfg));
}

void BM_SmoothGradient(benchmark::State& state) {
  const Classifier m = probe_model(Architecture::CnnSmall);
  const Example& ex = probe_example();
  const Tensor g = plain_gradient(m, ex.image, ex.label);
  const Tensor k = gaussian_kernel(7, 7.0 / 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(smooth_gradient(g, k));
}

BENCHMARK_CAPTURE(BM_ForwardLogits, mlp2, Architecture::Mlp2);
BENCHMARK_CAPTURE(BM_ForwardLogits, cnn_small, Architecture::CnnSmall);
BENCHMARK_CAPTURE(BM_InputGradient, mlp2, Architecture::Mlp2);
BENCHMARK_CAPTURE(BM_InputGradient, cnn_small, Architecture::CnnSmall);
BENCHMARK_CAPTURE(BM_Attack, fgsm, "fgsm");
BENCHMARK_CAPTURE(BM_Attack, i_fgsm, "i-fgsm");
BENCHMARK_CAPTURE(BM_Attack, pc_i_fgsm, "pc-i-fgsm");
BENCHMARK_CAPTURE(BM_Attack, si_ti_di_mi_fgsm, "si-ti-di-mi-fgsm");
BENCHMARK(BM_SmoothGradient);

}  // namespace

BENCHMARK_MAIN();

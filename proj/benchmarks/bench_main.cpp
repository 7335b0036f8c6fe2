#include <benchmark/benchmark.h>

#include <random>

#include "gcgpn/eval.hpp"
#include "gcgpn/matrix.hpp"
#include "gcgpn/model.hpp"
#include "gcgpn/presets.hpp"

namespace {

using namespace gcgpn;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

const Dataset& benchmark_data() {
  static const Dataset ds = generate_synthetic(SyntheticSpec{});
  return ds;
}

void BM_Product(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(product(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Product)->Arg(32)->Arg(69)->Arg(128);

void BM_ForwardBackward(benchmark::State& state, const char* preset) {
  const Dataset& ds = benchmark_data();
  Model m = make_model(apply_preset(preset, {}), ds, 1);
  const Episode ep = sample_train_episode(ds, {5, 1, 6, 1}, 3);
  for (auto _ : state) {
    Tape t;
    const ForwardResult f = forward_episode(m, ep, t);
    t.backward(f.loss);
    for (Parameter* p : m.parameters()) p->zero_grad();
  }
}
BENCHMARK_CAPTURE(BM_ForwardBackward, pn_plus, "pn_plus");
BENCHMARK_CAPTURE(BM_ForwardBackward, gcgpn_aux, "gcgpn-aux");
BENCHMARK_CAPTURE(BM_ForwardBackward, gcgpn_aux_split, "gcgpn-aux-split");
BENCHMARK_CAPTURE(BM_ForwardBackward, dfsl_att, "dfsl_att");

void BM_Evaluate(benchmark::State& state) {
  const Dataset& ds = benchmark_data();
  const Model m = make_model(apply_preset("gcgpn-aux", {}), ds, 1);
  EvalConfig cfg;
  cfg.n_episodes = 100;
  cfg.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(m, ds, cfg));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Evaluate)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

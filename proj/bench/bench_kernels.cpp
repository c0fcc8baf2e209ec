// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "archspace/dsl.hpp"
#include "archspace/evaluators.hpp"
#include "archspace/hashing.hpp"
#include "archspace/kernels.hpp"
#include "archspace/traversal.hpp"

using namespace archspace;

namespace {

const char* kSpace = R"((Concat
  (Conv2D [16, 32, 48, 64] [1, 3, 5] [1])
  (MaybeSwap BatchNormalization ReLU)
  (Optional (Dropout [0.5, 0.7, 0.9]))
  (Repeat (Concat (Conv2D [32, 64] [3] [1]) (Optional ReLU)) [1, 2, 3])
  (Affine [10, 64])))";

const Shape kShape({16, 16, 3});

kernels::DenseMatrix random_matrix(std::size_t rows, std::size_t cols) {
  kernels::DenseMatrix x{rows, cols, std::vector<double>(rows * cols)};
  Rng rng(1);
  for (auto& v : x.data) v = uniform01(rng);
  return x;
}

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = splitmix64(i);
  return out;
}

SurrogateModel model() {
  SurrogateModel m;
  m.weights = {{"(Conv2D)", 0.2}, {"(Dropout)", 0.4}, {"(Conv2D,ReLU)", -0.1}, {"(BIAS)", 0.3}};
  return m;
}

std::vector<GraphIR> graphs(std::size_t n) {
  const SpaceExpr s = parse(kSpace);
  std::vector<GraphIR> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(compile(s, kShape, sample_uniform(s, kShape, i)));
  return out;
}

template <bool Parallel>
void BM_Gram(benchmark::State& state) {
  const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? kernels::gram(x) : kernels::gram_serial(x));
}

template <bool Parallel>
void BM_ScoreCandidates(benchmark::State& state) {
  const SpaceExpr s = parse(kSpace);
  RawTraversal root(s, kShape);
  const auto sd = seeds(static_cast<std::size_t>(state.range(0)));
  const auto m = model();
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::score_candidates(root, sd, m, 3)
                                      : kernels::score_candidates_serial(root, sd, m, 3));
}

template <bool Parallel>
void BM_EvaluateBatch(benchmark::State& state) {
  const auto g = graphs(static_cast<std::size_t>(state.range(0)));
  LinearNgramEvaluator ev(7, 0.05);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::evaluate_batch(ev, g) : kernels::evaluate_batch_serial(ev, g));
}

}  // namespace

BENCHMARK(BM_Gram<false>)->Args({512, 64})->Args({2048, 256})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gram<true>)->Args({512, 64})->Args({2048, 256})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreCandidates<false>)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreCandidates<true>)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateBatch<false>)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateBatch<true>)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

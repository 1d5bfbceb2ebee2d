#include <benchmark/benchmark.h>

#include "ckl/few_shot.hpp"
#include "ckl/mask.hpp"
#include "ckl/wl_kernel.hpp"

namespace {

ckl::Dataset bench_dataset(std::size_t n_per_class) {
  return ckl::generate_planted_motif_dataset({ckl::MotifKind::triangle, 20, 0.1, 0.0},
                                             {ckl::MotifKind::star, 20, 0.1, 0.0}, n_per_class, 42);
}

void BM_KernelMatrix(benchmark::State& state) {
  const ckl::Dataset ds = bench_dataset(static_cast<std::size_t>(state.range(0)));
  ckl::wl::LabelDictionary dict;
  const auto corpus = ckl::wl::label_corpus(ds.graphs, 3, dict);
  for (auto _ : state) benchmark::DoNotOptimize(ckl::wl::kernel_matrix(corpus, corpus, 3, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus.size() * corpus.size()));
}
BENCHMARK(BM_KernelMatrix)->Arg(25)->Arg(100);

void BM_WlRelabel(benchmark::State& state) {
  const ckl::Dataset ds = bench_dataset(100);
  for (auto _ : state) {
    ckl::wl::LabelDictionary dict;
    benchmark::DoNotOptimize(ckl::wl::label_corpus(ds.graphs, 3, dict));
  }
}
BENCHMARK(BM_WlRelabel);

void BM_GinForwardBackward(benchmark::State& state) {
  const ckl::Dataset ds = bench_dataset(1);
  ckl::Rng rng(1);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto model = ckl::gnn::GraphClassifier::init(2, hidden, 3, 2, rng);
  for (auto _ : state) {
    ckl::ad::Tape tape;
    const auto loss = ckl::gnn::cross_entropy(ckl::gnn::predict(tape, ds.graphs[0], model), 1);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_GinForwardBackward)->Arg(16)->Arg(128);

void BM_MaskObjective(benchmark::State& state) {
  const ckl::Dataset ds = bench_dataset(1);
  ckl::Rng rng(2);
  const auto model = ckl::gnn::GraphClassifier::init(2, 16, 3, 2, rng);
  const auto mp = ckl::mask::MaskParams::init(16, 16, 1.0, rng);
  const auto noise = ckl::mask::draw_noise(ds.graphs[0], static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    ckl::ad::Tape tape;
    const auto loss = ckl::mask::ckl_objective(tape, ds.graphs[0], model, mp, noise);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_MaskObjective)->Arg(1)->Arg(4);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "gseg/dataset.hpp"
#include "gseg/graph_relation.hpp"
#include "gseg/ops.hpp"
#include "gseg/rng.hpp"
#include "gseg/segmenter.hpp"

namespace {

using namespace gseg;

// Relation built once per (K, D, 1/c); only the propagation is timed.
RelationMatrix masked_relation(const Tensor& x, double c) {
  const RelationMatrix rel = relation_softmax(x);
  return sparsify(rel, make_theta(rel.values, c));
}

template <bool Sparse>
void BM_NodeUpdate(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const auto D = static_cast<std::size_t>(state.range(1));
  const double c = 1.0 / static_cast<double>(state.range(2));
  Rng rng(K * 31 + D);
  const Tensor x = uniform_tensor({K, D}, -1.0, 1.0, rng);
  const RelationMatrix rel = masked_relation(x, c);
  for (auto _ : state) {
    Tensor out = Sparse ? node_update_sparse(rel, x) : node_update_dense(rel, x);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.counters["kept_edges"] = static_cast<double>(rel.kept_edges());
}

void node_update_args(benchmark::internal::Benchmark* b) {
  for (int K : {4, 16, 64})
    for (int D : {8, 32})
      for (int inv_c : {1, 4}) b->Args({K, D, inv_c});
}

BENCHMARK(BM_NodeUpdate<false>)->Name("node_update/dense")->Apply(node_update_args);
BENCHMARK(BM_NodeUpdate<true>)->Name("node_update/sparse")->Apply(node_update_args);

void BM_Conv2d(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  const Tensor x = uniform_tensor({16, 16, 16}, -1.0, 1.0, rng);
  const Tensor w = uniform_tensor({16, 16, k, k}, -0.1, 0.1, rng);
  for (auto _ : state) {
    Tensor y = conv2d(x, w);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2d)->Arg(1)->Arg(3)->Arg(7);

void BM_SegmenterForwardBackward(benchmark::State& state) {
  SegmenterConfig config;
  config.enable_gt = state.range(0) != 0;
  config.enable_ba = state.range(0) != 0;
  Segmenter model(config);
  const Dataset data = synth_dataset(DatasetKind::blobs, 1, config.height, config.width, config.num_classes, 1);
  for (auto _ : state) {
    Tensor loss = cross_entropy(model.forward(data[0].image), data[0].labels.values);
    loss.backward();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_SegmenterForwardBackward)->Arg(0)->Arg(1)->ArgName("gt_ba");

}  // namespace

BENCHMARK_MAIN();

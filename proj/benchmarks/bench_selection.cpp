#include <benchmark/benchmark.h>

#include "fads/selectors.hpp"
#include "fads/synthetic.hpp"
#include "fads/vectorspace.hpp"

namespace {

fads::SyntheticData corpus(std::size_t n) {
  fads::SyntheticSpec spec;
  spec.attributes = {{"gender", {"Male", "Female"}, {0.7, 0.3}},
                     {"race", {"White", "Black", "Asian"}, {0.6, 0.25, 0.15}}};
  spec.pool_size = n;
  spec.query_count = 64;
  spec.dim = 64;
  spec.leakage = 0.5;
  return fads::generate_synthetic(spec);
}

void BM_KMeans(benchmark::State& state) {
  const auto d = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fads::kmeans(d.pool.embeddings(), 64, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KMeans)->Arg(2000)->Arg(7000)->Unit(benchmark::kMillisecond);

void BM_TopKSimilar(benchmark::State& state) {
  const auto d = corpus(static_cast<std::size_t>(state.range(0)));
  const auto& ids = d.pool.embeddings().ids();
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fads::top_k_similar(d.queries.embedding(q), ids, d.pool.embeddings(), 8));
    q = (q + 1) % d.queries.queries.size();
  }
}
BENCHMARK(BM_TopKSimilar)->Arg(2000)->Arg(7000);

void BM_SelectFads(benchmark::State& state) {
  const auto d = corpus(7000);
  const auto model = fads::cluster_pool(d.pool, 64, 1);
  std::size_t q = 0;
  for (auto _ : state) {
    fads::SelectionRequest req;
    req.query_id = d.queries.queries[q].id;
    req.query_embedding = d.queries.embedding(q);
    req.shots = static_cast<std::size_t>(state.range(0));
    req.stratify_attribute = "gender";
    benchmark::DoNotOptimize(fads::select_fads(d.pool, model, req));
    q = (q + 1) % d.queries.queries.size();
  }
}
BENCHMARK(BM_SelectFads)->Arg(8)->Arg(16);

void BM_SelectInteraction(benchmark::State& state) {
  const auto d = corpus(7000);
  const auto model = fads::cluster_pool(d.pool, 64, 1);
  std::size_t q = 0;
  for (auto _ : state) {
    fads::SelectionRequest req;
    req.query_id = d.queries.queries[q].id;
    req.query_embedding = d.queries.embedding(q);
    req.shots = 16;
    req.stratify_attribute = "gender";
    benchmark::DoNotOptimize(fads::select_fads_interaction(d.pool, model, req));
    q = (q + 1) % d.queries.queries.size();
  }
}
BENCHMARK(BM_SelectInteraction);

}  // namespace
BENCHMARK_MAIN();

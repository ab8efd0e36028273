#include <benchmark/benchmark.h>

#include <random>

#include "scentrank/bm25.hpp"
#include "scentrank/reranker.hpp"
#include "support/fixtures.hpp"

namespace sr = scentrank;

static void BM_BuildIndex(benchmark::State& state) {
    std::mt19937_64 rng(1);
    auto corpus = sr::testing::make_random_corpus(rng, static_cast<std::size_t>(state.range(0)), 5000, 80, 140);
    for (auto _ : state) benchmark::DoNotOptimize(sr::build_index(corpus));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildIndex)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_Retrieve(benchmark::State& state) {
    std::mt19937_64 rng(2);
    auto corpus = sr::testing::make_random_corpus(rng, static_cast<std::size_t>(state.range(0)), 5000, 80, 140);
    auto index = sr::build_index(corpus);
    std::vector<std::string> queries;
    for (int i = 0; i < 64; ++i) queries.push_back(sr::testing::make_random_query(rng, 5000, 6));
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sr::retrieve(index, queries[i++ % queries.size()], 1000));
}
BENCHMARK(BM_Retrieve)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

static void BM_RerankUnigram(benchmark::State& state) {
    std::mt19937_64 rng(3);
    auto n = static_cast<std::size_t>(state.range(0));
    auto corpus = sr::testing::make_random_corpus(rng, n, 5000, 80, 140);
    std::vector<sr::Candidate> cands;
    for (std::size_t i = 0; i < n; ++i) cands.push_back({&corpus.passages()[i], static_cast<int>(i + 1), 0.0});
    sr::AnswerScent scent{"q", sr::testing::make_random_query(rng, 5000, 40), "m", "", "d"};
    sr::UnigramBackend uni;
    sr::RerankOptions options;
    options.parallelism = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(sr::rerank(uni, "q", "w1 w2 w3", &scent, cands, {}, options));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RerankUnigram)->Args({100, 1})->Args({1000, 1})->Args({1000, 4})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

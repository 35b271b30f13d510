// Serial reference splitter vs the OpenMP kernel on simulated data.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "countthin/simgen.hpp"
#include "countthin/thinning.hpp"

using namespace countthin;

namespace {

const CountMatrix& data(std::size_t n, Layout layout) {
    static const CountMatrix small = generate_dataset(500, 1000, 3, 1.5, 1.0, 1).counts;
    static const CountMatrix large = generate_dataset(2000, 2000, 3, 1.5, 1.0, 2).counts;
    static const CountMatrix small_sparse = small.to_sparse();
    static const CountMatrix large_sparse = large.to_sparse();
    if (layout == Layout::Sparse) {
        return n == 500 ? small_sparse : large_sparse;
    }
    return n == 500 ? small : large;
}

ThinPlan plan(bool poisson) {
    return poisson ? ThinPlan::equal(2) : ThinPlan::equal(2, {2.0});
}

void BM_SplitSerial(benchmark::State& state) {
    const auto& x = data(static_cast<std::size_t>(state.range(0)), state.range(1) ? Layout::Sparse : Layout::Dense);
    const ThinPlan p = plan(state.range(2) != 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(reference::nb_count_split(x, p, 7));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.stored()));
}

void BM_SplitParallel(benchmark::State& state) {
    const auto& x = data(static_cast<std::size_t>(state.range(0)), state.range(1) ? Layout::Sparse : Layout::Dense);
    const ThinPlan p = plan(state.range(2) != 0);
    state.counters["threads"] = omp_get_max_threads();
    for (auto _ : state) {
        benchmark::DoNotOptimize(nb_count_split(x, p, 7));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.stored()));
}

// Args: cells, sparse layout, multinomial path.
void split_args(benchmark::internal::Benchmark* b) {
    b->ArgNames({"n", "sparse", "poisson"});
    for (int n : {500, 2000}) {
        for (int sparse : {0, 1}) {
            for (int poisson : {0, 1}) {
                b->Args({n, sparse, poisson});
            }
        }
    }
    b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_SplitSerial)->Apply(split_args);
BENCHMARK(BM_SplitParallel)->Apply(split_args)->UseRealTime();

BENCHMARK_MAIN();

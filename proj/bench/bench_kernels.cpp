// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "dimrank/kernels.hpp"
#include "dimrank/rng.hpp"

using namespace dimrank;

namespace {

struct Fixture {
    ModelWeights weights;
    std::vector<std::vector<float>> vecs;
    std::vector<std::span<const float>> rows;
    std::vector<float> query;
    ContextFeatures context = featurize_context(0, SessionKind::browse);

    static ModelWeights make_weights() {
        Rng rng(1);
        return ModelWeights::random(ModelDims{}, rng);
    }

    explicit Fixture(std::size_t count) : weights(make_weights()) {
        Rng rng(2);
        const std::size_t dim = weights.dims.user_dim;
        vecs.resize(count, std::vector<float>(dim));
        for (auto& v : vecs) {
            for (auto& x : v) x = static_cast<float>(rng.uniform(-0.2, 0.2));
        }
        rows.assign(vecs.begin(), vecs.end());
        query.resize(dim);
        for (auto& x : query) x = static_cast<float>(rng.uniform(-0.2, 0.2));
    }
};

template <auto Kernel>
void bm_score_users(benchmark::State& st) {
    Fixture f(static_cast<std::size_t>(st.range(0)));
    std::vector<float> out(f.rows.size());
    for (auto _ : st) {
        Kernel(f.weights, f.query, f.context, f.rows, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Kernel>
void bm_cosine_top_k(benchmark::State& st) {
    Fixture f(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(Kernel(f.query, f.rows, 200));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(bm_score_users<kernels::score_users_serial>)->Name("score_users/serial")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_score_users<kernels::score_users_parallel>)->Name("score_users/parallel")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_cosine_top_k<kernels::cosine_top_k_serial>)->Name("cosine_top_k/serial")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_cosine_top_k<kernels::cosine_top_k_parallel>)->Name("cosine_top_k/parallel")->Range(1 << 10, 1 << 16);

BENCHMARK_MAIN();

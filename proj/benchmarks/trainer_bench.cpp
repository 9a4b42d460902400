#include "coml/trainer.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

coml::Dataset random_dataset(std::size_t rows, std::size_t dim, std::size_t classes) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    coml::Dataset d;
    d.dim = dim;
    for (std::size_t i = 0; i < rows * dim; ++i) d.X.push_back(gauss(rng));
    for (std::size_t i = 0; i < rows; ++i) d.y.push_back(i % classes);
    return d;
}

void BM_LossAndGradient(benchmark::State& state) {
    const auto d = random_dataset(32, 216, 6);
    coml::SoftmaxParams p(6, 216);
    std::vector<std::size_t> rows(32);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    for (auto _ : state) benchmark::DoNotOptimize(coml::loss_and_gradient(p, d, rows, 1e-4));
}
BENCHMARK(BM_LossAndGradient);

void BM_FitSoftmax(benchmark::State& state) {
    const auto d = random_dataset(static_cast<std::size_t>(state.range(0)), 216, 6);
    coml::Hyperparams h;
    for (auto _ : state) benchmark::DoNotOptimize(coml::fit_softmax(d, 6, 1, h));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitSoftmax)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

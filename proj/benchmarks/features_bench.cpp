#include "coml/features.hpp"
#include "coml/synthetic.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_ExtractFeatures(benchmark::State& state) {
    coml::SyntheticSpec spec;
    spec.width = spec.height = static_cast<std::uint32_t>(state.range(0));
    const auto img = coml::synthetic_image(spec, 1);
    for (auto _ : state) benchmark::DoNotOptimize(coml::extract_features(img));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ExtractFeatures)->Arg(32)->Arg(64)->Arg(224);

void BM_EncodeDecodePpm(benchmark::State& state) {
    coml::SyntheticSpec spec;
    spec.width = spec.height = 64;
    const auto img = coml::synthetic_image(spec, 2);
    for (auto _ : state) benchmark::DoNotOptimize(coml::decode_ppm(coml::encode_ppm(img)));
}
BENCHMARK(BM_EncodeDecodePpm);

}  // namespace

#include <benchmark/benchmark.h>

#include <random>

#include "imdd/cnn.hpp"
#include "imdd/ffe.hpp"
#include "imdd/pipeline.hpp"
#include "imdd/quantized.hpp"

using namespace imdd;

namespace {

constexpr std::size_t kSamples = std::size_t{1} << 16;

CnnModel folded_model() { return bn_fold(CnnModel::he_init(CnnConfig::demonstrator(), 1)); }

std::vector<std::int32_t> random_codes(std::size_t n) {
    std::mt19937_64 rng(2);
    std::vector<std::int32_t> c(n);
    for (auto& v : c) v = static_cast<std::int32_t>(rng() % 64) - 32;
    return c;
}

void set_rate(benchmark::State& state, std::size_t samples) {
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * samples / 2));
    state.counters["symbols/s"] =
        benchmark::Counter(static_cast<double>(state.iterations() * samples / 2), benchmark::Counter::kIsRate);
}

}  // namespace

static void BM_FloatForward(benchmark::State& state) {
    const CnnModel m = folded_model();
    const auto codes = random_codes(kSamples);
    SampledSignal x;
    for (auto c : codes) x.samples.push_back(c / 32.0);
    for (auto _ : state) benchmark::DoNotOptimize(cnn_forward(m, x));
    set_rate(state, kSamples);
}
BENCHMARK(BM_FloatForward)->Unit(benchmark::kMillisecond);

static void BM_QuantizedForward(benchmark::State& state) {
    const auto q = quantize_model(folded_model(), {8, 6}, {16, 10});
    const auto codes = random_codes(kSamples);
    for (auto _ : state) benchmark::DoNotOptimize(quantized_forward(q, codes));
    set_rate(state, kSamples);
}
BENCHMARK(BM_QuantizedForward)->Unit(benchmark::kMillisecond);

static void BM_FfeApply(benchmark::State& state) {
    std::vector<double> taps(static_cast<std::size_t>(ffe_taps_for_complexity(mac_count(CnnConfig::demonstrator()))),
                             0.01);
    const auto codes = random_codes(kSamples);
    SampledSignal x;
    for (auto c : codes) x.samples.push_back(c / 32.0);
    for (auto _ : state) benchmark::DoNotOptimize(ffe_apply(taps, x));
    set_rate(state, kSamples);
}
BENCHMARK(BM_FfeApply)->Unit(benchmark::kMillisecond);

static void BM_Pipeline(benchmark::State& state) {
    const auto q = std::make_shared<const QuantizedModel>(quantize_model(folded_model(), {8, 6}, {16, 10}));
    const auto chunks = make_chunks(random_codes(kSamples), 1024);
    const auto graph = build(q, static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(run_stream(graph, chunks));
    set_rate(state, kSamples);
}
BENCHMARK(BM_Pipeline)->Args({1, 1024})->Args({2, 1024})->Args({4, 1024})->Args({4, 2})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

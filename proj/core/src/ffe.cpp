#include "imdd/ffe.hpp"

#include <cmath>

namespace imdd {

void FfeConfig::validate() const {
    if (num_taps < 1 || num_taps % 2 == 0) throw Error("ffe", "num_taps must be odd and >= 1");
    if (!(step_size > 0.0)) throw Error("ffe", "step_size must be > 0");
    if (passes < 1) throw Error("ffe", "passes must be >= 1");
}

int ffe_taps_for_complexity(double macs_per_symbol) {
    if (!(macs_per_symbol >= 1.0)) throw Error("ffe", "complexity must be >= 1 MAC/symbol");
    const int below = static_cast<int>(std::floor(macs_per_symbol));
    if (below % 2 == 1) return below;
    // `below` is even: pick the closer odd neighbour, ties going up.
    return (macs_per_symbol - (below - 1) < (below + 1) - macs_per_symbol) ? below - 1 : below + 1;
}

SampledSignal ffe_apply(std::span<const double> taps, const SampledSignal& x) {
    return fir_filter(x, taps, FilterMode::same);
}

FfeResult ffe_equalize(const FfeConfig& cfg, const SampledSignal& x, std::span<const double> training_symbols) {
    cfg.validate();
    const long long n = static_cast<long long>(x.size());
    const int center = cfg.num_taps / 2;
    const auto& xs = x.samples;

    double power = 0.0;
    for (double v : xs) power += v * v;
    power /= static_cast<double>(std::max<long long>(n, 1));
    if (!(power > 0.0)) throw Error("ffe", "input has zero power");
    if (cfg.step_size >= 2.0 / (cfg.num_taps * power))
        throw Error("ffe", "step_size exceeds the LMS stability bound 2/(taps*power)");

    FfeResult result;
    result.taps.assign(cfg.num_taps, 0.0);
    auto& h = result.taps;
    constexpr std::size_t kBlock = 1024;

    double step = cfg.step_size;
    double first_block_mse = -1.0;
    for (int pass = 0; pass < cfg.passes; ++pass) {
        double block_acc = 0.0, pass_acc = 0.0;
        std::size_t block_count = 0, pass_count = 0;
        for (std::size_t k = 0; k < training_symbols.size(); ++k) {
            const long long pos = 2 * (static_cast<long long>(k) + cfg.reference_delay);
            if (pos - center < 0 || pos + center >= n) continue;
            // y = sum_j h[j] x[pos + center - j]
            const double* xp = xs.data() + pos + center;
            double y = 0.0;
            for (int j = 0; j < cfg.num_taps; ++j) y += h[j] * xp[-j];
            const double e = training_symbols[k] - y;
            const double mu_e = step * e;
            for (int j = 0; j < cfg.num_taps; ++j) h[j] += mu_e * xp[-j];

            block_acc += e * e;
            pass_acc += e * e;
            ++pass_count;
            if (++block_count == kBlock) {
                const double mse = block_acc / kBlock;
                if (!std::isfinite(mse)) throw Error("ffe", "LMS diverged (non-finite error); reduce step_size");
                if (first_block_mse < 0.0) first_block_mse = mse;
                else if (mse > 10.0 * first_block_mse)
                    throw Error("ffe", "LMS diverged (MSE grew 10x); reduce step_size");
                result.mse_curve.push_back(mse);
                block_acc = 0.0;
                block_count = 0;
            }
        }
        if (pass_count == 0) throw Error("ffe", "no usable training symbols");
        result.converged_mse = pass_acc / static_cast<double>(pass_count);
        step *= 0.5;
    }
    result.equalized = ffe_apply(h, x);
    return result;
}

BitSequence downsample_decide(std::span<const double> equalized) {
    BitSequence bits;
    bits.reserve(equalized.size() / 2 + 1);
    for (std::size_t i = 0; i < equalized.size(); i += 2) bits.push_back(equalized[i] > 0.0 ? 1 : 0);
    return bits;
}

}  // namespace imdd

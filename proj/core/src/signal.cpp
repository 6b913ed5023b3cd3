#include "imdd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace imdd {

namespace {

int prbs_tap(int degree) {
    switch (degree) {
        case 7: return 6;
        case 15: return 14;
        case 23: return 18;
        case 31: return 28;
        default: throw Error("prbs", "unsupported degree " + std::to_string(degree));
    }
}

std::uint32_t register_mask(int degree) {
    return degree == 32 ? 0xffffffffu : ((1u << degree) - 1u);
}

}  // namespace

std::uint32_t prbs_all_ones(int degree) {
    prbs_tap(degree);
    return register_mask(degree);
}

BitSequence prbs_generate(int degree, std::uint32_t seed, std::size_t n) {
    const int tap = prbs_tap(degree);
    const std::uint32_t mask = register_mask(degree);
    std::uint32_t state = seed & mask;
    if (state == 0) throw Error("prbs", "seed must be nonzero (all-zero register locks up)");
    if (n == 0) throw Error("prbs", "sequence length must be >= 1");

    BitSequence out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t fb = ((state >> (degree - 1)) ^ (state >> (tap - 1))) & 1u;
        state = ((state << 1) | fb) & mask;
        out[i] = static_cast<Bit>(fb);
    }
    return out;
}

SymbolSequence pam2_map(std::span<const Bit> bits) {
    SymbolSequence out;
    out.reserve(bits.size());
    for (Bit b : bits) out.push_back(b ? 1.0 : -1.0);
    return out;
}

SampledSignal upsample(std::span<const double> symbols, int sps, double symbol_rate_hz) {
    if (sps < 1) throw Error("upsample", "sps must be >= 1");
    SampledSignal out;
    out.sample_rate_hz = symbol_rate_hz * sps;
    out.samples.assign(symbols.size() * static_cast<std::size_t>(sps), 0.0);
    for (std::size_t k = 0; k < symbols.size(); ++k) out.samples[k * sps] = symbols[k];
    return out;
}

SampledSignal nrz_hold(std::span<const double> symbols, int sps, double symbol_rate_hz) {
    if (sps < 1) throw Error("nrz_hold", "sps must be >= 1");
    SampledSignal out;
    out.sample_rate_hz = symbol_rate_hz * sps;
    out.samples.reserve(symbols.size() * static_cast<std::size_t>(sps));
    for (double s : symbols)
        for (int i = 0; i < sps; ++i) out.samples.push_back(s);
    return out;
}

std::vector<double> downsample(std::span<const double> samples, int factor, int phase) {
    if (factor < 1 || phase < 0 || phase >= factor)
        throw Error("downsample", "invalid factor/phase");
    std::vector<double> out;
    out.reserve(samples.size() / factor + 1);
    for (std::size_t i = phase; i < samples.size(); i += factor) out.push_back(samples[i]);
    return out;
}

double rrc_impulse(double t, double rolloff) {
    using std::numbers::pi;
    const double a = rolloff;
    if (std::abs(t) < 1e-12) return 1.0 - a + 4.0 * a / pi;
    if (std::abs(std::abs(t) - 1.0 / (4.0 * a)) < 1e-12) {
        return a / std::numbers::sqrt2 *
               ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * a)) +
                (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * a)));
    }
    const double num = std::sin(pi * t * (1.0 - a)) + 4.0 * a * t * std::cos(pi * t * (1.0 + a));
    const double den = pi * t * (1.0 - (4.0 * a * t) * (4.0 * a * t));
    return num / den;
}

std::vector<double> rrc_taps(double rolloff, int span_symbols, int sps) {
    if (!(rolloff > 0.0 && rolloff <= 1.0)) throw Error("rrc_taps", "rolloff must be in (0, 1]");
    if (span_symbols < 2 || span_symbols % 2 != 0)
        throw Error("rrc_taps", "span_symbols must be even and >= 2");
    if (sps < 2) throw Error("rrc_taps", "sps must be >= 2");

    const int n = span_symbols * sps + 1;
    const int center = n / 2;
    std::vector<double> taps(n);
    for (int i = 0; i < n; ++i)
        taps[i] = rrc_impulse(static_cast<double>(i - center) / sps, rolloff);
    // Mirror so the result is exactly symmetric regardless of rounding in t.
    for (int i = 0; i < center; ++i) taps[n - 1 - i] = taps[i];

    const double energy = std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0);
    const double scale = 1.0 / std::sqrt(energy);
    for (double& v : taps) v *= scale;
    return taps;
}

SampledSignal fir_filter(const SampledSignal& signal, std::span<const double> taps, FilterMode mode) {
    if (taps.empty()) throw Error("fir_filter", "taps must be nonempty");
    const std::size_t n = signal.samples.size();
    const std::size_t m = taps.size();
    SampledSignal out;
    out.sample_rate_hz = signal.sample_rate_hz;
    if (n == 0) return out;

    std::vector<double> full(n + m - 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = signal.samples[i];
        for (std::size_t j = 0; j < m; ++j) full[i + j] += x * taps[j];
    }
    if (mode == FilterMode::full) {
        out.samples = std::move(full);
    } else {
        const std::size_t delay = (m - 1) / 2;
        out.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(delay),
                           full.begin() + static_cast<std::ptrdiff_t>(delay + n));
    }
    return out;
}

std::vector<double> lowpass_taps(double cutoff_fraction, int half_width) {
    using std::numbers::pi;
    if (!(cutoff_fraction > 0.0 && cutoff_fraction < 0.5))
        throw Error("lowpass_taps", "cutoff must be in (0, 0.5) of the sample rate");
    if (half_width < 1) throw Error("lowpass_taps", "half_width must be >= 1");
    const int n = 2 * half_width + 1;
    std::vector<double> taps(n);
    for (int i = 0; i < n; ++i) {
        const double k = i - half_width;
        const double sinc = k == 0 ? 2.0 * cutoff_fraction
                                   : std::sin(2.0 * pi * cutoff_fraction * k) / (pi * k);
        const double w = 0.42 + 0.5 * std::cos(pi * k / (half_width + 1)) +
                         0.08 * std::cos(2.0 * pi * k / (half_width + 1));
        taps[i] = sinc * w;
    }
    const double dc = std::accumulate(taps.begin(), taps.end(), 0.0);
    for (double& v : taps) v /= dc;
    return taps;
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double acc = 0.0;
    for (double v : x) acc += (v - m) * (v - m);
    return acc / static_cast<double>(x.size());
}

SampledSignal normalize(const SampledSignal& signal) {
    if (signal.samples.size() < 2) throw Error("normalize", "need at least 2 samples");
    const double m = mean(signal.samples);
    const double var = variance(signal.samples);
    if (!(var > 0.0)) throw Error("normalize", "zero variance input");
    const double inv = 1.0 / std::sqrt(var);
    SampledSignal out;
    out.sample_rate_hz = signal.sample_rate_hz;
    out.samples.reserve(signal.samples.size());
    for (double v : signal.samples) out.samples.push_back((v - m) * inv);
    return out;
}

}  // namespace imdd

#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace imdd {

/// Base class for every error raised by the library. `stage()` names the
/// processing block that failed so chain-level callers can report it.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

using Bit = std::uint8_t;
using BitSequence = std::vector<Bit>;
/// PAM2 amplitudes, each element -1.0 or +1.0.
using SymbolSequence = std::vector<double>;

struct SampledSignal {
    std::vector<double> samples;
    double sample_rate_hz = 1.0;

    std::size_t size() const noexcept { return samples.size(); }
};

/// Complex optical field envelope in sqrt(mW) units.
struct ComplexField {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 1.0;

    std::size_t size() const noexcept { return samples.size(); }
};

/// Maximal-length Fibonacci LFSR output. Supported degrees and feedback
/// polynomials: 7 (x^7+x^6+1), 15 (x^15+x^14+1), 23 (x^23+x^18+1),
/// 31 (x^31+x^28+1). `seed` holds the initial register, bit 0 first.
BitSequence prbs_generate(int degree, std::uint32_t seed, std::size_t n);

/// All-ones register for `degree`, the default PRBS seed.
std::uint32_t prbs_all_ones(int degree);

SymbolSequence pam2_map(std::span<const Bit> bits);

/// Zero insertion: sample k*sps holds symbol k.
SampledSignal upsample(std::span<const double> symbols, int sps, double symbol_rate_hz);

/// Rectangular NRZ hold: each symbol repeated `sps` times.
SampledSignal nrz_hold(std::span<const double> symbols, int sps, double symbol_rate_hz);

/// Keeps every `factor`-th sample starting at `phase`.
std::vector<double> downsample(std::span<const double> samples, int factor, int phase = 0);

/// Unnormalized root-raised-cosine impulse response at `t` symbol periods.
/// The removable singularities at t = 0 and |t| = 1/(4*rolloff) use their
/// closed-form limits.
double rrc_impulse(double t, double rolloff);

/// span_symbols*sps+1 symmetric taps, scaled to unit energy.
std::vector<double> rrc_taps(double rolloff, int span_symbols, int sps);

enum class FilterMode { full, same };

SampledSignal fir_filter(const SampledSignal& signal, std::span<const double> taps,
                         FilterMode mode = FilterMode::same);

/// Windowed-sinc low-pass taps (Blackman window), cutoff as a fraction of
/// the sample rate, unit DC gain.
std::vector<double> lowpass_taps(double cutoff_fraction, int half_width);

/// Zero mean, unit (population) variance.
SampledSignal normalize(const SampledSignal& signal);

double mean(std::span<const double> x);
double variance(std::span<const double> x);

}  // namespace imdd

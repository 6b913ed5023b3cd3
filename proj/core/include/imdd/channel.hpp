#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "imdd/signal.hpp"

namespace imdd {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

struct LinkGeometry {
    double fiber_length_km = 20.56;
    double wavelength_nm = 1540.0;
    double dispersion_ps_per_nm_km = 17.0;
    double symbol_rate_baud = 30e9;
    double converter_rate_hz = 60e9;
    int adc_bits = 6;
    int dac_bits = 6;

    void validate() const;
    /// Converter samples per symbol; integral in every supported setup.
    int samples_per_symbol() const;
};

enum class EamMode { linear, tanh };

/// Power transfer of the electro-absorption modulator. Drive is in [-1, 1].
///   linear: T(v) = floor + (1-floor)(v+1)/2
///   tanh:   T(v) = floor + (1-floor)(1+tanh(v/saturation_scale))/2
struct EamCurve {
    EamMode mode = EamMode::linear;
    double saturation_scale = 1.0;
    double extinction_floor = 0.0;

    void validate() const;
    double power_transfer(double drive) const;
};

struct NoiseSpec {
    /// +infinity disables the noise source.
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
};

/// Group-velocity dispersion beta2 = -D*lambda^2/(2*pi*c), in ps^2/km.
double beta2_from_dispersion(double dispersion_ps_per_nm_km, double wavelength_nm);

ComplexField eam_modulate(const SampledSignal& drive, const EamCurve& curve, double carrier_power);

/// Chromatic-dispersion all-pass response exp(-j*(beta2/2)*w^2*L) sampled on
/// the n DFT bins at sample rate fs.
std::vector<std::complex<double>> cd_transfer(std::size_t n, double sample_rate_hz, double beta2_ps2_per_km,
                                              double length_km);

ComplexField cd_apply(const ComplexField& field, double beta2_ps2_per_km, double length_km);

SampledSignal square_law_detect(const ComplexField& field);

SampledSignal awgn_add(const SampledSignal& signal, const NoiseSpec& spec);

/// Mid-rise uniform quantizer over [-full_scale, full_scale) with 2^bits
/// levels; saturates at the rails. Returns reconstruction levels.
SampledSignal quantize_converter(const SampledSignal& signal, int bits, double full_scale);

/// Same quantizer, returning signed codes (level index - 2^(bits-1)).
std::vector<std::int32_t> converter_codes(std::span<const double> samples, int bits, double full_scale);

/// Resamples as if the receiver clock ran at (1 + ppm*1e-6) times the
/// nominal rate and started `phase_ui` symbol periods late: output sample m
/// is the windowed-sinc interpolation of the input at m*(1+ppm*1e-6) +
/// phase_ui*samples_per_symbol. Output stops at the last position that still
/// falls inside the input.
SampledSignal clock_offset(const SampledSignal& signal, double ppm, double phase_ui, int samples_per_symbol);

}  // namespace imdd

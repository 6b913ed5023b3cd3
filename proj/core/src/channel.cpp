#include "imdd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "imdd/fft.hpp"
#include "imdd/interpolate.hpp"

namespace imdd {

void LinkGeometry::validate() const {
    if (!(fiber_length_km >= 0.0)) throw Error("channel", "fiber_length_km must be >= 0");
    if (!(wavelength_nm > 0.0)) throw Error("channel", "wavelength_nm must be > 0");
    if (!(symbol_rate_baud > 0.0) || !(converter_rate_hz > 0.0))
        throw Error("channel", "rates must be > 0");
    if (adc_bits < 2 || adc_bits > 16 || dac_bits < 2 || dac_bits > 16)
        throw Error("channel", "converter bits must be in [2, 16]");
    samples_per_symbol();
}

int LinkGeometry::samples_per_symbol() const {
    const double ratio = converter_rate_hz / symbol_rate_baud;
    const double r = std::round(ratio);
    if (r < 1.0 || std::abs(ratio - r) > 1e-9)
        throw Error("channel", "converter_rate must be an integer multiple of symbol_rate");
    return static_cast<int>(r);
}

void EamCurve::validate() const {
    if (!(saturation_scale > 0.0)) throw Error("eam", "saturation_scale must be > 0");
    if (!(extinction_floor >= 0.0 && extinction_floor < 1.0))
        throw Error("eam", "extinction_floor must be in [0, 1)");
}

double EamCurve::power_transfer(double drive) const {
    if (mode == EamMode::linear) {
        const double v = std::clamp(drive, -1.0, 1.0);
        return extinction_floor + (1.0 - extinction_floor) * (v + 1.0) / 2.0;
    }
    return extinction_floor + (1.0 - extinction_floor) * (1.0 + std::tanh(drive / saturation_scale)) / 2.0;
}

double beta2_from_dispersion(double dispersion_ps_per_nm_km, double wavelength_nm) {
    if (!(wavelength_nm > 0.0)) throw Error("beta2", "wavelength must be > 0");
    const double c_nm_per_ps = kSpeedOfLight * 1e9 * 1e-12;
    return -dispersion_ps_per_nm_km * wavelength_nm * wavelength_nm / (2.0 * std::numbers::pi * c_nm_per_ps);
}

ComplexField eam_modulate(const SampledSignal& drive, const EamCurve& curve, double carrier_power) {
    if (!(carrier_power > 0.0)) throw Error("eam", "carrier_power must be > 0");
    curve.validate();
    ComplexField out;
    out.sample_rate_hz = drive.sample_rate_hz;
    out.samples.reserve(drive.size());
    for (double v : drive.samples) out.samples.emplace_back(std::sqrt(carrier_power * curve.power_transfer(v)), 0.0);
    return out;
}

std::vector<std::complex<double>> cd_transfer(std::size_t n, double sample_rate_hz, double beta2_ps2_per_km,
                                              double length_km) {
    std::vector<std::complex<double>> h(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w_per_ps = bin_angular_frequency(k, n, sample_rate_hz) * 1e-12;
        const double phase = -(beta2_ps2_per_km / 2.0) * w_per_ps * w_per_ps * length_km;
        h[k] = {std::cos(phase), std::sin(phase)};
    }
    return h;
}

ComplexField cd_apply(const ComplexField& field, double beta2_ps2_per_km, double length_km) {
    if (!(length_km >= 0.0)) throw Error("cd_apply", "length must be >= 0");
    if (length_km == 0.0 || field.samples.empty()) return field;
    auto spectrum = fft(field.samples);
    const auto h = cd_transfer(spectrum.size(), field.sample_rate_hz, beta2_ps2_per_km, length_km);
    for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= h[k];
    ComplexField out;
    out.sample_rate_hz = field.sample_rate_hz;
    out.samples = ifft(spectrum);
    return out;
}

SampledSignal square_law_detect(const ComplexField& field) {
    SampledSignal out;
    out.sample_rate_hz = field.sample_rate_hz;
    out.samples.reserve(field.size());
    for (const auto& e : field.samples) out.samples.push_back(std::norm(e));
    return out;
}

SampledSignal awgn_add(const SampledSignal& signal, const NoiseSpec& spec) {
    if (std::isinf(spec.snr_db) && spec.snr_db > 0) return signal;
    const double var = variance(signal.samples);
    if (!(var > 0.0)) throw Error("awgn", "signal variance must be > 0");
    const double sigma = std::sqrt(var / std::pow(10.0, spec.snr_db / 10.0));
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    SampledSignal out = signal;
    for (double& v : out.samples) v += gauss(rng);
    return out;
}

namespace {

long long quantizer_index(double x, int bits, double full_scale) {
    const long long levels = 1LL << bits;
    const double step = 2.0 * full_scale / static_cast<double>(levels);
    const double idx = std::floor((x + full_scale) / step);
    if (!(idx >= 0.0)) return 0;  // also catches NaN
    return std::min(static_cast<long long>(idx), levels - 1);
}

void check_converter(int bits, double full_scale) {
    if (bits < 2 || bits > 16) throw Error("quantizer", "bits must be in [2, 16]");
    if (!(full_scale > 0.0)) throw Error("quantizer", "full_scale must be > 0");
}

}  // namespace

SampledSignal quantize_converter(const SampledSignal& signal, int bits, double full_scale) {
    check_converter(bits, full_scale);
    const double step = 2.0 * full_scale / static_cast<double>(1LL << bits);
    SampledSignal out;
    out.sample_rate_hz = signal.sample_rate_hz;
    out.samples.reserve(signal.size());
    for (double x : signal.samples) {
        const long long i = quantizer_index(x, bits, full_scale);
        out.samples.push_back(-full_scale + (static_cast<double>(i) + 0.5) * step);
    }
    return out;
}

std::vector<std::int32_t> converter_codes(std::span<const double> samples, int bits, double full_scale) {
    check_converter(bits, full_scale);
    const long long half = 1LL << (bits - 1);
    std::vector<std::int32_t> out;
    out.reserve(samples.size());
    for (double x : samples) out.push_back(static_cast<std::int32_t>(quantizer_index(x, bits, full_scale) - half));
    return out;
}

SampledSignal clock_offset(const SampledSignal& signal, double ppm, double phase_ui, int samples_per_symbol) {
    if (std::abs(ppm) > 500.0) throw Error("clock_offset", "|ppm| must be <= 500");
    if (!(phase_ui >= 0.0 && phase_ui < 1.0)) throw Error("clock_offset", "phase_ui must be in [0, 1)");
    if (samples_per_symbol < 1) throw Error("clock_offset", "samples_per_symbol must be >= 1");
    if (ppm == 0.0 && phase_ui == 0.0) return signal;

    const double ratio = 1.0 + ppm * 1e-6;
    const double start = phase_ui * samples_per_symbol;
    SampledSignal out;
    out.sample_rate_hz = signal.sample_rate_hz;
    if (signal.size() == 0 || start > static_cast<double>(signal.size() - 1)) return out;
    const auto n = static_cast<std::size_t>(std::floor((static_cast<double>(signal.size() - 1) - start) / ratio)) + 1;
    out.samples.resize(n);
    for (std::size_t m = 0; m < n; ++m)
        out.samples[m] = interpolate_at(signal.samples, static_cast<double>(m) * ratio + start,
                                        Interpolator::windowed_sinc);
    return out;
}

}  // namespace imdd

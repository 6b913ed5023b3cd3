#include "imdd/clockrec.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace imdd {

namespace {

// Symbols excluded at each block edge so the internal upsampler never reads
// past the block; keeps the tone sum over whole symbol periods.
constexpr int kEdgeSymbols = 16;

double wrap_ui(double mu) {
    mu -= std::floor(mu + 0.5);
    return mu;  // [-0.5, 0.5)
}

SampledSignal estimator_input(const SampledSignal& x, const RecoveryConfig& cfg) {
    if (cfg.estimator_lowpass <= 0.0) return x;
    const auto taps = lowpass_taps(cfg.estimator_lowpass / kRecoverySps, 16);
    return fir_filter(x, taps, FilterMode::same);
}

TimingEstimate estimate_prepared(std::span<const double> block, const RecoveryConfig& cfg) {
    const int m = cfg.internal_oversampling;
    const int symbols = static_cast<int>(block.size()) / kRecoverySps;
    const double step = static_cast<double>(kRecoverySps) / m;
    std::complex<double> acc{0.0, 0.0};
    for (int k = kEdgeSymbols; k < symbols - kEdgeSymbols; ++k) {
        for (int i = 0; i < m; ++i) {
            const double pos = static_cast<double>(k * kRecoverySps) + i * step;
            const double v = (i * kRecoverySps) % m == 0
                                 ? block[static_cast<std::size_t>(k * kRecoverySps + i * kRecoverySps / m)]
                                 : interpolate_at(block, pos, Interpolator::windowed_sinc);
            const double angle = -2.0 * std::numbers::pi * i / m;
            acc += v * v * std::complex<double>(std::cos(angle), std::sin(angle));
        }
    }
    TimingEstimate est;
    if (std::abs(acc) > 0.0) est.mu_ui = wrap_ui(-std::arg(acc) / (2.0 * std::numbers::pi));
    return est;
}

}  // namespace

void RecoveryConfig::validate() const {
    if (block_len_symbols < 64) throw Error("clockrec", "block_len_symbols must be >= 64");
    if (internal_oversampling != 4 && internal_oversampling != 8)
        throw Error("clockrec", "internal_oversampling must be 4 or 8");
    if (estimator_lowpass < 0.0 || estimator_lowpass >= 1.0)
        throw Error("clockrec", "estimator_lowpass must be in [0, 1)");
}

double unwrap_toward(double mu, double previous) {
    while (mu - previous > 0.5) mu -= 1.0;
    while (mu - previous < -0.5) mu += 1.0;
    return mu;
}

TimingEstimate timing_estimate(const SampledSignal& block, const RecoveryConfig& cfg) {
    cfg.validate();
    if (block.size() != static_cast<std::size_t>(cfg.block_len_symbols) * kRecoverySps)
        throw Error("clockrec", "block length must equal block_len_symbols * 2");
    const SampledSignal prepared = estimator_input(block, cfg);
    return estimate_prepared(prepared.samples, cfg);
}

CorrectedSignal timing_correct(const SampledSignal& signal, const TimingEstimate& est, const RecoveryConfig& cfg) {
    if (!(std::abs(est.mu_ui) < 0.5)) throw Error("clockrec", "|mu_ui| must be < 0.5");
    CorrectedSignal out;
    out.signal.sample_rate_hz = signal.sample_rate_hz;
    if (est.mu_ui == 0.0) {
        out.signal.samples = signal.samples;
        out.valid_end = signal.size();
        return out;
    }
    const double shift = est.mu_ui * kRecoverySps;
    out.signal.samples.resize(signal.size());
    bool seen_valid = false;
    for (std::size_t m = 0; m < signal.size(); ++m) {
        const double pos = static_cast<double>(m) + shift;
        out.signal.samples[m] = interpolate_at(signal.samples, pos, cfg.interpolator);
        if (interpolation_valid(signal.size(), pos, cfg.interpolator)) {
            if (!seen_valid) out.valid_begin = m;
            seen_valid = true;
            out.valid_end = m + 1;
        }
    }
    return out;
}

RecoveryResult recover(const SampledSignal& signal, const RecoveryConfig& cfg) {
    cfg.validate();
    const std::size_t block_samples = static_cast<std::size_t>(cfg.block_len_symbols) * kRecoverySps;
    const std::size_t n_blocks = signal.size() / block_samples;
    if (n_blocks < 2) throw Error("clockrec", "recover needs at least two blocks of input");

    const SampledSignal prepared = estimator_input(signal, cfg);
    const std::span<const double> all(prepared.samples);

    RecoveryResult result;
    result.block_mu_ui.reserve(n_blocks);
    result.block_center_sample.reserve(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const auto block = all.subspan(b * block_samples, block_samples);
        double mu = estimate_prepared(block, cfg).mu_ui;
        if (b > 0) mu = unwrap_toward(mu, result.block_mu_ui.back());
        result.block_mu_ui.push_back(mu);
        result.block_center_sample.push_back(static_cast<double>(b * block_samples) +
                                             static_cast<double>(block_samples) / 2.0);
    }

    // Drift from a least-squares line through the per-block estimates.
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(n_blocks);
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const double x = result.block_center_sample[b] / kRecoverySps;
            const double y = result.block_mu_ui[b];
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        result.drift_ppm = -slope * 1e6;
    }

    // Piecewise-linear timing trajectory through the block centres.
    auto mu_at = [&](double m) {
        const auto& c = result.block_center_sample;
        const auto& mu = result.block_mu_ui;
        std::size_t k = 0;
        if (m >= c.back()) k = c.size() - 2;
        else if (m > c.front()) k = static_cast<std::size_t>((m - c.front()) / static_cast<double>(block_samples));
        k = std::min(k, c.size() - 2);
        const double t = (m - c[k]) / (c[k + 1] - c[k]);
        return mu[k] + t * (mu[k + 1] - mu[k]);
    };

    CorrectedSignal& out = result.corrected;
    out.signal.sample_rate_hz = signal.sample_rate_hz;
    out.signal.samples.resize(signal.size());
    bool seen_valid = false;
    for (std::size_t m = 0; m < signal.size(); ++m) {
        const double pos = static_cast<double>(m) + mu_at(static_cast<double>(m)) * kRecoverySps;
        out.signal.samples[m] = interpolate_at(signal.samples, pos, cfg.interpolator);
        if (interpolation_valid(signal.size(), pos, cfg.interpolator)) {
            if (!seen_valid) out.valid_begin = m;
            seen_valid = true;
            out.valid_end = m + 1;
        }
    }
    return result;
}

}  // namespace imdd

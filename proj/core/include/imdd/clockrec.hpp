#pragma once

#include <cstddef>
#include <vector>

#include "imdd/interpolate.hpp"
#include "imdd/signal.hpp"

namespace imdd {

/// Feedforward square-timing (Oerder-Meyr) recovery for 2-samples/symbol input.
struct RecoveryConfig {
    int block_len_symbols = 1024;
    int internal_oversampling = 4;
    Interpolator interpolator = Interpolator::cubic_lagrange;
    /// Low-pass applied to the estimator input only, as a fraction of the
    /// symbol rate. 0 disables it. Unshaped NRZ needs ~0.75 to expose a
    /// usable symbol-rate tone after square-law detection.
    double estimator_lowpass = 0.0;

    void validate() const;
};

struct TimingEstimate {
    /// Position of the symbol centre relative to the even-sample grid, in UI.
    /// Shifting the signal earlier by mu_ui aligns centres to even samples.
    double mu_ui = 0.0;
    double drift_ppm = 0.0;
};

struct CorrectedSignal {
    SampledSignal signal;
    /// Samples outside [valid_begin, valid_end) read past the input edges.
    std::size_t valid_begin = 0;
    std::size_t valid_end = 0;
};

struct RecoveryResult {
    CorrectedSignal corrected;
    /// Unwrapped per-block estimates and the sample index each refers to.
    std::vector<double> block_mu_ui;
    std::vector<double> block_center_sample;
    double drift_ppm = 0.0;
};

inline constexpr int kRecoverySps = 2;

TimingEstimate timing_estimate(const SampledSignal& block, const RecoveryConfig& cfg);

CorrectedSignal timing_correct(const SampledSignal& signal, const TimingEstimate& est, const RecoveryConfig& cfg);

RecoveryResult recover(const SampledSignal& signal, const RecoveryConfig& cfg);

/// Brings mu within 0.5 UI of `previous` by whole-UI steps. A difference of
/// exactly 0.5 UI stays on the side of `previous`.
double unwrap_toward(double mu, double previous);

}  // namespace imdd

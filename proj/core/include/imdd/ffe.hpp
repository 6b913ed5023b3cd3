#pragma once

#include <span>
#include <vector>

#include "imdd/cnn.hpp"
#include "imdd/signal.hpp"

namespace imdd {

/// T/2-spaced feed-forward equalizer adapted by LMS.
struct FfeConfig {
    int num_taps = 157;
    double step_size = 2e-3;
    /// Label k is compared with output sample 2*(k + reference_delay).
    int reference_delay = 0;
    /// Passes over the training prefix; the step halves after each pass.
    int passes = 3;

    void validate() const;
};

struct FfeResult {
    std::vector<double> taps;
    /// MSE over the final pass of adaptation.
    double converged_mse = 0.0;
    /// MSE per block of 1024 training symbols, in adaptation order.
    std::vector<double> mse_curve;
    SampledSignal equalized;
};

/// Odd tap count whose T/2 FFE cost (one output per symbol, one MAC per tap)
/// is closest to `macs_per_symbol`.
int ffe_taps_for_complexity(double macs_per_symbol);

/// Adapts taps on x against the +-1 `training_symbols` (label k at sample
/// 2k), then applies the frozen taps to all of x.
FfeResult ffe_equalize(const FfeConfig& cfg, const SampledSignal& x, std::span<const double> training_symbols);

/// Centre-aligned FIR application of frozen taps.
SampledSignal ffe_apply(std::span<const double> taps, const SampledSignal& x);

/// Symbol decisions from even-indexed samples: 1 when > 0, 0 otherwise
/// (exact zero decides 0).
BitSequence downsample_decide(std::span<const double> equalized);

}  // namespace imdd

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "imdd/ber.hpp"
#include "imdd/config.hpp"
#include "imdd/model_io.hpp"
#include "imdd/pipeline.hpp"
#include "imdd/quantized.hpp"
#include "imdd/training.hpp"

namespace imdd {

/// Independent 64-bit seed for a named lane of the master seed.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t lane);

namespace seed_lane {
inline constexpr std::uint64_t train_noise = 1;
inline constexpr std::uint64_t eval_noise = 2;
inline constexpr std::uint64_t training = 3;
inline constexpr std::uint64_t eval_prbs = 4;
inline constexpr std::uint64_t validation_noise = 5;
inline constexpr std::uint64_t training_bits = 6;
inline constexpr std::uint64_t validation_bits = 7;
}  // namespace seed_lane

inline constexpr int kTrainPrbsDegree = 15;
inline constexpr int kEvalPrbsDegree = 23;

/// Received signal after clock recovery, trimmed to the valid region and
/// starting on a symbol-centre sample.
struct ReceivedSignal {
    std::vector<double> analog;       // recovered, before requantization
    std::vector<std::int32_t> codes;  // requantized ADC codes
    std::vector<double> input;        // codes / 2^(bits-1): equalizer input
    std::size_t trimmed_samples = 0;  // samples dropped at the front
    double drift_ppm = 0.0;
};

/// TX -> EAM -> fiber -> photodiode -> noise -> clock offset -> ADC ->
/// clock recovery -> requantization.
ReceivedSignal simulate_link(const LinkRunConfig& cfg, std::span<const Bit> bits, std::uint64_t noise_seed);

/// Training-phase bits: PRBS15 from the all-ones state, or a seeded
/// uniform stream drawn from `lane`.
BitSequence training_bits(const LinkRunConfig& cfg, std::size_t n, std::uint64_t lane);

/// Symbol lag and polarity such that input[2k + phase] ~ sign * symbols[k + lag].
/// Both sampling phases are tried (|lag| <= max_lag, correlation on a
/// prefix) and the better-correlated one wins; the label for equalizer
/// output 2k is then symbols[k + lag].
struct SymbolLag {
    long long lag = 0;
    bool inverted = false;
    int phase = 0;
    double correlation = 0.0;  // |normalized correlation| at the chosen lag
};
SymbolLag resolve_symbol_lag(std::span<const double> input, std::span<const double> symbols, long long max_lag = 256);

/// Crops signal and labels to the overlap implied by `lag`.
TrainingSet make_training_set(std::span<const double> input, std::span<const double> symbols, const SymbolLag& lag);

struct TrainedEqualizer {
    EqualizerKind kind = EqualizerKind::none;
    std::optional<CnnModel> float_model;  // BN folded
    std::optional<QuantizedModel> quantized_model;
    std::vector<double> ffe_taps;
    std::vector<double> loss_curve;
    std::map<std::string, double> diagnostics;
};

/// Training phase on the PRBS15 training stream (or model file load).
TrainedEqualizer train_equalizer(const LinkRunConfig& cfg, const EpochCallback& on_epoch = {});

/// Equalizer output at 2 samples/symbol for a received input.
struct EqualizerOutput {
    std::vector<double> samples;
    std::optional<RunStats> stream_stats;
    std::uint64_t saturations = 0;
};
EqualizerOutput apply_equalizer(const LinkRunConfig& cfg, const TrainedEqualizer& eq, const ReceivedSignal& rx);

struct LinkEvaluation {
    BerReport report;
    std::vector<double> post_samples;  // equalizer output at decision instants
    BitSequence decisions;
    std::optional<RunStats> stream_stats;
};

/// Frozen evaluation on the independent PRBS23 stream.
LinkEvaluation evaluate_link(const LinkRunConfig& cfg, const TrainedEqualizer& eq);

/// Full run: training phase then evaluation. No-sync yields the sentinel
/// report instead of an exception.
BerReport run_link(const LinkRunConfig& cfg);

/// Bundle for saving a trained CNN.
ModelBundle to_bundle(const TrainedEqualizer& eq);

}  // namespace imdd

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imdd/channel.hpp"
#include "imdd/clockrec.hpp"
#include "imdd/cnn.hpp"
#include "imdd/ffe.hpp"
#include "imdd/fixed_point.hpp"
#include "imdd/training.hpp"

namespace imdd {

inline constexpr int kConfigVersion = 1;

enum class PulseShape { nrz, rrc };

struct TxConfig {
    PulseShape pulse = PulseShape::nrz;
    double rrc_rolloff = 0.3;
    int rrc_span_symbols = 16;
    double dac_full_scale = 1.0;
};

struct ClockConfig {
    double ppm = 0.0;
    double phase_ui = 0.0;
    bool recover = true;
    RecoveryConfig recovery{1024, 4, Interpolator::cubic_lagrange, 0.75};
};

/// Bit source of the training stream. PRBS15 lets equalizers fit the
/// shift-and-add structure of the sequence, which does not carry over to
/// the PRBS23 evaluation stream; `random` avoids that.
enum class TrainingSource { random, prbs15 };

enum class EqualizerKind { none, ffe, cnn };
enum class CnnInference { float_path, quantized, streamed };

struct CnnEqualizerConfig {
    CnnConfig topology = CnnConfig::demonstrator();
    FixedPointFormat weight_fmt{8, 6};
    FixedPointFormat act_fmt{16, 10};
    CnnInference inference = CnnInference::float_path;
    int instances = 1;
    std::size_t queue_depth = 1024;
    std::size_t chunk_samples = 1024;
    /// Pretrained model file; empty means train from the link.
    std::string model_path;
};

struct EqualizerConfig {
    EqualizerKind kind = EqualizerKind::cnn;
    CnnEqualizerConfig cnn;
    /// num_taps == 0 selects the tap count matching the CNN's MACs/symbol.
    FfeConfig ffe{0, 2e-3, 0, 3};
};

struct LinkRunConfig {
    int version = kConfigVersion;
    LinkGeometry geometry;
    TxConfig tx;
    EamCurve eam;
    double snr_db = std::numeric_limits<double>::infinity();
    ClockConfig clock;
    double adc_full_scale = 3.0;
    EqualizerConfig equalizer;
    TrainingHyper training;
    TrainingSource training_source = TrainingSource::random;
    std::size_t n_symbols_train = std::size_t{1} << 20;
    std::size_t n_symbols_eval = std::size_t{1} << 20;
    std::uint64_t master_seed = 1;
    std::size_t max_delay = 4096;

    void validate() const;
    /// FFE taps after resolving num_taps == 0.
    FfeConfig resolved_ffe() const;
};

std::string to_string(EqualizerKind kind);
EqualizerKind parse_equalizer_kind(const std::string& name);
std::string to_string(CnnInference mode);
CnnInference parse_inference(const std::string& name);

/// JSON document mirroring LinkRunConfig. Unknown keys and type mismatches
/// are rejected; omitted keys keep their defaults.
std::string config_to_json(const LinkRunConfig& cfg, int indent = 2);
LinkRunConfig config_from_json(const std::string& text, const std::vector<std::string>& overrides = {});
LinkRunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Applies "dot.path=value" overrides to a config, e.g. "geometry.fiber_length_km=10".
LinkRunConfig apply_overrides(const LinkRunConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace imdd

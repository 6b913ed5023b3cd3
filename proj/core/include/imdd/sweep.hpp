#pragma once

#include <string>
#include <vector>

#include "imdd/config.hpp"

namespace imdd {

enum class SweepParameter { snr_db, fiber_length_km, word_bits };

SweepParameter parse_sweep_parameter(const std::string& name);
std::string to_string(SweepParameter p);

struct SweepRow {
    std::string parameter;
    double value = 0.0;
    std::string equalizer;
    double ber = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    bool synced = true;
};

/// Config for one sweep point. word_bits sets the weight format to
/// Q(w, w-2) and switches the CNN to integer inference.
LinkRunConfig sweep_point_config(const LinkRunConfig& base, SweepParameter parameter, double value,
                                 std::size_t index);

/// One run_link per (value, equalizer); every value gets its own derived
/// master seed, shared by all equalizers at that value. Needs >= 2 values.
std::vector<SweepRow> sweep(const LinkRunConfig& base, SweepParameter parameter, const std::vector<double>& values,
                            const std::vector<EqualizerKind>& equalizers);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_from_csv(const std::string& text);

}  // namespace imdd

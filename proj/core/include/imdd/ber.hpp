#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "imdd/signal.hpp"

namespace imdd {

inline constexpr std::size_t kDefaultMaxDelay = 4096;
inline constexpr double kNoSyncAgreement = 0.6;
inline constexpr double kNoSyncBer = 0.5;

/// Raised by align_and_count when no delay/polarity reaches the agreement
/// threshold.
class NoSyncError : public Error {
public:
    explicit NoSyncError(const std::string& what) : Error("ber", what) {}
};

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Wilson score interval; z defaults to the two-sided 95% quantile.
ConfidenceInterval wilson_interval(std::uint64_t errors, std::uint64_t trials, double z = 1.959963984540054);

struct Histogram {
    double lo = -2.0;
    double hi = 2.0;
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const;
    double bin_lo(std::size_t i) const;
    double bin_hi(std::size_t i) const;
};

/// Values outside [lo, hi) are clamped into the edge bins.
Histogram make_histogram(std::span<const double> values, std::size_t bins = 64, double lo = -2.0, double hi = 2.0);

/// Fraction of values with |x| < half_width.
double center_mass(std::span<const double> values, double half_width = 0.1);

/// Amplitude occupancy per sampling phase; counts[phase * bins + bin].
struct EyeDiagram {
    int phases = 2;
    std::size_t bins = 64;
    double lo = -2.0;
    double hi = 2.0;
    std::vector<std::uint64_t> counts;
};

EyeDiagram make_eye(std::span<const double> samples, int phases = 2, std::size_t bins = 64, double lo = -2.0,
                    double hi = 2.0);

struct Alignment {
    std::size_t delay = 0;
    bool inverted = false;
};

struct BerReport {
    std::string equalizer = "none";
    bool synced = true;
    std::uint64_t bits_counted = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    ConfidenceInterval ci;
    Alignment alignment;
    Histogram pre_histogram;
    Histogram post_histogram;
    double pre_center_mass = 0.0;
    double post_center_mass = 0.0;
    EyeDiagram eye;
    /// Deterministic scalar side results (timing drift, FFE MSE, ...).
    std::map<std::string, double> diagnostics;
};

/// Finds delay in [0, max_delay] and polarity maximizing agreement between
/// received[k + delay] and reference[k] on a prefix window, then counts
/// errors over the whole overlap. Ties go to the smaller delay, then normal
/// polarity. Throws NoSyncError below 60% agreement.
BerReport align_and_count(std::span<const Bit> reference, std::span<const Bit> received,
                          std::size_t max_delay = kDefaultMaxDelay);

/// Report with the no-sync sentinel BER filled in.
BerReport no_sync_report(const std::string& equalizer);

std::string report_to_json(const BerReport& report, int indent = 2);

}  // namespace imdd

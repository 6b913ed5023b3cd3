#pragma once

#include <cstdint>
#include <string>

namespace imdd {

/// Signed two's-complement Q-format: `word_bits` total bits of which
/// `frac_bits` are fractional. Conversion rounds half up and saturates.
struct FixedPointFormat {
    int word_bits = 16;
    int frac_bits = 10;

    void validate() const;

    std::int64_t max_raw() const { return (std::int64_t{1} << (word_bits - 1)) - 1; }
    std::int64_t min_raw() const { return -(std::int64_t{1} << (word_bits - 1)); }
    double lsb() const;
    double max_value() const { return static_cast<double>(max_raw()) * lsb(); }
    double min_value() const { return static_cast<double>(min_raw()) * lsb(); }

    std::int64_t saturate(std::int64_t raw) const;
    /// floor(x * 2^frac + 1/2), saturated; `saturated` is set when clipping occurred.
    std::int32_t quantize(double x, bool* saturated = nullptr) const;
    double to_double(std::int64_t raw) const { return static_cast<double>(raw) * lsb(); }

    std::string to_string() const;  // "Q(word,frac)"
    bool operator==(const FixedPointFormat&) const = default;
};

/// Arithmetic right shift with round-half-up; negative `shift` shifts left.
std::int64_t shift_round_half_up(std::int64_t value, int shift);

}  // namespace imdd

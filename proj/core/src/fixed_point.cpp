#include "imdd/fixed_point.hpp"

#include <algorithm>
#include <cmath>

#include "imdd/signal.hpp"

namespace imdd {

void FixedPointFormat::validate() const {
    if (word_bits < 4 || word_bits > 32) throw Error("fixed_point", "word_bits must be in [4, 32]");
    if (frac_bits < 0 || frac_bits > word_bits - 1)
        throw Error("fixed_point", "frac_bits must be in [0, word_bits-1]");
}

double FixedPointFormat::lsb() const { return std::ldexp(1.0, -frac_bits); }

std::int64_t FixedPointFormat::saturate(std::int64_t raw) const {
    return std::clamp(raw, min_raw(), max_raw());
}

std::int32_t FixedPointFormat::quantize(double x, bool* saturated) const {
    const double scaled = std::floor(std::ldexp(x, frac_bits) + 0.5);
    std::int64_t raw;
    if (!(scaled >= static_cast<double>(min_raw()))) raw = min_raw();  // also NaN
    else if (scaled > static_cast<double>(max_raw())) raw = max_raw();
    else raw = static_cast<std::int64_t>(scaled);
    if (saturated) *saturated = static_cast<double>(raw) != scaled;
    return static_cast<std::int32_t>(raw);
}

std::string FixedPointFormat::to_string() const {
    return "Q(" + std::to_string(word_bits) + "," + std::to_string(frac_bits) + ")";
}

std::int64_t shift_round_half_up(std::int64_t value, int shift) {
    if (shift <= 0) return value * (std::int64_t{1} << -shift);
    return (value + (std::int64_t{1} << (shift - 1))) >> shift;
}

}  // namespace imdd

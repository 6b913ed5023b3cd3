#pragma once

#include <span>
#include <string_view>

namespace imdd {

enum class Interpolator { cubic_lagrange, windowed_sinc };

Interpolator parse_interpolator(std::string_view name);
std::string_view to_string(Interpolator kind);

/// Half support (samples on each side) of each interpolator kernel.
int interpolator_half_width(Interpolator kind);

/// Value of the band-limited continuation of `x` at fractional sample index
/// `position`. Samples outside [0, size) count as zero.
double interpolate_at(std::span<const double> x, double position, Interpolator kind);

/// True when the full kernel support around `position` lies inside the signal.
bool interpolation_valid(std::size_t size, double position, Interpolator kind);

}  // namespace imdd

#include "imdd/interpolate.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "imdd/signal.hpp"

namespace imdd {

namespace {

constexpr int kSincHalfWidth = 32;
constexpr int kSincPhases = 2048;
constexpr double kKaiserBeta = 9.0;

// Kaiser-windowed sinc, tabulated at kSincPhases fractional offsets. Row p
// holds the 2*kSincHalfWidth weights for fractional offset p/kSincPhases,
// applied to samples i-kSincHalfWidth+1 .. i+kSincHalfWidth.
class SincTable {
public:
    SincTable() : rows_((kSincPhases + 1) * 2 * kSincHalfWidth) {
        using std::numbers::pi;
        const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
        for (int p = 0; p <= kSincPhases; ++p) {
            const double frac = static_cast<double>(p) / kSincPhases;
            double* row = &rows_[p * 2 * kSincHalfWidth];
            for (int j = 0; j < 2 * kSincHalfWidth; ++j) {
                const double d = (j - kSincHalfWidth + 1) - frac;
                const double sinc = std::abs(d) < 1e-15 ? 1.0 : std::sin(pi * d) / (pi * d);
                const double r = d / kSincHalfWidth;
                const double w = std::abs(r) >= 1.0
                                     ? 0.0
                                     : std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / norm;
                row[j] = sinc * w;
            }
        }
    }

    const double* row(int p) const { return &rows_[p * 2 * kSincHalfWidth]; }

private:
    std::vector<double> rows_;
};

const SincTable& sinc_table() {
    static const SincTable table;
    return table;
}

inline double sample_or_zero(std::span<const double> x, long long i) {
    return (i >= 0 && i < static_cast<long long>(x.size())) ? x[static_cast<std::size_t>(i)] : 0.0;
}

double cubic_lagrange(std::span<const double> x, double position) {
    const double base = std::floor(position);
    const long long i = static_cast<long long>(base);
    const double mu = position - base;
    const double xm1 = sample_or_zero(x, i - 1);
    const double x0 = sample_or_zero(x, i);
    const double x1 = sample_or_zero(x, i + 1);
    const double x2 = sample_or_zero(x, i + 2);
    const double cm1 = -mu * (mu - 1.0) * (mu - 2.0) / 6.0;
    const double c0 = (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0;
    const double c1 = -(mu + 1.0) * mu * (mu - 2.0) / 2.0;
    const double c2 = (mu + 1.0) * mu * (mu - 1.0) / 6.0;
    return cm1 * xm1 + c0 * x0 + c1 * x1 + c2 * x2;
}

double windowed_sinc(std::span<const double> x, double position) {
    const double base = std::floor(position);
    const long long i = static_cast<long long>(base);
    const double scaled = (position - base) * kSincPhases;
    const int p = std::min(static_cast<int>(scaled), kSincPhases - 1);
    const double t = scaled - p;
    const SincTable& table = sinc_table();
    const double* lo = table.row(p);
    const double* hi = table.row(p + 1);
    const long long first = i - kSincHalfWidth + 1;
    double acc = 0.0;
    if (first >= 0 && first + 2 * kSincHalfWidth <= static_cast<long long>(x.size())) {
        const double* xs = x.data() + first;
        for (int j = 0; j < 2 * kSincHalfWidth; ++j) acc += xs[j] * (lo[j] + t * (hi[j] - lo[j]));
    } else {
        for (int j = 0; j < 2 * kSincHalfWidth; ++j)
            acc += sample_or_zero(x, first + j) * (lo[j] + t * (hi[j] - lo[j]));
    }
    return acc;
}

}  // namespace

Interpolator parse_interpolator(std::string_view name) {
    if (name == "cubic-lagrange") return Interpolator::cubic_lagrange;
    if (name == "windowed-sinc") return Interpolator::windowed_sinc;
    throw Error("interpolator", "unknown interpolator '" + std::string(name) + "'");
}

std::string_view to_string(Interpolator kind) {
    return kind == Interpolator::cubic_lagrange ? "cubic-lagrange" : "windowed-sinc";
}

int interpolator_half_width(Interpolator kind) {
    return kind == Interpolator::cubic_lagrange ? 2 : kSincHalfWidth;
}

double interpolate_at(std::span<const double> x, double position, Interpolator kind) {
    return kind == Interpolator::cubic_lagrange ? cubic_lagrange(x, position)
                                                : windowed_sinc(x, position);
}

bool interpolation_valid(std::size_t size, double position, Interpolator kind) {
    const double hw = interpolator_half_width(kind);
    return position - hw + 1.0 >= 0.0 && position + hw < static_cast<double>(size);
}

}  // namespace imdd

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "imdd/channel.hpp"
#include "imdd/clockrec.hpp"
#include "imdd/ffe.hpp"

using namespace imdd;

namespace {

struct Shaped {
    std::vector<double> symbols;
    SampledSignal x;
};

// Noiseless RRC-shaped PAM2 at 2 samples/symbol; symbol k sits at sample 2k.
Shaped shaped_pam2(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Shaped s;
    for (std::size_t k = 0; k < n; ++k) s.symbols.push_back((rng() & 1) ? 1.0 : -1.0);
    s.x = fir_filter(upsample(s.symbols, 2, 30e9), rrc_taps(0.3, 16, 2), FilterMode::same);
    return s;
}

double wrap(double ui) { return ui - std::floor(ui + 0.5); }

// Timing error in UI of recovered sample m, given the block estimate mu used
// there and the known offset applied by clock_offset.
double true_error(double m, double mu, double ppm, double phase_ui) {
    const double ratio = 1.0 + ppm * 1e-6;
    return wrap(((m + 2.0 * mu) * ratio + 2.0 * phase_ui - m) / 2.0);
}

RecoveryConfig cfg_default() { return RecoveryConfig{1024, 4, Interpolator::cubic_lagrange, 0.0}; }

}  // namespace

TEST(Interpolate, CubicLagrangeExactOnCubics) {
    std::vector<double> x;
    auto f = [](double t) { return 0.1 * t * t * t - 2.0 * t * t + t - 4.0; };
    for (int i = 0; i < 40; ++i) x.push_back(f(i));
    for (double pos = 2.0; pos < 36.0; pos += 0.137)
        EXPECT_NEAR(interpolate_at(x, pos, Interpolator::cubic_lagrange), f(pos), 1e-9);
    EXPECT_TRUE(interpolation_valid(40, 10.5, Interpolator::cubic_lagrange));
    EXPECT_FALSE(interpolation_valid(40, 0.5, Interpolator::cubic_lagrange));
}

TEST(Interpolate, IntegerPositionsReturnSamples) {
    std::vector<double> x = {1, -2, 3, 4, 5, -6, 7, 8};
    for (auto kind : {Interpolator::cubic_lagrange, Interpolator::windowed_sinc})
        for (int i = 0; i < 8; ++i) EXPECT_NEAR(interpolate_at(x, i, kind), x[i], 1e-12);
    EXPECT_EQ(parse_interpolator("windowed-sinc"), Interpolator::windowed_sinc);
    EXPECT_EQ(to_string(Interpolator::cubic_lagrange), "cubic-lagrange");
    EXPECT_THROW(parse_interpolator("linear"), Error);
}

TEST(Unwrap, TowardPrevious) {
    EXPECT_DOUBLE_EQ(unwrap_toward(-0.45, 0.4), 0.55);
    EXPECT_DOUBLE_EQ(unwrap_toward(0.45, -0.4), -0.55);
    EXPECT_DOUBLE_EQ(unwrap_toward(0.1, 0.2), 0.1);
    // Exactly half a UI apart stays where it is, i.e. on the previous side.
    EXPECT_DOUBLE_EQ(unwrap_toward(-0.25, 0.25), -0.25);
    EXPECT_DOUBLE_EQ(unwrap_toward(2.3, 0.0), 0.3);
}

TEST(TimingEstimate, AlignedShapedInputIsNearZero) {
    const auto s = shaped_pam2(1024, 1);
    const auto est = timing_estimate(s.x, cfg_default());
    EXPECT_LT(std::abs(est.mu_ui), 0.01);
}

TEST(TimingEstimate, SweepOfPhases) {
    const auto s = shaped_pam2(1024 + 64, 2);
    for (double phase : {0.1, 0.25, 0.4, 0.6, 0.9}) {
        auto y = clock_offset(s.x, 0.0, phase, 2);
        y.samples.resize(2048);
        const auto est = timing_estimate(y, cfg_default());
        EXPECT_NEAR(wrap(est.mu_ui + phase), 0.0, 0.02) << "phase " << phase;
    }
}

TEST(TimingEstimate, ScaleInvariant) {
    auto s = shaped_pam2(1024, 3);
    auto y = clock_offset(s.x, 0.0, 0.3, 2);
    y.samples.resize(2048);
    const auto a = timing_estimate(y, cfg_default());
    for (double& v : y.samples) v *= 7.5;
    EXPECT_NEAR(timing_estimate(y, cfg_default()).mu_ui, a.mu_ui, 1e-12);
}

TEST(TimingEstimate, RejectsWrongLengthAndConfig) {
    const auto s = shaped_pam2(512, 4);
    EXPECT_THROW(timing_estimate(s.x, cfg_default()), Error);
    RecoveryConfig bad = cfg_default();
    bad.internal_oversampling = 2;
    EXPECT_THROW(bad.validate(), Error);
    bad = cfg_default();
    bad.block_len_symbols = 32;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(TimingCorrect, ZeroIsIdentityAndLoopConverges) {
    const auto s = shaped_pam2(1024, 5);
    const auto same = timing_correct(s.x, TimingEstimate{}, cfg_default());
    EXPECT_EQ(same.signal.samples, s.x.samples);

    auto y = clock_offset(s.x, 0.0, 0.3, 2);
    y.samples.resize(2048);
    const auto est = timing_estimate(y, cfg_default());
    const auto fixed = timing_correct(y, est, cfg_default());
    const auto again = timing_estimate(fixed.signal, cfg_default());
    EXPECT_LT(std::abs(again.mu_ui), 0.02);
    EXPECT_GT(fixed.valid_begin, 0u);
    EXPECT_LE(fixed.valid_end, y.size());
    EXPECT_THROW(timing_correct(y, TimingEstimate{0.5, 0.0}, cfg_default()), Error);
}

TEST(TimingCorrect, HalfSampleMatchesSpectralDelay) {
    // Band-limited periodic signal; the exact half-sample shift is done on
    // its DFT coefficients.
    const int n = 512;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    std::vector<double> a(40), b(40);
    for (int i = 0; i < 40; ++i) {
        a[i] = g(rng);
        b[i] = g(rng);
    }
    auto f = [&](double t) {
        double v = 0.0;
        for (int i = 1; i <= 40; ++i) {
            const double w = 2.0 * std::numbers::pi * i * t / n;  // up to 40/512 of fs
            v += a[i - 1] * std::cos(w) + b[i - 1] * std::sin(w);
        }
        return v;
    };
    SampledSignal x;
    for (int m = 0; m < 4 * n; ++m) x.samples.push_back(f(m));
    for (auto kind : {Interpolator::windowed_sinc, Interpolator::cubic_lagrange}) {
        RecoveryConfig c = cfg_default();
        c.interpolator = kind;
        const auto y = timing_correct(x, TimingEstimate{0.25, 0.0}, c);
        double worst = 0.0, scale = 0.0;
        for (std::size_t m = y.valid_begin + 64; m + 64 < y.valid_end; ++m) {
            worst = std::max(worst, std::abs(y.signal.samples[m] - f(m + 0.5)));
            scale = std::max(scale, std::abs(f(m + 0.5)));
        }
        EXPECT_LT(worst / scale, 1e-3) << to_string(kind);
    }
}

TEST(Recover, ConstantPhaseResidualError) {
    const auto s = shaped_pam2(16 * 1024, 7);
    const auto y = clock_offset(s.x, 0.0, 0.3, 2);
    const auto r = recover(y, cfg_default());
    double se = 0.0;
    for (std::size_t b = 0; b < r.block_mu_ui.size(); ++b) {
        const double e = true_error(r.block_center_sample[b], r.block_mu_ui[b], 0.0, 0.3);
        se += e * e;
    }
    EXPECT_LT(std::sqrt(se / r.block_mu_ui.size()), 0.02);
}

TEST(Recover, TracksDriftContinuously) {
    const auto s = shaped_pam2(64 * 1024, 8);
    for (double ppm : {100.0, -100.0, 200.0}) {
        const auto y = clock_offset(s.x, ppm, 0.1, 2);
        const auto r = recover(y, cfg_default());
        EXPECT_NEAR(r.drift_ppm, ppm, 0.1 * std::abs(ppm));
        for (std::size_t b = 1; b < r.block_mu_ui.size(); ++b)
            EXPECT_LT(std::abs(r.block_mu_ui[b] - r.block_mu_ui[b - 1]), 0.5);
        double se = 0.0;
        for (std::size_t b = 0; b < r.block_mu_ui.size(); ++b) {
            const double e = true_error(r.block_center_sample[b], r.block_mu_ui[b], ppm, 0.1);
            se += e * e;
        }
        EXPECT_LT(std::sqrt(se / r.block_mu_ui.size()), 0.02) << ppm;
    }
}

TEST(Recover, AlignedInputIsNearlyUnchanged) {
    const auto s = shaped_pam2(8 * 1024, 9);
    const auto r = recover(s.x, cfg_default());
    double worst = 0.0;
    for (std::size_t m = r.corrected.valid_begin; m < r.corrected.valid_end; ++m)
        worst = std::max(worst, std::abs(r.corrected.signal.samples[m] - s.x.samples[m]));
    EXPECT_LT(worst, 0.02);
}

TEST(Recover, ErrorFreeDecisionsAfterRecovery) {
    const auto s = shaped_pam2(32 * 1024, 10);
    for (double ppm : {0.0, 50.0, -100.0})
        for (double phase : {0.1, 0.4}) {
            const auto y = clock_offset(s.x, ppm, phase, 2);
            const auto r = recover(y, cfg_default());
            const auto bits = downsample_decide(r.corrected.signal.samples);
            // Recovered sample 2j carries some symbol k = j + slip; find the slip
            // on a prefix then count mismatches in the valid region.
            const std::size_t j0 = r.corrected.valid_begin / 2 + 64, j1 = r.corrected.valid_end / 2 - 64;
            int best_slip = 0;
            std::size_t best = SIZE_MAX;
            for (int slip = -4; slip <= 4; ++slip) {
                std::size_t err = 0;
                for (std::size_t j = j0; j < j0 + 2000; ++j) err += bits[j] != (s.symbols[j + slip] > 0);
                if (err < best) {
                    best = err;
                    best_slip = slip;
                }
            }
            std::size_t errors = 0;
            for (std::size_t j = j0; j < j1 && j + best_slip < s.symbols.size(); ++j)
                errors += bits[j] != (s.symbols[j + best_slip] > 0);
            EXPECT_EQ(errors, 0u) << "ppm " << ppm << " phase " << phase;
        }
}

TEST(Recover, NeedsTwoBlocks) {
    const auto s = shaped_pam2(1500, 1);
    EXPECT_THROW(recover(s.x, cfg_default()), Error);
}

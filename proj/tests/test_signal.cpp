#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "imdd/signal.hpp"

using namespace imdd;

namespace {

// Shift register stepped one bit at a time, stored as an array of cells.
// Cell 1 is the newest bit. Feedback for x^7 + x^6 + 1 is cell7 ^ cell6.
std::vector<int> hand_lfsr7(int n) {
    int cell[8] = {0, 1, 1, 1, 1, 1, 1, 1};
    std::vector<int> out;
    for (int i = 0; i < n; ++i) {
        const int fb = cell[7] ^ cell[6];
        for (int c = 7; c > 1; --c) cell[c] = cell[c - 1];
        cell[1] = fb;
        out.push_back(fb);
    }
    return out;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

}  // namespace

TEST(Prbs, Degree7MatchesHandSteppedRegister) {
    const auto bits = prbs_generate(7, prbs_all_ones(7), 16);
    const auto oracle = hand_lfsr7(16);
    ASSERT_EQ(bits.size(), 16u);
    for (int i = 0; i < 16; ++i) EXPECT_EQ(bits[i], oracle[i]) << "bit " << i;
    // With all ones loaded the first feedback bits are zero until a zero reaches tap 6.
    const std::vector<int> expected = {0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0};
    for (int i = 0; i < 16; ++i) EXPECT_EQ(bits[i], expected[i]);
}

TEST(Prbs, PeriodIsMaximal) {
    for (int degree : {7, 15}) {
        const std::size_t period = (std::size_t{1} << degree) - 1;
        const auto bits = prbs_generate(degree, 0x5a5a & ((1u << degree) - 1), 2 * period);
        for (std::size_t i = 0; i < period; ++i) ASSERT_EQ(bits[i], bits[i + period]);
        // No shorter period dividing 2^d - 1 (127 is prime; 32767 = 7*31*151).
        for (std::size_t p : {std::size_t{7}, std::size_t{31}, std::size_t{151}, std::size_t{217}, std::size_t{1057},
                              std::size_t{4681}}) {
            if (p >= period || period % p) continue;
            bool same = true;
            for (std::size_t i = 0; i + p < 2 * period && same; ++i) same = bits[i] == bits[i + p];
            EXPECT_FALSE(same) << "period " << p;
        }
    }
}

TEST(Prbs, Degree15IsBalanced) {
    const auto bits = prbs_generate(15, prbs_all_ones(15), 32767);
    std::size_t ones = 0;
    for (auto b : bits) ones += b;
    EXPECT_EQ(ones, 16384u);
    EXPECT_EQ(bits.size() - ones, 16383u);
}

TEST(Prbs, AutocorrelationIsMinusOne) {
    const std::size_t period = 127;
    const auto sym = pam2_map(prbs_generate(7, 1, period));
    for (std::size_t lag = 1; lag < period; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i < period; ++i) acc += sym[i] * sym[(i + lag) % period];
        EXPECT_EQ(acc, -1.0) << "lag " << lag;
    }
}

TEST(Prbs, Degree23And31Run) {
    EXPECT_EQ(prbs_generate(23, prbs_all_ones(23), 1000).size(), 1000u);
    EXPECT_EQ(prbs_generate(31, 12345, 1000).size(), 1000u);
}

TEST(Prbs, RejectsBadArguments) {
    EXPECT_THROW(prbs_generate(15, 0, 10), Error);
    EXPECT_THROW(prbs_generate(15, 0x8000, 10), Error);  // only bits above the register
    EXPECT_THROW(prbs_generate(9, 1, 10), Error);
    EXPECT_THROW(prbs_generate(15, 1, 0), Error);
}

TEST(Prbs, Deterministic) { EXPECT_EQ(prbs_generate(23, 99, 5000), prbs_generate(23, 99, 5000)); }

TEST(Pam2, MapsBits) {
    const BitSequence bits = {0, 1, 1, 0};
    EXPECT_EQ(pam2_map(bits), (SymbolSequence{-1, 1, 1, -1}));
    EXPECT_TRUE(pam2_map(BitSequence{}).empty());
    const auto p = prbs_generate(15, prbs_all_ones(15), 8);
    const auto s = pam2_map(p);
    for (int i = 0; i < 8; ++i) EXPECT_EQ(s[i], p[i] ? 1.0 : -1.0);
}

TEST(Upsample, ZeroInsertion) {
    const SymbolSequence s = {1, -1};
    const auto u = upsample(s, 2, 30e9);
    EXPECT_EQ(u.samples, (std::vector<double>{1, 0, -1, 0}));
    EXPECT_EQ(u.sample_rate_hz, 60e9);
    EXPECT_EQ(upsample(SymbolSequence{0.3}, 1, 1.0).samples, (std::vector<double>{0.3}));
    EXPECT_THROW(upsample(s, 0, 1.0), Error);
}

TEST(Upsample, PreservesEnergyAndInvertsDownsample) {
    const auto x = random_vector(257, 3);
    for (int sps : {1, 2, 3, 8}) {
        const auto u = upsample(x, sps, 1.0);
        double e_in = 0.0, e_out = 0.0;
        for (double v : x) e_in += v * v;
        for (double v : u.samples) e_out += v * v;
        EXPECT_DOUBLE_EQ(e_in, e_out);
        EXPECT_EQ(downsample(u.samples, sps, 0), x);
    }
}

TEST(NrzHold, RepeatsSymbols) {
    const auto h = nrz_hold(SymbolSequence{1, -1, 1}, 2, 30e9);
    EXPECT_EQ(h.samples, (std::vector<double>{1, 1, -1, -1, 1, 1}));
}

TEST(Rrc, CenterTapClosedForm) {
    const double a = 0.3;
    EXPECT_NEAR(rrc_impulse(0.0, a), 1.0 - a + 4.0 * a / std::numbers::pi, 1e-15);
    EXPECT_NEAR(rrc_impulse(0.0, a), 1.0 - a + 4.0 * a / std::numbers::pi, 1e-12);
}

TEST(Rrc, SingularPointUsesLimit) {
    for (double a : {0.25, 0.3, 0.5}) {
        const double ts = 1.0 / (4.0 * a);
        const double at = rrc_impulse(ts, a);
        // The function is continuous: compare with points approaching from both sides.
        const double left = rrc_impulse(ts - 1e-6, a), right = rrc_impulse(ts + 1e-6, a);
        EXPECT_NEAR(at, 0.5 * (left + right), 1e-5);
        EXPECT_NEAR(rrc_impulse(-ts, a), at, 1e-15);
    }
}

TEST(Rrc, TapsSymmetricUnitEnergyPeakCentered) {
    for (double a : {0.1, 0.3, 1.0}) {
        const auto t = rrc_taps(a, 16, 2);
        ASSERT_EQ(t.size(), 33u);
        double e = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            EXPECT_EQ(t[i], t[t.size() - 1 - i]);
            EXPECT_LE(std::abs(t[i]), t[16]);
            e += t[i] * t[i];
        }
        EXPECT_NEAR(e, 1.0, 1e-12);
    }
    EXPECT_THROW(rrc_taps(0.0, 16, 2), Error);
    EXPECT_THROW(rrc_taps(0.3, 15, 2), Error);
    EXPECT_THROW(rrc_taps(0.3, 16, 1), Error);
}

TEST(Rrc, CascadeIsNyquist) {
    // Long span so truncation does not dominate the residual ISI.
    const auto t = rrc_taps(0.3, 64, 2);
    // Raised cosine by direct convolution, sampled every sps samples.
    std::vector<double> rc(2 * t.size() - 1, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j) rc[i + j] += t[i] * t[j];
    const std::size_t c = t.size() - 1;
    const double main = rc[c];
    for (std::size_t k = 2; k <= c; k += 2) {
        EXPECT_LE(std::abs(rc[c + k]) / main, 1e-3) << "symbol " << k / 2;
        EXPECT_LE(std::abs(rc[c - k]) / main, 1e-3);
    }
}

TEST(Fir, IdentityAndMovingAverage) {
    const auto x = random_vector(50, 1);
    const std::vector<double> one = {1.0};
    EXPECT_EQ(fir_filter(SampledSignal{x, 1.0}, one).samples, x);
    const auto y = fir_filter(SampledSignal{{1, 1, 1, 1}, 1.0}, std::vector<double>{0.5, 0.5});
    ASSERT_EQ(y.size(), 4u);
    for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(y.samples[i], 1.0);
}

TEST(Fir, MatchesDirectSummation) {
    const auto x = random_vector(300, 7);
    const auto h = random_vector(32, 8);
    const auto full = fir_filter(SampledSignal{x, 1.0}, h, FilterMode::full);
    const auto same = fir_filter(SampledSignal{x, 1.0}, h, FilterMode::same);
    ASSERT_EQ(full.size(), x.size() + h.size() - 1);
    ASSERT_EQ(same.size(), x.size());
    for (std::size_t n = 0; n < full.size(); ++n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k)
            if (n >= k && n - k < x.size()) acc += h[k] * x[n - k];
        EXPECT_NEAR(full.samples[n], acc, 1e-12);
    }
    const std::size_t delay = (h.size() - 1) / 2;
    for (std::size_t n = 0; n < same.size(); ++n) EXPECT_EQ(same.samples[n], full.samples[n + delay]);
    EXPECT_THROW(fir_filter(SampledSignal{x, 1.0}, std::vector<double>{}), Error);
}

TEST(Fir, Linear) {
    const auto x = random_vector(200, 11), y = random_vector(200, 12), h = random_vector(17, 13);
    const double a = 1.7, b = -0.4;
    std::vector<double> mix(200);
    for (std::size_t i = 0; i < 200; ++i) mix[i] = a * x[i] + b * y[i];
    const auto fm = fir_filter(SampledSignal{mix, 1.0}, h);
    const auto fx = fir_filter(SampledSignal{x, 1.0}, h), fy = fir_filter(SampledSignal{y, 1.0}, h);
    for (std::size_t i = 0; i < 200; ++i) EXPECT_NEAR(fm.samples[i], a * fx.samples[i] + b * fy.samples[i], 1e-12);
}

TEST(Lowpass, UnitDcGainAndSymmetric) {
    const auto t = lowpass_taps(0.2, 24);
    ASSERT_EQ(t.size(), 49u);
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        s += t[i];
        EXPECT_NEAR(t[i], t[t.size() - 1 - i], 1e-15);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_THROW(lowpass_taps(0.5, 8), Error);
}

TEST(Normalize, ZeroMeanUnitVariance) {
    std::vector<double> alt(1000);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 2.0 : 0.0;
    const auto n = normalize(SampledSignal{alt, 1.0});
    for (std::size_t i = 0; i < alt.size(); ++i) EXPECT_NEAR(n.samples[i], i % 2 ? 1.0 : -1.0, 1e-12);

    const auto x = random_vector(5000, 21);
    const auto y = normalize(SampledSignal{x, 1.0});
    EXPECT_NEAR(mean(y.samples), 0.0, 1e-12);
    EXPECT_NEAR(variance(y.samples), 1.0, 1e-9);
    const auto yy = normalize(y);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(yy.samples[i], y.samples[i], 1e-9);

    std::vector<double> affine(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) affine[i] = 3.5 * x[i] - 12.0;
    const auto z = normalize(SampledSignal{affine, 1.0});
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(z.samples[i], y.samples[i], 1e-9);

    EXPECT_THROW(normalize(SampledSignal{{1.0, 1.0, 1.0}, 1.0}), Error);
    EXPECT_THROW(normalize(SampledSignal{{1.0}, 1.0}), Error);
}

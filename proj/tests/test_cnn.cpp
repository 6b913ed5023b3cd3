#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "imdd/cnn.hpp"

using namespace imdd;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

CnnModel randomized(const CnnConfig& cfg, std::uint64_t seed) {
    CnnModel m = CnnModel::he_init(cfg, seed);
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& l : m.layers) {
        for (auto& b : l.bias) b = u(rng);
        if (l.bn)
            for (std::size_t c = 0; c < l.bn->gamma.size(); ++c) {
                l.bn->gamma[c] = 1.0 + u(rng);
                l.bn->beta[c] = u(rng);
                l.bn->running_mean[c] = u(rng);
                l.bn->running_var[c] = 0.3 + std::abs(u(rng));
            }
    }
    return m;
}

// Direct evaluation of one output sample from the definition: every layer
// output position p reads inputs p*stride - pad + k, zero outside the signal.
std::vector<double> oracle_forward(const CnnModel& m, const std::vector<double>& x) {
    std::vector<std::vector<double>> act = {x};
    for (const auto& layer : m.layers) {
        const auto& s = layer.spec;
        const long long in_len = static_cast<long long>(act[0].size());
        const long long out_len = in_len / s.stride;
        const long long pad = (s.kernel - s.stride + 1) / 2;
        std::vector<std::vector<double>> next(s.out_ch, std::vector<double>(out_len));
        for (int o = 0; o < s.out_ch; ++o)
            for (long long p = 0; p < out_len; ++p) {
                double v = layer.bias[o];
                for (int i = 0; i < s.in_ch; ++i)
                    for (int k = 0; k < s.kernel; ++k) {
                        const long long idx = p * s.stride - pad + k;
                        if (idx >= 0 && idx < in_len) v += layer.weights[(o * s.in_ch + i) * s.kernel + k] * act[i][idx];
                    }
                if (layer.bn) {
                    const auto& bn = *layer.bn;
                    v = (v - bn.running_mean[o]) / std::sqrt(bn.running_var[o] + bn.eps) * bn.gamma[o] + bn.beta[o];
                }
                if (s.bn_relu) v = std::max(v, 0.0);
                next[o][p] = v;
            }
        act = std::move(next);
    }
    std::vector<double> out;
    for (std::size_t p = 0; p < act[0].size(); ++p)
        for (const auto& ch : act) out.push_back(ch[p]);
    return out;
}

}  // namespace

TEST(CnnConfig, DemonstratorTopology) {
    const auto c = CnnConfig::demonstrator();
    ASSERT_EQ(c.layers.size(), 3u);
    EXPECT_EQ(c.layers[0], (LayerSpec{1, 5, 9, 8, true}));
    EXPECT_EQ(c.layers[1], (LayerSpec{5, 5, 9, 1, true}));
    EXPECT_EQ(c.layers[2], (LayerSpec{5, 8, 9, 1, false}));
    EXPECT_EQ(c.total_stride(), 8);
    // (9-1)*1 + (9-1)*8 + (9-1)*8
    EXPECT_EQ(c.receptive_margin(), 136);
}

TEST(CnnConfig, RejectsInconsistentTopologies) {
    CnnConfig c = CnnConfig::demonstrator();
    c.layers[1].in_ch = 4;
    EXPECT_THROW(c.validate(), Error);
    c = CnnConfig::demonstrator();
    c.layers[2].out_ch = 7;  // final channels must equal the stride
    EXPECT_THROW(c.validate(), Error);
    c = CnnConfig::demonstrator();
    c.layers[0].kernel = 8;
    EXPECT_THROW(c.validate(), Error);
    c = CnnConfig::demonstrator();
    c.layers[0].stride = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(MacCount, HandCount) {
    EXPECT_DOUBLE_EQ(mac_count(CnnConfig::demonstrator()), (45.0 + 225.0 + 360.0) / 4.0);
    EXPECT_DOUBLE_EQ(mac_count(CnnConfig::demonstrator()), 157.5);
    CnnConfig one;
    one.layers = {{1, 8, 9, 8, false}};
    // One 1->8 layer: 72 MACs per position, 4 symbols per position.
    EXPECT_DOUBLE_EQ(mac_count(one), 72.0 / 4.0);
    CnnConfig wide = CnnConfig::demonstrator();
    wide.layers[0].out_ch = 10;
    wide.layers[1].in_ch = 10;
    wide.layers[1].out_ch = 10;
    wide.layers[2].in_ch = 10;
    EXPECT_DOUBLE_EQ(mac_count(wide), (90.0 + 900.0 + 720.0) / 4.0);
}

TEST(DepthToSequence, Interleaves) {
    const std::vector<int> fm = {0, 1, 2, 10, 11, 12};  // 2 channels, 3 positions
    EXPECT_EQ(depth_to_sequence<int>(fm, 2, 3), (std::vector<int>{0, 10, 1, 11, 2, 12}));
}

TEST(CnnForward, ZeroModelGivesZero) {
    const auto m = CnnModel::zeros(CnnConfig::demonstrator());
    const auto y = cnn_forward(m, SampledSignal{random_vector(1024, 1), 60e9});
    ASSERT_EQ(y.size(), 1024u);
    for (double v : y.samples) EXPECT_EQ(v, 0.0);
}

TEST(CnnForward, MatchesDirectOracle) {
    const auto m = randomized(CnnConfig::demonstrator(), 5);
    const auto x = random_vector(1024, 6);
    const auto y = cnn_forward(m, SampledSignal{x, 60e9});
    const auto o = oracle_forward(m, x);
    ASSERT_EQ(y.size(), x.size());
    ASSERT_EQ(o.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.samples[i], o[i], 1e-12);
}

TEST(CnnForward, IdentityNetworkReproducesInput) {
    // Layer 1 picks input sample p*8+c into channel c (pad 1, so tap c+1);
    // layers 2 and 3 pass each channel through their centre tap.
    CnnConfig cfg;
    cfg.layers = {{1, 8, 9, 8, false}, {8, 8, 9, 1, false}, {8, 8, 9, 1, false}};
    CnnModel m = CnnModel::zeros(cfg);
    for (int c = 0; c < 8; ++c) {
        m.layers[0].w(c, 0, c + 1) = 1.0;
        m.layers[1].w(c, c, 4) = 1.0;
        m.layers[2].w(c, c, 4) = 1.0;
    }
    const auto x = random_vector(512, 9);
    EXPECT_EQ(cnn_forward(m, SampledSignal{x, 1.0}).samples, x);
}

TEST(CnnForward, RejectsBadLengths) {
    const auto m = CnnModel::he_init(CnnConfig::demonstrator(), 1);
    EXPECT_THROW(cnn_forward(m, SampledSignal{std::vector<double>(128), 1.0}), Error);  // < margin
    EXPECT_THROW(cnn_forward(m, SampledSignal{std::vector<double>(1001), 1.0}), Error);
}

TEST(HeInit, BoundsAndDeterminism) {
    const auto a = CnnModel::he_init(CnnConfig::demonstrator(), 3);
    const auto b = CnnModel::he_init(CnnConfig::demonstrator(), 3);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        EXPECT_EQ(a.layers[l].weights, b.layers[l].weights);
        const auto& s = a.layers[l].spec;
        const double bound = std::sqrt(6.0 / (s.in_ch * s.kernel));
        for (double w : a.layers[l].weights) EXPECT_LE(std::abs(w), bound);
        for (double v : a.layers[l].bias) EXPECT_EQ(v, 0.0);
        if (a.layers[l].bn) {
            for (double g : a.layers[l].bn->gamma) EXPECT_EQ(g, 1.0);
            for (double v : a.layers[l].bn->beta) EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(BnFold, EquivalentOnRandomInput) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto m = randomized(CnnConfig::demonstrator(), seed);
        const auto f = bn_fold(m);
        EXPECT_FALSE(f.has_batch_norm());
        const SampledSignal x{random_vector(10000, seed + 10), 60e9};
        const auto a = cnn_forward(m, SampledSignal{{x.samples.begin(), x.samples.begin() + 10000 / 8 * 8}, 60e9});
        const auto b = cnn_forward(f, SampledSignal{{x.samples.begin(), x.samples.begin() + 10000 / 8 * 8}, 60e9});
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.samples[i] - b.samples[i]));
        EXPECT_LT(worst, 1e-6);
    }
}

TEST(BnFold, IdentityBnLeavesWeightsAndSecondFoldIsNoop) {
    CnnModel m = CnnModel::he_init(CnnConfig::demonstrator(), 4);
    for (auto& l : m.layers)
        if (l.bn) l.bn->running_var.assign(l.bn->running_var.size(), 1.0 - l.bn->eps);
    const auto f = bn_fold(m);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        for (std::size_t i = 0; i < m.layers[l].weights.size(); ++i)
            EXPECT_NEAR(f.layers[l].weights[i], m.layers[l].weights[i], 1e-15);
    }
    const auto ff = bn_fold(f);
    for (std::size_t l = 0; l < f.layers.size(); ++l) {
        EXPECT_EQ(ff.layers[l].weights, f.layers[l].weights);
        EXPECT_EQ(ff.layers[l].bias, f.layers[l].bias);
    }
}

TEST(BnFold, FormulaPerChannel) {
    const auto m = randomized(CnnConfig::demonstrator(), 12);
    const auto f = bn_fold(m);
    const auto& src = m.layers[0];
    const auto& bn = *src.bn;
    for (int o = 0; o < src.spec.out_ch; ++o) {
        const double s = bn.gamma[o] / std::sqrt(bn.running_var[o] + bn.eps);
        EXPECT_NEAR(f.layers[0].bias[o], (src.bias[o] - bn.running_mean[o]) * s + bn.beta[o], 1e-14);
        for (int k = 0; k < src.spec.kernel; ++k) EXPECT_NEAR(f.layers[0].w(o, 0, k), src.w(o, 0, k) * s, 1e-14);
    }
}

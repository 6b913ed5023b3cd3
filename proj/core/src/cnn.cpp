#include "imdd/cnn.hpp"

#include <cmath>
#include <random>

namespace imdd {

CnnConfig CnnConfig::demonstrator() {
    return CnnConfig{{
        {1, 5, 9, 8, true},
        {5, 5, 9, 1, true},
        {5, 8, 9, 1, false},
    }};
}

void CnnConfig::validate() const {
    if (layers.empty()) throw Error("cnn", "config has no layers");
    if (layers.front().in_ch != 1) throw Error("cnn", "first layer must take one input channel");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.in_ch < 1 || l.out_ch < 1) throw Error("cnn", "channel counts must be >= 1");
        if (l.kernel < 1 || l.kernel % 2 == 0) throw Error("cnn", "kernel must be odd");
        if (l.stride < 1) throw Error("cnn", "stride must be >= 1");
        if (l.kernel < l.stride) throw Error("cnn", "kernel must cover the stride");
        if (i > 0 && layers[i - 1].out_ch != l.in_ch) throw Error("cnn", "adjacent channel counts do not chain");
    }
    if (layers.back().out_ch != total_stride())
        throw Error("cnn", "final out_ch must equal the total stride for depth-to-sequence");
}

int CnnConfig::total_stride() const {
    int s = 1;
    for (const auto& l : layers) s *= l.stride;
    return s;
}

int CnnConfig::receptive_margin() const {
    int margin = 0;
    int stride_product = 1;
    for (const auto& l : layers) {
        margin += (l.kernel - 1) * stride_product;
        stride_product *= l.stride;
    }
    return margin;
}

BatchNorm BatchNorm::identity(int channels) {
    BatchNorm bn;
    bn.gamma.assign(channels, 1.0);
    bn.beta.assign(channels, 0.0);
    bn.running_mean.assign(channels, 0.0);
    bn.running_var.assign(channels, 1.0);
    return bn;
}

CnnModel CnnModel::zeros(const CnnConfig& config) {
    config.validate();
    CnnModel m;
    m.config = config;
    for (const auto& spec : config.layers) {
        ConvLayer layer;
        layer.spec = spec;
        layer.weights.assign(static_cast<std::size_t>(spec.out_ch) * spec.in_ch * spec.kernel, 0.0);
        layer.bias.assign(spec.out_ch, 0.0);
        if (spec.bn_relu) layer.bn = BatchNorm::identity(spec.out_ch);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

CnnModel CnnModel::he_init(const CnnConfig& config, std::uint64_t seed) {
    CnnModel m = zeros(config);
    std::mt19937_64 rng(seed);
    for (auto& layer : m.layers) {
        const double bound = std::sqrt(6.0 / (layer.spec.in_ch * layer.spec.kernel));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : layer.weights) w = dist(rng);
    }
    return m;
}

bool CnnModel::has_batch_norm() const {
    for (const auto& l : layers)
        if (l.bn) return true;
    return false;
}

void CnnModel::validate() const {
    config.validate();
    if (layers.size() != config.layers.size()) throw Error("cnn", "model/config layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const ConvLayer& l = layers[i];
        const LayerSpec& s = config.layers[i];
        if (!(l.spec == s)) throw Error("cnn", "layer spec differs from config");
        if (l.weights.size() != static_cast<std::size_t>(s.out_ch) * s.in_ch * s.kernel ||
            l.bias.size() != static_cast<std::size_t>(s.out_ch))
            throw Error("cnn", "parameter tensor has wrong size");
        if (l.bn) {
            const auto n = static_cast<std::size_t>(s.out_ch);
            if (l.bn->gamma.size() != n || l.bn->beta.size() != n || l.bn->running_mean.size() != n ||
                l.bn->running_var.size() != n)
                throw Error("cnn", "batch-norm tensor has wrong size");
            for (double v : l.bn->running_var)
                if (!(v >= 0.0)) throw Error("cnn", "batch-norm variance must be >= 0");
        }
        for (double v : l.weights)
            if (!std::isfinite(v)) throw Error("cnn", "non-finite weight");
    }
}

namespace detail {

std::vector<double> conv1d(const ConvLayer& layer, std::span<const double> in, std::size_t in_len) {
    const LayerSpec& s = layer.spec;
    const std::size_t out_len = in_len / s.stride;
    const long long pad = s.pad_left();
    std::vector<double> out(static_cast<std::size_t>(s.out_ch) * out_len);
    for (int o = 0; o < s.out_ch; ++o) {
        double* dst = &out[o * out_len];
        for (std::size_t p = 0; p < out_len; ++p) {
            double acc = layer.bias[o];
            const long long start = static_cast<long long>(p) * s.stride - pad;
            for (int i = 0; i < s.in_ch; ++i) {
                const double* src = &in[i * in_len];
                const double* w = &layer.weights[(o * s.in_ch + i) * s.kernel];
                for (int k = 0; k < s.kernel; ++k) {
                    const long long idx = start + k;
                    if (idx >= 0 && idx < static_cast<long long>(in_len)) acc += w[k] * src[idx];
                }
            }
            dst[p] = acc;
        }
    }
    return out;
}

}  // namespace detail

SampledSignal cnn_forward(const CnnModel& model, const SampledSignal& x) {
    model.validate();
    const std::size_t stride = static_cast<std::size_t>(model.config.total_stride());
    if (x.size() < static_cast<std::size_t>(model.config.receptive_margin()))
        throw Error("cnn_forward", "input shorter than the receptive margin");
    if (x.size() % stride != 0) throw Error("cnn_forward", "input length must be a multiple of the total stride");

    std::vector<double> act = x.samples;
    std::size_t len = x.size();
    for (const ConvLayer& layer : model.layers) {
        act = detail::conv1d(layer, act, len);
        len /= layer.spec.stride;
        if (layer.bn) {
            const BatchNorm& bn = *layer.bn;
            for (int c = 0; c < layer.spec.out_ch; ++c) {
                const double scale = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.eps);
                for (std::size_t p = 0; p < len; ++p) {
                    double& v = act[c * len + p];
                    v = (v - bn.running_mean[c]) * scale + bn.beta[c];
                }
            }
        }
        if (layer.spec.bn_relu)
            for (double& v : act) v = v > 0.0 ? v : 0.0;
    }

    SampledSignal out;
    out.sample_rate_hz = x.sample_rate_hz;
    out.samples = depth_to_sequence<double>(act, model.layers.back().spec.out_ch, len);
    return out;
}

CnnModel bn_fold(const CnnModel& model) {
    CnnModel folded = model;
    for (ConvLayer& layer : folded.layers) {
        if (!layer.bn) continue;
        const BatchNorm& bn = *layer.bn;
        const LayerSpec& s = layer.spec;
        for (int o = 0; o < s.out_ch; ++o) {
            const double scale = bn.gamma[o] / std::sqrt(bn.running_var[o] + bn.eps);
            for (int i = 0; i < s.in_ch; ++i)
                for (int k = 0; k < s.kernel; ++k) layer.w(o, i, k) *= scale;
            layer.bias[o] = (layer.bias[o] - bn.running_mean[o]) * scale + bn.beta[o];
        }
        layer.bn.reset();
    }
    return folded;
}

double mac_count(const CnnConfig& config, int sps) {
    config.validate();
    if (sps < 1) throw Error("mac_count", "sps must be >= 1");
    // Count per final-layer position; layer l runs prod(strides after l)
    // times per final position.
    double macs = 0.0;
    for (std::size_t l = 0; l < config.layers.size(); ++l) {
        int later_stride = 1;
        for (std::size_t j = l + 1; j < config.layers.size(); ++j) later_stride *= config.layers[j].stride;
        const LayerSpec& s = config.layers[l];
        macs += static_cast<double>(s.out_ch) * s.in_ch * s.kernel * later_stride;
    }
    const double symbols_per_position = static_cast<double>(config.total_stride()) / sps;
    return macs / symbols_per_position;
}

}  // namespace imdd

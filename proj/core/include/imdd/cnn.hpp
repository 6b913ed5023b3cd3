#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "imdd/signal.hpp"

namespace imdd {

/// One 1-D convolution. Layers with `bn_relu` are followed by batch
/// normalization and ReLU; the others are linear.
struct LayerSpec {
    int in_ch = 1;
    int out_ch = 1;
    int kernel = 9;
    int stride = 1;
    bool bn_relu = false;

    /// Zero padding ahead of the first window, so output position p reads
    /// input samples p*stride - pad_left() ... p*stride - pad_left() + kernel - 1.
    int pad_left() const { return (kernel - stride + 1) / 2; }
    bool operator==(const LayerSpec&) const = default;
};

/// Convolutional equalizer topology. The final layer's channel count equals
/// the total stride: each final-layer position emits its channels as that
/// many consecutive output samples (depth-to-sequence), so the network is
/// rate preserving.
struct CnnConfig {
    std::vector<LayerSpec> layers;

    /// 3 layers, kernel 9: (1->5, stride 8), (5->5), (5->8); BN+ReLU after
    /// the first two.
    static CnnConfig demonstrator();

    void validate() const;
    int total_stride() const;
    /// Receptive-field extent minus one, in input samples: sum over layers of
    /// (kernel-1) times the stride product of the preceding layers.
    int receptive_margin() const;
    bool operator==(const CnnConfig&) const = default;
};

struct BatchNorm {
    std::vector<double> gamma, beta, running_mean, running_var;
    double eps = 1e-5;

    static BatchNorm identity(int channels);
};

struct ConvLayer {
    LayerSpec spec;
    std::vector<double> weights;  // [out_ch][in_ch][kernel]
    std::vector<double> bias;     // [out_ch]
    std::optional<BatchNorm> bn;  // empty once folded

    double& w(int o, int i, int k) { return weights[(o * spec.in_ch + i) * spec.kernel + k]; }
    double w(int o, int i, int k) const { return weights[(o * spec.in_ch + i) * spec.kernel + k]; }
};

struct CnnModel {
    CnnConfig config;
    std::vector<ConvLayer> layers;

    /// He-uniform weights, zero bias, identity batch norm.
    static CnnModel he_init(const CnnConfig& config, std::uint64_t seed);
    static CnnModel zeros(const CnnConfig& config);

    bool has_batch_norm() const;
    void validate() const;
};

/// Inference forward pass (batch norm from running statistics). Input length
/// must be a multiple of the total stride and at least the receptive margin;
/// the output has the same length. Samples within the receptive margin of
/// either end see zero padding.
SampledSignal cnn_forward(const CnnModel& model, const SampledSignal& x);

/// Folds every batch-norm layer into the preceding convolution.
CnnModel bn_fold(const CnnModel& model);

/// Multiply-accumulates per recovered symbol at `sps` samples per symbol.
double mac_count(const CnnConfig& config, int sps = 2);

/// Reorders [channels][positions] into positions*channels consecutive samples.
template <typename T>
std::vector<T> depth_to_sequence(std::span<const T> feature_map, int channels, std::size_t positions) {
    std::vector<T> out(positions * static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < positions; ++p)
            out[p * channels + c] = feature_map[c * positions + p];
    return out;
}

namespace detail {

/// Float 1-D convolution over one window; `in` is [in_ch][in_len], the
/// result [out_ch][in_len/stride]. Bias is included.
std::vector<double> conv1d(const ConvLayer& layer, std::span<const double> in, std::size_t in_len);

}  // namespace detail

}  // namespace imdd

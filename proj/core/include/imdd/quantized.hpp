#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imdd/cnn.hpp"
#include "imdd/fixed_point.hpp"

namespace imdd {

struct QuantizedLayer {
    LayerSpec spec;
    std::vector<std::int32_t> weights;  // [out_ch][in_ch][kernel], weight_fmt
    std::vector<std::int32_t> bias;     // bias_fmt
    FixedPointFormat weight_fmt;
    FixedPointFormat bias_fmt;
    FixedPointFormat act_fmt;  // output of this layer
};

/// Integer-only CNN. Inputs are 6-bit ADC codes read as Q(6,5).
struct QuantizedModel {
    CnnConfig config;
    FixedPointFormat input_fmt{6, 5};
    std::vector<QuantizedLayer> layers;
    /// Per output channel of the last layer: the integer output carries
    /// y / 2^output_shift[c]. Empty means no shift.
    std::vector<int> output_shift;

    const FixedPointFormat& output_fmt() const { return layers.back().act_fmt; }
    void validate() const;
};

struct QuantizationReport {
    /// Channels scaled down by a power of two to fit the weight format.
    std::size_t rescaled_channels = 0;
    /// Layers rounded with error feedback from calibration data.
    std::size_t calibrated_layers = 0;
    std::size_t saturated_weights = 0;
    std::size_t saturated_biases = 0;
    std::vector<std::string> warnings;
};

/// Scales each output channel of a ReLU layer whose weights would saturate
/// `weight_fmt` down by 2^k and the matching input weights of the next layer
/// up by 2^k. ReLU(x / 2^k) = ReLU(x) / 2^k, so the float function is
/// unchanged (bit-exact, powers of two only). If `output_shift` is given the
/// last layer's channels are scaled down the same way and their k returned
/// there; decisions (signs) are unaffected.
CnnModel rebalance_for_format(const CnnModel& model, const FixedPointFormat& weight_fmt,
                              std::size_t* rescaled_channels = nullptr, std::vector<int>* output_shift = nullptr);

/// Rounds a BN-free model to fixed point after rebalance_for_format. Weights
/// use `weight_fmt`, biases `bias_fmt`, every layer output `act_fmt`.
QuantizedModel quantize_model(const CnnModel& model, const FixedPointFormat& weight_fmt,
                              const FixedPointFormat& act_fmt, const FixedPointFormat& bias_fmt,
                              QuantizationReport* report = nullptr);

/// As above, but weights are rounded one at a time with each rounding error
/// pushed onto the not yet rounded weights of the same output channel,
/// weighted by the input second moment seen on `calibration` (float model
/// inputs). Minimizes the output error on that data instead of the weight
/// error. An empty span gives round to nearest.
QuantizedModel quantize_model(const CnnModel& model, const FixedPointFormat& weight_fmt,
                              const FixedPointFormat& act_fmt, const FixedPointFormat& bias_fmt,
                              std::span<const double> calibration, QuantizationReport* report = nullptr);

/// Rows of `weights` ([out_ch][n]) rounded to `fmt` in index order; the error
/// of each is compensated on later entries through the inverse of the n x n
/// `covariance`. With a diagonal covariance this is round to nearest.
std::vector<double> round_with_error_feedback(std::span<const double> weights, int out_ch,
                                              std::span<const double> covariance, const FixedPointFormat& fmt);

/// As above with biases stored in the activation format.
QuantizedModel quantize_model(const CnnModel& model, const FixedPointFormat& weight_fmt,
                              const FixedPointFormat& act_fmt, QuantizationReport* report = nullptr);

struct QuantizedStats {
    std::uint64_t saturations = 0;
};

/// Bit-exact integer inference. Codes must lie in the input format range;
/// output samples are raw values in `output_fmt()`, same length as the input.
std::vector<std::int32_t> quantized_forward(const QuantizedModel& model, std::span<const std::int32_t> codes,
                                            QuantizedStats* stats = nullptr);

/// One integer convolution layer over [in_ch][in_len] (input scaled by
/// `in_frac` fractional bits). Output positions whose global index
/// (`global_first` + local) lies outside [0, global_count) are forced to zero,
/// which reproduces whole-signal zero padding when the layer runs on a
/// window cut from a longer stream.
std::vector<std::int32_t> quantized_layer(const QuantizedLayer& layer, int in_frac,
                                          std::span<const std::int32_t> in, std::size_t in_len,
                                          long long global_first, long long global_count,
                                          QuantizedStats* stats = nullptr);

std::vector<double> dequantize(std::span<const std::int32_t> raw, const FixedPointFormat& fmt);

/// Dequantizes a quantized_forward output and undoes the output shifts.
std::vector<double> dequantize_output(const QuantizedModel& model, std::span<const std::int32_t> raw);

}  // namespace imdd

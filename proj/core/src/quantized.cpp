#include "imdd/quantized.hpp"

#include <algorithm>
#include <cmath>

namespace imdd {

void QuantizedModel::validate() const {
    config.validate();
    input_fmt.validate();
    if (layers.size() != config.layers.size()) throw Error("quantized", "layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const QuantizedLayer& l = layers[i];
        if (!(l.spec == config.layers[i])) throw Error("quantized", "layer spec differs from config");
        l.weight_fmt.validate();
        l.bias_fmt.validate();
        l.act_fmt.validate();
        if (l.weights.size() != static_cast<std::size_t>(l.spec.out_ch) * l.spec.in_ch * l.spec.kernel ||
            l.bias.size() != static_cast<std::size_t>(l.spec.out_ch))
            throw Error("quantized", "tensor has wrong size");
        for (auto w : l.weights)
            if (w < l.weight_fmt.min_raw() || w > l.weight_fmt.max_raw())
                throw Error("quantized", "weight outside its format range");
        for (auto b : l.bias)
            if (b < l.bias_fmt.min_raw() || b > l.bias_fmt.max_raw())
                throw Error("quantized", "bias outside its format range");
    }
    if (!output_shift.empty()) {
        if (output_shift.size() != static_cast<std::size_t>(layers.back().spec.out_ch))
            throw Error("quantized", "output_shift needs one entry per output channel");
        for (int k : output_shift)
            if (k < 0 || k > 30) throw Error("quantized", "output_shift outside [0, 30]");
    }
}

namespace {

// Smallest k such that channel o of `layer`, scaled by 2^-k, fits `fmt`.
int fitting_shift(const ConvLayer& layer, int o, const FixedPointFormat& fmt) {
    for (int k = 0; k < 30; ++k) {
        const double scale = std::ldexp(1.0, -k);
        bool any = false;
        for (int i = 0; i < layer.spec.in_ch && !any; ++i)
            for (int t = 0; t < layer.spec.kernel && !any; ++t) fmt.quantize(layer.w(o, i, t) * scale, &any);
        if (!any) return k;
    }
    return 30;
}

// True if input channel i of `layer`, scaled by `scale`, fits `fmt`.
bool column_fits(const ConvLayer& layer, int i, double scale, const FixedPointFormat& fmt) {
    bool any = false;
    for (int p = 0; p < layer.spec.out_ch && !any; ++p)
        for (int t = 0; t < layer.spec.kernel && !any; ++t) fmt.quantize(layer.w(p, i, t) * scale, &any);
    return !any;
}

void scale_output_channel(ConvLayer& layer, int o, double s) {
    for (int i = 0; i < layer.spec.in_ch; ++i)
        for (int t = 0; t < layer.spec.kernel; ++t) layer.w(o, i, t) *= s;
    layer.bias[o] *= s;
}

}  // namespace

CnnModel rebalance_for_format(const CnnModel& model, const FixedPointFormat& weight_fmt,
                              std::size_t* rescaled_channels, std::vector<int>* output_shift) {
    weight_fmt.validate();
    CnnModel m = model;
    std::size_t count = 0;
    for (std::size_t li = 0; li + 1 < m.layers.size(); ++li) {
        ConvLayer& cur = m.layers[li];
        ConvLayer& next = m.layers[li + 1];
        if (!cur.spec.bn_relu || cur.bn) continue;
        // Rounding noise grows with fan-in: when the next layer sums more
        // terms, give its input weights the range instead.
        const bool favor_next = next.spec.in_ch * next.spec.kernel > cur.spec.in_ch * cur.spec.kernel;
        for (int o = 0; o < cur.spec.out_ch; ++o) {
            int k = fitting_shift(cur, o, weight_fmt);
            if (favor_next)
                while (k < 30 && column_fits(next, o, std::ldexp(1.0, k + 1), weight_fmt)) ++k;
            if (k == 0) continue;
            ++count;
            scale_output_channel(cur, o, std::ldexp(1.0, -k));
            for (int p = 0; p < next.spec.out_ch; ++p)
                for (int t = 0; t < next.spec.kernel; ++t) next.w(p, o, t) *= std::ldexp(1.0, k);
        }
    }
    if (output_shift) {
        ConvLayer& last = m.layers.back();
        output_shift->assign(static_cast<std::size_t>(last.spec.out_ch), 0);
        for (int o = 0; o < last.spec.out_ch; ++o) {
            const int k = fitting_shift(last, o, weight_fmt);
            if (k == 0) continue;
            ++count;
            scale_output_channel(last, o, std::ldexp(1.0, -k));
            (*output_shift)[static_cast<std::size_t>(o)] = k;
        }
    }
    if (rescaled_channels) *rescaled_channels = count;
    return m;
}

namespace {

constexpr double kCalibrationDamping = 0.01;

// Lower Cholesky factor of a symmetric positive definite n x n matrix, in place.
void cholesky_lower(std::vector<double>& a, int n) {
    for (int j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (int k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) throw Error("quantize_model", "calibration covariance is not positive definite");
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (int i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / d;
        }
        for (int k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
    }
}

// Upper factor U of H^-1 = U^T U, used to spread each rounding error over the
// weights not yet rounded (optimal brain quantization order 0..n-1).
std::vector<double> inverse_upper_factor(std::vector<double> h, int n) {
    cholesky_lower(h, n);
    // H^-1 = L^-T L^-1; solve column by column.
    std::vector<double> inv(static_cast<std::size_t>(n) * n, 0.0);
    for (int c = 0; c < n; ++c) {
        std::vector<double> y(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double s = i == c ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) s -= h[i * n + k] * y[k];
            y[i] = s / h[i * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= h[k * n + i] * inv[k * n + c];
            inv[i * n + c] = s / h[i * n + i];
        }
    }
    cholesky_lower(inv, n);
    std::vector<double> u(inv.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) u[i * n + j] = inv[j * n + i];
    return u;
}

// Second moment of the layer's receptive-field patches, damped on the diagonal.
std::vector<double> patch_covariance(const LayerSpec& s, std::span<const double> in, std::size_t in_len) {
    const int n = s.in_ch * s.kernel;
    const std::size_t out_len = in_len / s.stride;
    const long long pad = s.pad_left();
    std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0), v(n);
    for (std::size_t p = 0; p < out_len; ++p) {
        const long long start = static_cast<long long>(p) * s.stride - pad;
        for (int i = 0; i < s.in_ch; ++i)
            for (int k = 0; k < s.kernel; ++k) {
                const long long idx = start + k;
                v[i * s.kernel + k] = idx >= 0 && idx < static_cast<long long>(in_len) ? in[i * in_len + idx] : 0.0;
            }
        for (int a = 0; a < n; ++a)
            if (v[a] != 0.0)
                for (int b = 0; b <= a; ++b) h[a * n + b] += v[a] * v[b];
    }
    double mean_diag = 0.0;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < a; ++b) h[b * n + a] = h[a * n + b];
        mean_diag += h[a * n + a];
    }
    mean_diag /= n;
    if (mean_diag == 0.0) mean_diag = 1.0;
    for (int a = 0; a < n; ++a) h[a * n + a] += kCalibrationDamping * mean_diag;
    return h;
}

}  // namespace

std::vector<double> round_with_error_feedback(std::span<const double> weights, int out_ch,
                                              std::span<const double> covariance, const FixedPointFormat& fmt) {
    const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(covariance.size()))));
    if (out_ch <= 0 || static_cast<std::size_t>(n) * n != covariance.size() ||
        weights.size() != static_cast<std::size_t>(out_ch) * n)
        throw Error("quantize_model", "weights and covariance sizes disagree");
    const std::vector<double> u = inverse_upper_factor({covariance.begin(), covariance.end()}, n);
    std::vector<double> out(weights.begin(), weights.end());
    for (int o = 0; o < out_ch; ++o) {
        double* w = &out[static_cast<std::size_t>(o) * n];
        for (int j = 0; j < n; ++j) {
            const double q = fmt.to_double(fmt.quantize(w[j]));
            const double e = (w[j] - q) / u[j * n + j];
            for (int k = j + 1; k < n; ++k) w[k] -= e * u[j * n + k];
            w[j] = q;
        }
    }
    return out;
}

QuantizedModel quantize_model(const CnnModel& folded, const FixedPointFormat& weight_fmt,
                              const FixedPointFormat& act_fmt, const FixedPointFormat& bias_fmt,
                              QuantizationReport* report) {
    return quantize_model(folded, weight_fmt, act_fmt, bias_fmt, {}, report);
}

QuantizedModel quantize_model(const CnnModel& folded, const FixedPointFormat& weight_fmt,
                              const FixedPointFormat& act_fmt, const FixedPointFormat& bias_fmt,
                              std::span<const double> calibration, QuantizationReport* report) {
    folded.validate();
    if (folded.has_batch_norm()) throw Error("quantize_model", "model must be BN-folded first");
    weight_fmt.validate();
    act_fmt.validate();
    bias_fmt.validate();

    QuantizationReport local;
    QuantizedModel q;
    const CnnModel model = rebalance_for_format(folded, weight_fmt, &local.rescaled_channels, &q.output_shift);
    q.config = model.config;
    std::vector<double> act(calibration.begin(), calibration.end());
    std::size_t act_len = act.size();
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const ConvLayer& src = model.layers[li];
        std::vector<double> weights = src.weights;
        if (act_len >= static_cast<std::size_t>(src.spec.stride)) {
            // Error feedback rounding against the float activations of this layer.
            weights = round_with_error_feedback(src.weights, src.spec.out_ch,
                                                patch_covariance(src.spec, act, act_len), weight_fmt);
            act = detail::conv1d(src, act, act_len);
            act_len /= static_cast<std::size_t>(src.spec.stride);
            if (src.spec.bn_relu)
                for (double& v : act) v = std::max(v, 0.0);
            local.calibrated_layers += 1;
        }
        QuantizedLayer dst;
        dst.spec = src.spec;
        dst.weight_fmt = weight_fmt;
        dst.bias_fmt = bias_fmt;
        dst.act_fmt = act_fmt;
        std::size_t nonzero_src = 0, nonzero_q = 0, sat = 0;
        for (double w : weights) {
            bool s = false;
            const auto raw = weight_fmt.quantize(w, &s);
            sat += s;
            nonzero_src += w != 0.0;
            nonzero_q += raw != 0;
            dst.weights.push_back(raw);
        }
        for (double b : src.bias) {
            bool s = false;
            dst.bias.push_back(bias_fmt.quantize(b, &s));
            local.saturated_biases += s;
        }
        local.saturated_weights += sat;
        if (nonzero_src > 0 && nonzero_q == 0)
            local.warnings.push_back("layer " + std::to_string(li + 1) + ": format " + weight_fmt.to_string() +
                                     " rounds every weight to zero");
        if (sat > 0)
            local.warnings.push_back("layer " + std::to_string(li + 1) + ": " + std::to_string(sat) +
                                     " weights saturated in " + weight_fmt.to_string());
        q.layers.push_back(std::move(dst));
    }
    if (local.saturated_biases > 0)
        local.warnings.push_back(std::to_string(local.saturated_biases) + " biases saturated in " +
                                 bias_fmt.to_string());
    if (report) *report = std::move(local);
    return q;
}

QuantizedModel quantize_model(const CnnModel& model, const FixedPointFormat& weight_fmt,
                              const FixedPointFormat& act_fmt, QuantizationReport* report) {
    return quantize_model(model, weight_fmt, act_fmt, act_fmt, report);
}

std::vector<std::int32_t> quantized_layer(const QuantizedLayer& layer, int in_frac,
                                          std::span<const std::int32_t> in, std::size_t in_len,
                                          long long global_first, long long global_count, QuantizedStats* stats) {
    const LayerSpec& s = layer.spec;
    const std::size_t out_len = in_len / s.stride;
    const long long pad = s.pad_left();
    const int acc_frac = in_frac + layer.weight_fmt.frac_bits;
    const int out_shift = acc_frac - layer.act_fmt.frac_bits;
    const int bias_shift = layer.bias_fmt.frac_bits - acc_frac;
    const std::int64_t lo = layer.act_fmt.min_raw();
    const std::int64_t hi = layer.act_fmt.max_raw();
    std::uint64_t saturations = 0;

    std::vector<std::int32_t> out(static_cast<std::size_t>(s.out_ch) * out_len, 0);
    for (int o = 0; o < s.out_ch; ++o) {
        const std::int64_t bias_acc = shift_round_half_up(layer.bias[o], bias_shift);
        for (std::size_t p = 0; p < out_len; ++p) {
            const long long g = global_first + static_cast<long long>(p);
            if (g < 0 || g >= global_count) continue;
            std::int64_t acc = bias_acc;
            const long long start = static_cast<long long>(p) * s.stride - pad;
            const int k_lo = static_cast<int>(std::max<long long>(0, -start));
            const int k_hi = static_cast<int>(std::min<long long>(s.kernel, static_cast<long long>(in_len) - start));
            for (int i = 0; i < s.in_ch; ++i) {
                const std::int32_t* src = &in[i * in_len];
                const std::int32_t* w = &layer.weights[(o * s.in_ch + i) * s.kernel];
                for (int k = k_lo; k < k_hi; ++k) acc += static_cast<std::int64_t>(w[k]) * src[start + k];
            }
            std::int64_t v = shift_round_half_up(acc, out_shift);
            if (v < lo || v > hi) {
                ++saturations;
                v = std::clamp(v, lo, hi);
            }
            if (s.bn_relu && v < 0) v = 0;
            out[o * out_len + p] = static_cast<std::int32_t>(v);
        }
    }
    if (stats) stats->saturations += saturations;
    return out;
}

std::vector<std::int32_t> quantized_forward(const QuantizedModel& model, std::span<const std::int32_t> codes,
                                            QuantizedStats* stats) {
    model.validate();
    const std::size_t stride = static_cast<std::size_t>(model.config.total_stride());
    if (codes.size() < static_cast<std::size_t>(model.config.receptive_margin()))
        throw Error("quantized_forward", "input shorter than the receptive margin");
    if (codes.size() % stride != 0)
        throw Error("quantized_forward", "input length must be a multiple of the total stride");
    for (auto c : codes)
        if (c < model.input_fmt.min_raw() || c > model.input_fmt.max_raw())
            throw Error("quantized_forward", "input code outside " + model.input_fmt.to_string());

    std::vector<std::int32_t> act(codes.begin(), codes.end());
    std::size_t len = codes.size();
    int frac = model.input_fmt.frac_bits;
    for (const QuantizedLayer& layer : model.layers) {
        const std::size_t out_len = len / layer.spec.stride;
        act = quantized_layer(layer, frac, act, len, 0, static_cast<long long>(out_len), stats);
        len = out_len;
        frac = layer.act_fmt.frac_bits;
    }
    return depth_to_sequence<std::int32_t>(act, model.layers.back().spec.out_ch, len);
}

std::vector<double> dequantize(std::span<const std::int32_t> raw, const FixedPointFormat& fmt) {
    std::vector<double> out;
    out.reserve(raw.size());
    for (auto r : raw) out.push_back(fmt.to_double(r));
    return out;
}

std::vector<double> dequantize_output(const QuantizedModel& model, std::span<const std::int32_t> raw) {
    std::vector<double> out = dequantize(raw, model.output_fmt());
    if (model.output_shift.empty()) return out;
    // Output sample s comes from channel s % channels (depth to sequence).
    const std::size_t channels = model.output_shift.size();
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = std::ldexp(out[s], model.output_shift[s % channels]);
    return out;
}

}  // namespace imdd

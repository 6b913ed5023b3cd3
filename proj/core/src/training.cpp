#include "imdd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace imdd {

namespace {

struct LayerCache {
    std::vector<double> input;  // [window][in_ch][in_len]
    std::size_t in_len = 0;
    std::size_t out_len = 0;
    std::vector<double> xhat;   // normalized pre-activation, BN layers only
    std::vector<double> pre;    // value fed to ReLU (or the layer output when linear)
    std::vector<double> invstd;
};

void conv1d_backward(const ConvLayer& layer, std::span<const double> in, std::size_t in_len,
                     std::span<const double> dz, LayerGradient& g, double* d_in) {
    const LayerSpec& s = layer.spec;
    const std::size_t out_len = in_len / s.stride;
    const long long pad = s.pad_left();
    for (int o = 0; o < s.out_ch; ++o) {
        const double* dzo = &dz[o * out_len];
        for (std::size_t p = 0; p < out_len; ++p) {
            const double d = dzo[p];
            if (d == 0.0) continue;
            g.bias[o] += d;
            const long long start = static_cast<long long>(p) * s.stride - pad;
            for (int i = 0; i < s.in_ch; ++i) {
                const double* src = &in[i * in_len];
                double* gw = &g.weights[(o * s.in_ch + i) * s.kernel];
                const double* w = &layer.weights[(o * s.in_ch + i) * s.kernel];
                double* din = d_in ? d_in + i * in_len : nullptr;
                for (int k = 0; k < s.kernel; ++k) {
                    const long long idx = start + k;
                    if (idx < 0 || idx >= static_cast<long long>(in_len)) continue;
                    gw[k] += d * src[idx];
                    if (din) din[idx] += d * w[k];
                }
            }
        }
    }
}

LayerGradient zero_gradient(const ConvLayer& layer) {
    LayerGradient g;
    g.weights.assign(layer.weights.size(), 0.0);
    g.bias.assign(layer.bias.size(), 0.0);
    if (layer.bn) {
        g.gamma.assign(layer.bn->gamma.size(), 0.0);
        g.beta.assign(layer.bn->beta.size(), 0.0);
    }
    return g;
}

}  // namespace

std::vector<std::span<double>> trainable_views(CnnModel& model) {
    std::vector<std::span<double>> views;
    for (auto& l : model.layers) {
        views.emplace_back(l.weights);
        views.emplace_back(l.bias);
        if (l.bn) {
            views.emplace_back(l.bn->gamma);
            views.emplace_back(l.bn->beta);
        }
    }
    return views;
}

std::vector<std::span<double>> gradient_views(CnnGradient& grad) {
    std::vector<std::span<double>> views;
    for (auto& g : grad) {
        views.emplace_back(g.weights);
        views.emplace_back(g.bias);
        if (!g.gamma.empty()) {
            views.emplace_back(g.gamma);
            views.emplace_back(g.beta);
        }
    }
    return views;
}

double loss_and_gradient(const CnnModel& model, const TrainingBatch& batch, CnnGradient* grad, CnnModel* running,
                         double bn_momentum) {
    const std::size_t n_windows = batch.windows();
    const std::size_t n_targets = batch.target_pos.size();
    if (n_windows == 0 || n_targets == 0) throw Error("train", "empty batch");
    if (batch.window_samples % static_cast<std::size_t>(model.config.total_stride()) != 0)
        throw Error("train", "window length must be a multiple of the total stride");

    std::vector<LayerCache> caches(model.layers.size());
    std::vector<double> act = batch.inputs;
    std::size_t len = batch.window_samples;

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const ConvLayer& layer = model.layers[li];
        const LayerSpec& s = layer.spec;
        LayerCache& c = caches[li];
        c.in_len = len;
        c.out_len = len / s.stride;
        const std::size_t in_block = static_cast<std::size_t>(s.in_ch) * len;
        const std::size_t out_block = static_cast<std::size_t>(s.out_ch) * c.out_len;

        std::vector<double> z(n_windows * out_block);
        for (std::size_t w = 0; w < n_windows; ++w) {
            auto out = detail::conv1d(layer, std::span<const double>(act).subspan(w * in_block, in_block), len);
            std::copy(out.begin(), out.end(), z.begin() + static_cast<std::ptrdiff_t>(w * out_block));
        }
        c.input = std::move(act);

        if (layer.bn) {
            const BatchNorm& bn = *layer.bn;
            const double count = static_cast<double>(n_windows * c.out_len);
            c.xhat.resize(z.size());
            c.invstd.resize(s.out_ch);
            for (int ch = 0; ch < s.out_ch; ++ch) {
                double sum = 0.0;
                for (std::size_t w = 0; w < n_windows; ++w)
                    for (std::size_t p = 0; p < c.out_len; ++p) sum += z[w * out_block + ch * c.out_len + p];
                const double mu = sum / count;
                double sq = 0.0;
                for (std::size_t w = 0; w < n_windows; ++w)
                    for (std::size_t p = 0; p < c.out_len; ++p) {
                        const double d = z[w * out_block + ch * c.out_len + p] - mu;
                        sq += d * d;
                    }
                const double var = sq / count;
                const double inv = 1.0 / std::sqrt(var + bn.eps);
                c.invstd[ch] = inv;
                for (std::size_t w = 0; w < n_windows; ++w)
                    for (std::size_t p = 0; p < c.out_len; ++p) {
                        const std::size_t idx = w * out_block + ch * c.out_len + p;
                        c.xhat[idx] = (z[idx] - mu) * inv;
                        z[idx] = bn.gamma[ch] * c.xhat[idx] + bn.beta[ch];
                    }
                if (running) {
                    BatchNorm& rb = *running->layers[li].bn;
                    const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
                    rb.running_mean[ch] = (1.0 - bn_momentum) * rb.running_mean[ch] + bn_momentum * mu;
                    rb.running_var[ch] = (1.0 - bn_momentum) * rb.running_var[ch] + bn_momentum * unbiased;
                }
            }
        }
        c.pre = z;
        if (s.bn_relu)
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        act = std::move(z);
        len = c.out_len;
    }

    // act: [window][C][P] with C == total stride; sample n = p*C + c.
    const int channels = model.layers.back().spec.out_ch;
    const std::size_t positions = len;
    const std::size_t out_block = static_cast<std::size_t>(channels) * positions;
    const double norm = 1.0 / static_cast<double>(n_windows * n_targets);
    double loss = 0.0;
    std::vector<double> d_act(grad ? act.size() : 0, 0.0);
    for (std::size_t w = 0; w < n_windows; ++w) {
        for (std::size_t t = 0; t < n_targets; ++t) {
            const std::size_t n = batch.target_pos[t];
            const std::size_t idx = w * out_block + (n % channels) * positions + n / channels;
            const double e = act[idx] - batch.targets[w * n_targets + t];
            loss += e * e;
            if (grad) d_act[idx] += 2.0 * e * norm;
        }
    }
    loss *= norm;
    if (!grad) return loss;

    grad->clear();
    for (const auto& layer : model.layers) grad->push_back(zero_gradient(layer));

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const ConvLayer& layer = model.layers[li];
        const LayerSpec& s = layer.spec;
        const LayerCache& c = caches[li];
        LayerGradient& g = (*grad)[li];
        const std::size_t out_block_l = static_cast<std::size_t>(s.out_ch) * c.out_len;

        std::vector<double> dz = std::move(d_act);
        if (s.bn_relu)
            for (std::size_t i = 0; i < dz.size(); ++i)
                if (!(c.pre[i] > 0.0)) dz[i] = 0.0;
        if (layer.bn) {
            const BatchNorm& bn = *layer.bn;
            const double count = static_cast<double>(n_windows * c.out_len);
            for (int ch = 0; ch < s.out_ch; ++ch) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t w = 0; w < n_windows; ++w)
                    for (std::size_t p = 0; p < c.out_len; ++p) {
                        const std::size_t idx = w * out_block_l + ch * c.out_len + p;
                        sum_dy += dz[idx];
                        sum_dy_xhat += dz[idx] * c.xhat[idx];
                    }
                g.gamma[ch] += sum_dy_xhat;
                g.beta[ch] += sum_dy;
                // d xhat = dy*gamma; standard batch-norm input gradient.
                const double k = bn.gamma[ch] * c.invstd[ch] / count;
                for (std::size_t w = 0; w < n_windows; ++w)
                    for (std::size_t p = 0; p < c.out_len; ++p) {
                        const std::size_t idx = w * out_block_l + ch * c.out_len + p;
                        dz[idx] = k * (count * dz[idx] - sum_dy - c.xhat[idx] * sum_dy_xhat);
                    }
            }
        }

        const std::size_t in_block = static_cast<std::size_t>(s.in_ch) * c.in_len;
        const bool need_input_grad = li > 0;
        d_act.assign(need_input_grad ? n_windows * in_block : 0, 0.0);
        for (std::size_t w = 0; w < n_windows; ++w) {
            conv1d_backward(layer, std::span<const double>(c.input).subspan(w * in_block, in_block), c.in_len,
                            std::span<const double>(dz).subspan(w * out_block_l, out_block_l), g,
                            need_input_grad ? d_act.data() + w * in_block : nullptr);
        }
    }
    return loss;
}

TrainResult train(const CnnModel& initial, const TrainingSet& data, const TrainingHyper& hyper,
                  const EpochCallback& on_epoch) {
    initial.validate();
    if (data.samples.size() != 2 * data.labels.size())
        throw Error("train", "training set needs exactly two samples per label");
    for (double v : data.samples)
        if (!std::isfinite(v)) throw Error("train", "training samples contain non-finite values");
    for (double v : data.labels)
        if (!std::isfinite(v)) throw Error("train", "training labels contain non-finite values");
    if (hyper.batch_windows < 1 || hyper.window_symbols < 1 || hyper.epochs < 1 || !(hyper.learning_rate > 0.0))
        throw Error("train", "invalid hyperparameters");

    const std::size_t stride = static_cast<std::size_t>(initial.config.total_stride());
    const std::size_t raw_margin = static_cast<std::size_t>(initial.config.receptive_margin());
    const std::size_t margin = (raw_margin + stride - 1) / stride * stride;
    const std::size_t w_sym = static_cast<std::size_t>(hyper.window_symbols);
    const std::size_t window_samples = (2 * w_sym + 2 * margin + stride - 1) / stride * stride;
    const std::size_t n = data.samples.size();
    // Window starts step on the symbol grid that keeps samples on the stride grid.
    const std::size_t sym_align = std::max<std::size_t>(1, stride / 2);

    TrainingBatch batch;
    batch.window_samples = window_samples;
    for (std::size_t k = 0; k < w_sym; ++k) batch.target_pos.push_back(margin + 2 * k);

    std::mt19937_64 rng(hyper.seed);
    CnnModel model = initial;
    auto params = trainable_views(model);
    std::vector<std::vector<double>> m1, m2;
    for (auto p : params) {
        m1.emplace_back(p.size(), 0.0);
        m2.emplace_back(p.size(), 0.0);
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long long step = 0;

    TrainResult result;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const std::size_t offset = (rng() % (w_sym / sym_align + 1)) * sym_align;
        std::vector<std::size_t> starts;  // first labelled symbol of each window
        for (std::size_t a = margin / 2 + offset; 2 * a - margin + window_samples <= n; a += w_sym)
            starts.push_back(a);
        if (starts.empty()) throw Error("train", "training set shorter than one window");
        std::shuffle(starts.begin(), starts.end(), rng);

        const double lr = hyper.cosine_decay
                              ? hyper.learning_rate * 0.5 *
                                    (1.0 + std::cos(std::numbers::pi * epoch / static_cast<double>(hyper.epochs)))
                              : hyper.learning_rate;
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < starts.size(); b += static_cast<std::size_t>(hyper.batch_windows)) {
            const std::size_t count = std::min<std::size_t>(hyper.batch_windows, starts.size() - b);
            batch.inputs.resize(count * window_samples);
            batch.targets.resize(count * w_sym);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t a = starts[b + i];
                const std::size_t s0 = 2 * a - margin;
                std::copy_n(data.samples.begin() + static_cast<std::ptrdiff_t>(s0), window_samples,
                            batch.inputs.begin() + static_cast<std::ptrdiff_t>(i * window_samples));
                std::copy_n(data.labels.begin() + static_cast<std::ptrdiff_t>(a), w_sym,
                            batch.targets.begin() + static_cast<std::ptrdiff_t>(i * w_sym));
            }
            CnnGradient grad;
            const double loss = loss_and_gradient(model, batch, &grad, &model, hyper.bn_momentum);
            if (!std::isfinite(loss))
                throw Error("train", "non-finite loss at epoch " + std::to_string(epoch) +
                                         "; learning rate too high?");
            ++step;
            auto grads = gradient_views(grad);
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < params.size(); ++t) {
                for (std::size_t j = 0; j < params[t].size(); ++j) {
                    const double gj = grads[t][j];
                    m1[t][j] = beta1 * m1[t][j] + (1.0 - beta1) * gj;
                    m2[t][j] = beta2 * m2[t][j] + (1.0 - beta2) * gj * gj;
                    params[t][j] -= lr * (m1[t][j] / c1) / (std::sqrt(m2[t][j] / c2) + adam_eps);
                }
            }
            epoch_loss += loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        result.loss_curve.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    result.model = std::move(model);
    return result;
}

}  // namespace imdd

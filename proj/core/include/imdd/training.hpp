#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "imdd/cnn.hpp"

namespace imdd {

/// Received 2-samples/symbol input with one +-1 label per symbol; label k
/// belongs to sample 2k. Delay between the two must already be resolved.
struct TrainingSet {
    std::vector<double> samples;
    std::vector<double> labels;
};

struct TrainingHyper {
    double learning_rate = 1e-2;
    int batch_windows = 8;
    int window_symbols = 256;
    int epochs = 300;
    double bn_momentum = 0.1;
    /// Cosine decay of the learning rate to zero over all epochs.
    bool cosine_decay = true;
    std::uint64_t seed = 1;
};

struct TrainResult {
    CnnModel model;
    std::vector<double> loss_curve;  // mean training MSE per epoch
};

/// A batch of equal-length input windows, each with loss targets at fixed
/// sample positions. Windows start on the total-stride grid.
struct TrainingBatch {
    std::size_t window_samples = 0;
    std::vector<double> inputs;           // [window][window_samples]
    std::vector<std::size_t> target_pos;  // sample indices inside a window
    std::vector<double> targets;          // [window][target_pos.size()]

    std::size_t windows() const { return window_samples ? inputs.size() / window_samples : 0; }
};

struct LayerGradient {
    std::vector<double> weights, bias, gamma, beta;
};
using CnnGradient = std::vector<LayerGradient>;

/// Training-mode loss (batch statistics in batch norm) and, if `grad` is
/// non-null, its gradient. When `running` is non-null its batch-norm running
/// statistics are updated with `bn_momentum`.
double loss_and_gradient(const CnnModel& model, const TrainingBatch& batch, CnnGradient* grad,
                         CnnModel* running = nullptr, double bn_momentum = 0.1);

/// Every trainable tensor (weights, bias, gamma, beta per layer) in a fixed
/// order, for optimizers and finite-difference checks.
std::vector<std::span<double>> trainable_views(CnnModel& model);
std::vector<std::span<double>> gradient_views(CnnGradient& grad);

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Adam on MSE between symbol-spaced outputs and labels.
TrainResult train(const CnnModel& initial, const TrainingSet& data, const TrainingHyper& hyper,
                  const EpochCallback& on_epoch = {});

}  // namespace imdd

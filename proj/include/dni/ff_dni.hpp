// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dni/layers.hpp"
#include "dni/rng.hpp"
#include "dni/synthetic_models.hpp"
#include "dni/tasks_io.hpp"
#include "dni/tensor.hpp"

namespace dni {

enum class DniPlacement { none, single, every };

/// Classifier network: depth x (linear -> batchnorm -> relu) -> linear ->
/// softmax cross entropy. Interfaces are numbered by the hidden layer whose
/// output they cut: interface i carries the gradient for h_i, i in
/// [0, depth). The classifier sits above the last interface and always
/// receives the true loss gradient.
struct FfNetworkSpec {
    std::size_t input_dim = 784;
    std::size_t hidden = 256;
    std::size_t classes = 10;
    std::size_t depth = 3;  // hidden layer count, 3..6
    DniPlacement placement = DniPlacement::every;
    std::size_t single_at = 1;  // decouple after hidden layer single_at (1-based)
    Conditioning conditioning = Conditioning::none;
    std::size_t sg_hidden_layers = 2;  // 0 for the conditional (linear) variant
    std::size_t sg_hidden_width = 256;
    AdamConfig adam{3e-4, 0.9, 0.999, 1e-8};
    AdamConfig sg_adam{3e-4, 0.9, 0.999, 1e-8};
};

struct FfHiddenLayer {
    LinearLayer lin;
    BatchNormLayer bn;
};

struct FfNetwork {
    FfNetworkSpec spec;
    std::vector<FfHiddenLayer> hidden;
    LinearLayer classifier;
    /// sg[i] predicts the loss gradient at h_i; present only at decoupled
    /// interfaces (all of them for `every`, one for `single`, none otherwise).
    std::vector<SgModel> sg;
    std::vector<std::size_t> sg_interfaces;  // which interface each sg serves, ascending
    /// input_models[u-1] predicts unit u's input from the raw batch
    /// (complete unlock only; unit depth is the classifier).
    std::vector<SyntheticInputModel> input_models;

    static FfNetwork create(const FfNetworkSpec& spec, RngState& rng);
    /// Adds the synthetic input models used by complete_unlock_step.
    void attach_input_models(RngState& rng);
    bool has_sg_at(std::size_t interface) const;
    SgModel& sg_at(std::size_t interface);
    std::size_t units() const { return spec.depth + 1; }  // hidden layers + classifier
};

struct MnistBatch {
    Tensor x;
    std::vector<std::size_t> labels;
};

MnistBatch sample_batch(const MnistDataset& ds, std::size_t n, RngState& rng);

/// Simulated-asynchrony schedule: units are visited in a fresh random
/// permutation each step and each performs its backward/update with
/// probability p_update.
struct UpdateScheduler {
    double p_update = 1.0;
    RngState rng;
};

struct InterfaceDiag {
    double l2 = 0.0;          // ||synthetic - true||_2
    double cosine = 1.0;      // cosine similarity
    double sign_error = 0.0;  // fraction of dimensions with mismatched sign
};

InterfaceDiag gradient_diagnostics(const Tensor& synthetic, const Tensor& truth);

struct TrainStepReport {
    double loss = 0.0;
    std::vector<double> sg_loss;       // per interface; NaN where no regression ran
    std::vector<bool> updated;         // per unit (depth hidden + classifier)
    std::vector<InterfaceDiag> diags;  // per interface when requested
};

/// Exact end-to-end backprop with one Adam step per layer; the correctness
/// anchor every equivalence test compares against.
TrainStepReport backprop_step(FfNetwork& net, const MnistBatch& batch);

/// Decoupled training step. Bottom-up: each segment of layers runs forward,
/// immediately updates from the synthetic gradient predicted at its top
/// boundary, and the backward value at its bottom becomes the regression
/// target for the interface below. The top segment uses the true loss.
/// With placement none this degenerates to backprop_step exactly.
TrainStepReport dni_step(FfNetwork& net, const MnistBatch& batch, bool with_diagnostics = false);

/// Randomized-order per-unit updates with probability p_update. Requires
/// every-layer placement (decoupled case) or none (baseline: the backward
/// sweep stops at the first skipped unit, dropping gradients below it).
TrainStepReport stochastic_dni_step(FfNetwork& net, const MnistBatch& batch,
                                    UpdateScheduler& scheduler);

/// Forward- and update-decoupled step: busy units (probability 1 - p_update)
/// do nothing; active units consume the predicted input when their upstream
/// is busy; input models regress toward true activations whenever those are
/// produced. Requires attach_input_models and every-layer placement.
TrainStepReport complete_unlock_step(FfNetwork& net, const MnistBatch& batch,
                                     UpdateScheduler& scheduler);

/// Baseline where each interface consumes an exponential moving average of
/// past true gradients instead of a synthetic model's prediction.
struct StaleGradientCache {
    std::vector<Tensor> ema;  // per interface, [batch x hidden], zero until refreshed
    double decay = 0.5;
};

TrainStepReport stale_gradient_step(FfNetwork& net, const MnistBatch& batch,
                                    StaleGradientCache& cache);

/// Classification error rate on a dataset, batch-norm in eval mode, no
/// synthetic anything ("during testing all layers are connected").
double eval_error(FfNetwork& net, const MnistDataset& ds, std::size_t eval_batch = 500);

/// Applies a new learning rate to every Adam state in the network (trunk and
/// synthetic models alike); used by step-decay schedules.
void set_learning_rate(FfNetwork& net, double lr);

}  // namespace dni

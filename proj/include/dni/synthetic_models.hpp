// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dni/adam.hpp"
#include "dni/layers.hpp"
#include "dni/rng.hpp"
#include "dni/tensor.hpp"

namespace dni {

enum class Conditioning { none, label_one_hot };

struct SgModelConfig {
    std::size_t input_dim = 0;   // activation dim, excluding any conditioning columns
    std::size_t output_dim = 0;  // dim of the gradient (or activation) being predicted
    std::size_t hidden_layers = 2;  // 0, 1 or 2
    std::size_t hidden_width = 256;
    Conditioning conditioning = Conditioning::none;
    std::size_t num_classes = 0;  // required when conditioning is label_one_hot
    AdamConfig adam;
};

/// Synthetic gradient model: (linear -> batchnorm -> relu)^k -> linear, with
/// the final linear weights and biases all zero so a fresh model predicts the
/// zero gradient and leaves the consumer's update untouched.
struct SgModel {
    SgModelConfig cfg;
    std::vector<LinearLayer> hidden;
    std::vector<BatchNormLayer> norms;
    LinearLayer out;

    static SgModel create(const SgModelConfig& cfg, RngState& rng);
};

/// Synthetic input models share the architecture and the zero-init final
/// layer; they regress activations instead of gradients.
using SyntheticInputModel = SgModel;

/// Forward pass. labels must be provided iff the model is conditional; they
/// are one-hot encoded and concatenated to the input.
Tensor sg_predict(SgModel& model, const Tensor& h, const std::vector<std::size_t>* labels = nullptr);

/// One Adam step on the model against the squared-error regression loss
/// ||prediction - target||^2 (summed over features, averaged over rows).
/// The target is treated as a constant: nothing propagates into whatever
/// produced it. Returns the pre-step loss. If dh_out is non-null it receives
/// d(loss)/d(input), excluding the conditioning columns, so callers may opt
/// in to pushing regression error into the producing network.
double sg_update(SgModel& model, const Tensor& h, const std::vector<std::size_t>* labels,
                 const Tensor& target, Tensor* dh_out = nullptr);

Tensor synth_input_predict(SyntheticInputModel& model, const Tensor& x,
                           const std::vector<std::size_t>* labels = nullptr);
double synth_input_update(SyntheticInputModel& model, const Tensor& x,
                          const std::vector<std::size_t>* labels, const Tensor& target,
                          Tensor* dx_out = nullptr);

}  // namespace dni

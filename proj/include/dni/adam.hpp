// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "dni/tensor.hpp"

namespace dni {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-parameter Adam accumulator. Single-owner: only the trainer holding the
/// parameter may step it.
struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;
    AdamConfig cfg;

    AdamState() = default;
    AdamState(const std::vector<std::size_t>& param_shape, AdamConfig cfg);
};

/// One bias-corrected Adam update, in place. t is incremented before the
/// correction, so the first call uses t = 1.
void adam_step(Tensor& params, const Tensor& grad, AdamState& state);

}  // namespace dni

// SPDX-License-Identifier: Apache-2.0
#include "dni/adam.hpp"

#include <cmath>

namespace dni {

AdamState::AdamState(const std::vector<std::size_t>& param_shape, AdamConfig cfg_)
    : m(param_shape), v(param_shape), t(0), cfg(cfg_) {}

void adam_step(Tensor& params, const Tensor& grad, AdamState& state) {
    require_same_shape(params, grad, "adam_step");
    require_same_shape(params, state.m, "adam_step");
    state.t += 1;
    const double b1 = state.cfg.beta1;
    const double b2 = state.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
}

}  // namespace dni

// SPDX-License-Identifier: Apache-2.0
#include "dni/bp_lambda.hpp"

#include <stdexcept>

namespace dni {

namespace {

void require_unit_interval(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("lambda must lie in [0,1]");
    }
}

}  // namespace

LambdaSchedule LambdaSchedule::constant(double lam, std::size_t count) {
    require_unit_interval(lam);
    return LambdaSchedule{std::vector<double>(count, lam)};
}

LambdaSchedule LambdaSchedule::truncation_rule(std::size_t period, std::size_t count) {
    if (period == 0) throw std::invalid_argument("truncation_rule: period must be positive");
    LambdaSchedule s;
    s.values.resize(count);
    for (std::size_t k = 0; k < count; ++k) s.values[k] = (k % period == 0) ? 0.0 : 1.0;
    return s;
}

void LambdaSchedule::validate() const {
    for (double v : values) require_unit_interval(v);
}

Tensor mix_step(const Tensor& g_next, const JvpBack& jvp_back, const Tensor& g_synth,
                double lambda) {
    require_unit_interval(lambda);
    if (lambda == 0.0) return g_synth;
    Tensor back = jvp_back(g_next);
    if (lambda == 1.0) return back;
    require_same_shape(back, g_synth, "mix_step");
    Tensor out = scale(back, lambda);
    axpy(out, 1.0 - lambda, g_synth);
    return out;
}

Tensor recurrent_mix_step(const Tensor& dl_k, const Tensor& g_next, const JvpBack& jvp_back,
                          const Tensor& g_synth, double lambda) {
    Tensor mixed = mix_step(g_next, jvp_back, g_synth, lambda);
    require_same_shape(dl_k, mixed, "recurrent_mix_step");
    return add(dl_k, mixed);
}

Tensor unrolled_target(const Tensor& g_next, const JvpBack& jvp_back) { return jvp_back(g_next); }

std::vector<double> geometric_weights(const std::vector<double>& lambdas) {
    for (double v : lambdas) require_unit_interval(v);
    std::vector<double> weights(lambdas.size() + 1);
    double running = 1.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        weights[i] = (1.0 - lambdas[i]) * running;
        running *= lambdas[i];
    }
    weights.back() = running;
    return weights;
}

}  // namespace dni

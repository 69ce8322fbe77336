// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dni/tensor.hpp"

namespace dni {

/// Per-interface mixing weights in [0,1]. 1 means "trust the backpropagated
/// gradient", 0 means "trust the synthetic one".
struct LambdaSchedule {
    std::vector<double> values;

    static LambdaSchedule constant(double lam, std::size_t count);
    /// Truncated-BPTT rule: lambda_k = 0 iff k mod period == 0, else 1.
    static LambdaSchedule truncation_rule(std::size_t period, std::size_t count);

    double at(std::size_t k) const { return values.at(k); }
    std::size_t size() const { return values.size(); }
    void validate() const;
};

/// The layer's backward map applied to an upstream gradient:
/// dy -> dy * dh_next/dh_k.
using JvpBack = std::function<Tensor(const Tensor&)>;

/// One fold step of the mixed estimator:
///   g_k = lambda * jvp_back(g_next) + (1 - lambda) * g_synth.
/// lambda = 1 and lambda = 0 short-circuit so those paths are bitwise
/// identical to pure backprop and pure synthetic gradients respectively.
Tensor mix_step(const Tensor& g_next, const JvpBack& jvp_back, const Tensor& g_synth,
                double lambda);

/// Recurrent form: adds the immediate per-step loss gradient,
///   g_k = dl_k + lambda * jvp_back(g_next) + (1 - lambda) * g_synth.
Tensor recurrent_mix_step(const Tensor& dl_k, const Tensor& g_next, const JvpBack& jvp_back,
                          const Tensor& g_synth, double lambda);

/// Constant regression target for the synthetic model one interface down:
/// the mixed gradient pushed through the layer, detached by construction.
Tensor unrolled_target(const Tensor& g_next, const JvpBack& jvp_back);

/// Expansion weights of the mixed estimator over the horizon. Input is the
/// schedule (lambda_k .. lambda_{K-1}) seen from position k; output has one
/// entry per source n = k .. K:
///   weight on the synthetic gradient at n < K:  (1 - lambda_n) * prod_{j<n} lambda_j
///   weight on the true gradient at the end:      prod of all lambdas.
/// The result is a probability simplex.
std::vector<double> geometric_weights(const std::vector<double>& lambdas);

}  // namespace dni

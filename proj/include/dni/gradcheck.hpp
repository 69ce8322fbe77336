// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "dni/tensor.hpp"

namespace dni {

/// Central-difference gradient estimate of a scalar function, element by
/// element: (f(x + h e_j) - f(x - h e_j)) / 2h. Test oracle only; O(2n) calls.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

/// Largest |a-b| / max(1, |a|, |b|) over all elements. The max(1, ...) floor
/// keeps near-zero gradients from inflating the relative error.
double max_rel_err(const Tensor& a, const Tensor& b);

/// Largest |a-b| over all elements.
double max_abs_err(const Tensor& a, const Tensor& b);

}  // namespace dni

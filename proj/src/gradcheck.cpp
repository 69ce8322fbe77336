// SPDX-License-Identifier: Apache-2.0
#include "dni/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dni {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double orig = probe[j];
        probe[j] = orig + h;
        const double fp = f(probe);
        probe[j] = orig - h;
        const double fm = f(probe);
        probe[j] = orig;
        grad[j] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double max_rel_err(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_rel_err");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

double max_abs_err(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_err");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace dni

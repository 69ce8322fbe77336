// SPDX-License-Identifier: Apache-2.0
#include "dni/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dni {

// ---- linear -----------------------------------------------------------------

LinearLayer LinearLayer::create(std::size_t in, std::size_t out, RngState& rng, AdamConfig cfg) {
    LinearLayer layer;
    layer.W = Tensor({out, in});
    rng.fill_gaussian(layer.W, 1.0 / std::sqrt(static_cast<double>(in)));
    layer.b = Tensor({out});
    layer.w_state = AdamState(layer.W.shape(), cfg);
    layer.b_state = AdamState(layer.b.shape(), cfg);
    return layer;
}

LinearLayer LinearLayer::zeros(std::size_t in, std::size_t out, AdamConfig cfg) {
    LinearLayer layer;
    layer.W = Tensor({out, in});
    layer.b = Tensor({out});
    layer.w_state = AdamState(layer.W.shape(), cfg);
    layer.b_state = AdamState(layer.b.shape(), cfg);
    return layer;
}

Tensor linear_forward(const LinearLayer& layer, const Tensor& x, LinearCache& cache) {
    if (x.cols() != layer.in_dim()) {
        throw std::invalid_argument("linear_forward: input dim " + x.shape_str() + " vs weights " +
                                    layer.W.shape_str());
    }
    cache.x = x;
    return add_row_bias(matmul_nt(x, layer.W), layer.b);
}

LinearGrads linear_backward(const LinearLayer& layer, const LinearCache& cache, const Tensor& dy) {
    if (dy.rows() != cache.x.rows() || dy.cols() != layer.out_dim()) {
        throw std::invalid_argument("linear_backward: dy " + dy.shape_str() + " does not match cache");
    }
    LinearGrads g;
    g.dx = matmul(dy, layer.W);
    g.dW = matmul_tn(dy, cache.x);
    g.db = col_sum(dy);
    return g;
}

void linear_apply(LinearLayer& layer, const LinearGrads& grads) {
    adam_step(layer.W, grads.dW, layer.w_state);
    adam_step(layer.b, grads.db, layer.b_state);
}

// ---- batchnorm ---------------------------------------------------------------

BatchNormLayer BatchNormLayer::create(std::size_t features, AdamConfig cfg) {
    BatchNormLayer layer;
    layer.gamma = Tensor::full({features}, 1.0);
    layer.beta = Tensor({features});
    layer.running_mean = Tensor({features});
    layer.running_var = Tensor::full({features}, 1.0);
    layer.gamma_state = AdamState(layer.gamma.shape(), cfg);
    layer.beta_state = AdamState(layer.beta.shape(), cfg);
    return layer;
}

Tensor batchnorm_forward(BatchNormLayer& layer, const Tensor& x, BnMode mode, BnCache& cache) {
    const std::size_t n = x.rows(), d = x.cols();
    if (d != layer.gamma.size()) {
        throw std::invalid_argument("batchnorm_forward: feature dim mismatch");
    }
    Tensor mean({d}), var({d});
    if (mode == BnMode::train) {
        if (n < 2) throw std::invalid_argument("batchnorm_forward: train mode needs batch >= 2");
        mean = col_mean(x);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double dvj = x(i, j) - mean[j];
                var[j] += dvj * dvj;
            }
        for (std::size_t j = 0; j < d; ++j) var[j] /= static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            layer.running_mean[j] = layer.momentum * layer.running_mean[j] + (1.0 - layer.momentum) * mean[j];
            layer.running_var[j] = layer.momentum * layer.running_var[j] + (1.0 - layer.momentum) * var[j];
        }
    } else {
        mean = layer.running_mean;
        var = layer.running_var;
    }
    cache.inv_std = Tensor({d});
    for (std::size_t j = 0; j < d; ++j) cache.inv_std[j] = 1.0 / std::sqrt(var[j] + layer.eps);
    cache.xhat = Tensor({n, d});
    Tensor y({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            cache.xhat(i, j) = (x(i, j) - mean[j]) * cache.inv_std[j];
            y(i, j) = layer.gamma[j] * cache.xhat(i, j) + layer.beta[j];
        }
    return y;
}

BnGrads batchnorm_backward(const BatchNormLayer& layer, const BnCache& cache, const Tensor& dy) {
    require_same_shape(dy, cache.xhat, "batchnorm_backward");
    const std::size_t n = dy.rows(), d = dy.cols();
    BnGrads g;
    g.dgamma = Tensor({d});
    g.dbeta = Tensor({d});
    Tensor sum_dxhat({d}), sum_dxhat_xhat({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double dyj = dy(i, j);
            g.dbeta[j] += dyj;
            g.dgamma[j] += dyj * cache.xhat(i, j);
            const double dxhat = dyj * layer.gamma[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xhat[j] += dxhat * cache.xhat(i, j);
        }
    g.dx = Tensor({n, d});
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = dy(i, j) * layer.gamma[j];
            g.dx(i, j) = cache.inv_std[j] * invn *
                         (static_cast<double>(n) * dxhat - sum_dxhat[j] -
                          cache.xhat(i, j) * sum_dxhat_xhat[j]);
        }
    return g;
}

void batchnorm_apply(BatchNormLayer& layer, const BnGrads& grads) {
    adam_step(layer.gamma, grads.dgamma, layer.gamma_state);
    adam_step(layer.beta, grads.dbeta, layer.beta_state);
}

// ---- standardization -----------------------------------------------------------

Tensor standardize_forward(const Tensor& x, StandardizeCache& cache, double eps) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) throw std::invalid_argument("standardize_forward: needs batch >= 2");
    Tensor mean = col_mean(x);
    Tensor var({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double dvj = x(i, j) - mean[j];
            var[j] += dvj * dvj;
        }
    for (std::size_t j = 0; j < d; ++j) var[j] /= static_cast<double>(n);
    cache.inv_std = Tensor({d});
    for (std::size_t j = 0; j < d; ++j) cache.inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    cache.xhat = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            cache.xhat(i, j) = (x(i, j) - mean[j]) * cache.inv_std[j];
    return cache.xhat;
}

Tensor standardize_backward(const StandardizeCache& cache, const Tensor& dy) {
    require_same_shape(dy, cache.xhat, "standardize_backward");
    const std::size_t n = dy.rows(), d = dy.cols();
    Tensor sum_dy({d}), sum_dy_xhat({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            sum_dy[j] += dy(i, j);
            sum_dy_xhat[j] += dy(i, j) * cache.xhat(i, j);
        }
    Tensor dx({n, d});
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            dx(i, j) = cache.inv_std[j] * invn *
                       (static_cast<double>(n) * dy(i, j) - sum_dy[j] -
                        cache.xhat(i, j) * sum_dy_xhat[j]);
    return dx;
}

// ---- relu --------------------------------------------------------------------

Tensor relu_forward(const Tensor& x, ReluCache& cache) {
    cache.x = x;
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0, y[i]);
    return y;
}

Tensor relu_backward(const ReluCache& cache, const Tensor& dy) {
    require_same_shape(dy, cache.x, "relu_backward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (cache.x[i] <= 0.0) dx[i] = 0.0;
    return dx;
}

// ---- losses ------------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
    Tensor p = logits;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double mx = p(i, 0);
        for (std::size_t j = 1; j < p.cols(); ++j) mx = std::max(mx, p(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            p(i, j) = std::exp(p(i, j) - mx);
            z += p(i, j);
        }
        for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= z;
    }
    return p;
}

double softmax_xent(const Tensor& logits, const std::vector<std::size_t>& labels, Tensor& dlogits) {
    const std::size_t n = logits.rows(), c = logits.cols();
    if (labels.size() != n) throw std::invalid_argument("softmax_xent: label count mismatch");
    dlogits = softmax(logits);
    double loss = 0.0;
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw std::invalid_argument("softmax_xent: label out of range");
        loss -= std::log(std::max(dlogits(i, labels[i]), 1e-300));
        dlogits(i, labels[i]) -= 1.0;
        for (std::size_t j = 0; j < c; ++j) dlogits(i, j) *= invn;
    }
    return loss * invn;
}

double l2_loss(const Tensor& pred, const Tensor& target, Tensor& dpred) {
    require_same_shape(pred, target, "l2_loss");
    const double invn = 1.0 / static_cast<double>(pred.rows());
    dpred = Tensor(pred.shape());
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred[i] - target[i];
        loss += diff * diff;
        dpred[i] = 2.0 * diff * invn;
    }
    return loss * invn;
}

double masked_sigmoid_xent(const Tensor& logits, const Tensor& targets, const Tensor& row_mask,
                           Tensor& dlogits) {
    require_same_shape(logits, targets, "masked_sigmoid_xent");
    if (row_mask.size() != logits.rows()) {
        throw std::invalid_argument("masked_sigmoid_xent: row_mask must have one entry per row");
    }
    const std::size_t rows = logits.rows(), cols = logits.cols();
    const double invn = 1.0 / static_cast<double>(rows);
    dlogits = Tensor(logits.shape());
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double m = row_mask[r];
        if (m == 0.0) continue;
        for (std::size_t j = 0; j < cols; ++j) {
            const double z = logits(r, j);
            const double y = targets(r, j);
            // softplus(z) - z*y, arranged to stay finite for large |z|.
            total += m * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
            const double s = 1.0 / (1.0 + std::exp(-z));
            dlogits(r, j) = m * (s - y) * invn;
        }
    }
    return total * invn;
}

// ---- lstm --------------------------------------------------------------------

LstmCore LstmCore::create(std::size_t input_dim, std::size_t units, RngState& rng, AdamConfig cfg) {
    LstmCore core;
    core.input_dim = input_dim;
    core.units = units;
    core.W = Tensor({4 * units, input_dim + units});
    rng.fill_gaussian(core.W, 1.0 / std::sqrt(static_cast<double>(input_dim + units)));
    core.b = Tensor({4 * units});
    for (std::size_t u = 0; u < units; ++u) core.b[units + u] = 1.0;
    core.w_state = AdamState(core.W.shape(), cfg);
    core.b_state = AdamState(core.b.shape(), cfg);
    return core;
}

void lstm_step_forward(const LstmCore& core, const Tensor& x, const Tensor& h_prev,
                       const Tensor& c_prev, Tensor& h, Tensor& c, LstmCache& cache) {
    const std::size_t batch = x.rows(), u = core.units;
    if (x.cols() != core.input_dim || h_prev.cols() != u || c_prev.cols() != u ||
        h_prev.rows() != batch || c_prev.rows() != batch) {
        throw std::invalid_argument("lstm_step_forward: state shapes inconsistent");
    }
    cache.z = concat_cols(x, h_prev);
    cache.c_prev = c_prev;
    const Tensor a = add_row_bias(matmul_nt(cache.z, core.W), core.b);
    cache.i = Tensor({batch, u});
    cache.f = Tensor({batch, u});
    cache.g = Tensor({batch, u});
    cache.o = Tensor({batch, u});
    cache.c = Tensor({batch, u});
    cache.tanh_c = Tensor({batch, u});
    h = Tensor({batch, u});
    for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < u; ++j) {
            const double ai = a(r, j);
            const double af = a(r, u + j);
            const double ag = a(r, 2 * u + j);
            const double ao = a(r, 3 * u + j);
            const double iv = 1.0 / (1.0 + std::exp(-ai));
            const double fv = 1.0 / (1.0 + std::exp(-af));
            const double gv = std::tanh(ag);
            const double ov = 1.0 / (1.0 + std::exp(-ao));
            const double cv = fv * c_prev(r, j) + iv * gv;
            cache.i(r, j) = iv;
            cache.f(r, j) = fv;
            cache.g(r, j) = gv;
            cache.o(r, j) = ov;
            cache.c(r, j) = cv;
            cache.tanh_c(r, j) = std::tanh(cv);
            h(r, j) = ov * cache.tanh_c(r, j);
        }
    c = cache.c;
}

LstmGrads lstm_step_backward(const LstmCore& core, const LstmCache& cache, const Tensor& dh,
                             const Tensor& dc) {
    require_same_shape(dh, cache.c, "lstm_step_backward");
    require_same_shape(dc, cache.c, "lstm_step_backward");
    const std::size_t batch = dh.rows(), u = core.units;
    Tensor da({batch, 4 * u});
    LstmGrads g;
    g.dc_prev = Tensor({batch, u});
    for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < u; ++j) {
            const double iv = cache.i(r, j), fv = cache.f(r, j), gv = cache.g(r, j),
                         ov = cache.o(r, j), tc = cache.tanh_c(r, j);
            const double dov = dh(r, j) * tc;
            const double dc_total = dc(r, j) + dh(r, j) * ov * (1.0 - tc * tc);
            const double div = dc_total * gv;
            const double dgv = dc_total * iv;
            const double dfv = dc_total * cache.c_prev(r, j);
            g.dc_prev(r, j) = dc_total * fv;
            da(r, j) = div * iv * (1.0 - iv);
            da(r, u + j) = dfv * fv * (1.0 - fv);
            da(r, 2 * u + j) = dgv * (1.0 - gv * gv);
            da(r, 3 * u + j) = dov * ov * (1.0 - ov);
        }
    g.dW = matmul_tn(da, cache.z);
    g.db = col_sum(da);
    const Tensor dz = matmul(da, core.W);
    g.dx = slice_cols(dz, 0, core.input_dim);
    g.dh_prev = slice_cols(dz, core.input_dim, core.input_dim + u);
    return g;
}

void lstm_apply(LstmCore& core, const Tensor& dW, const Tensor& db) {
    adam_step(core.W, dW, core.w_state);
    adam_step(core.b, db, core.b_state);
}

// ---- misc --------------------------------------------------------------------

Tensor sigmoid(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
    return y;
}

Tensor tanh_t(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    return y;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
    Tensor out({labels.size(), classes});
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= classes) throw std::invalid_argument("one_hot: label out of range");
        out(r, labels[r]) = 1.0;
    }
    return out;
}

}  // namespace dni

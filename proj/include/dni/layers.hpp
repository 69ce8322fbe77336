// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dni/adam.hpp"
#include "dni/rng.hpp"
#include "dni/tensor.hpp"

namespace dni {

// ---- linear -----------------------------------------------------------------

/// Fully connected layer, y = x W^T + b, with W stored [out x in].
struct LinearLayer {
    Tensor W;
    Tensor b;
    AdamState w_state;
    AdamState b_state;

    std::size_t in_dim() const { return W.cols(); }
    std::size_t out_dim() const { return W.rows(); }

    /// Gaussian init with stddev 1/sqrt(in); biases zero.
    static LinearLayer create(std::size_t in, std::size_t out, RngState& rng, AdamConfig cfg);
    /// All-zero weights and biases (synthetic-model output layers).
    static LinearLayer zeros(std::size_t in, std::size_t out, AdamConfig cfg);
};

struct LinearCache {
    Tensor x;
};

struct LinearGrads {
    Tensor dx;
    Tensor dW;
    Tensor db;
};

Tensor linear_forward(const LinearLayer& layer, const Tensor& x, LinearCache& cache);
LinearGrads linear_backward(const LinearLayer& layer, const LinearCache& cache, const Tensor& dy);
/// Adam step on W and b.
void linear_apply(LinearLayer& layer, const LinearGrads& grads);

// ---- batchnorm ---------------------------------------------------------------

enum class BnMode { train, eval };

struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.9;
    double eps = 1e-5;
    AdamState gamma_state;
    AdamState beta_state;

    static BatchNormLayer create(std::size_t features, AdamConfig cfg);
};

struct BnCache {
    Tensor xhat;
    Tensor inv_std;  // [features]
};

struct BnGrads {
    Tensor dx;
    Tensor dgamma;
    Tensor dbeta;
};

/// Train mode normalizes with batch stats and folds them into the running
/// stats; eval mode uses running stats only. Train mode requires batch >= 2.
Tensor batchnorm_forward(BatchNormLayer& layer, const Tensor& x, BnMode mode, BnCache& cache);
BnGrads batchnorm_backward(const BatchNormLayer& layer, const BnCache& cache, const Tensor& dy);
void batchnorm_apply(BatchNormLayer& layer, const BnGrads& grads);

// ---- standardization -----------------------------------------------------------

struct StandardizeCache {
    Tensor xhat;
    Tensor inv_std;  // [features]
};

/// Parameter-free per-feature normalization over the batch: zero mean, unit
/// variance. Stateless stand-in for batch norm on recurrent paths, where
/// running statistics are out of scope. Requires batch >= 2.
Tensor standardize_forward(const Tensor& x, StandardizeCache& cache, double eps = 1e-5);
Tensor standardize_backward(const StandardizeCache& cache, const Tensor& dy);

// ---- relu --------------------------------------------------------------------

struct ReluCache {
    Tensor x;
};

Tensor relu_forward(const Tensor& x, ReluCache& cache);
Tensor relu_backward(const ReluCache& cache, const Tensor& dy);

// ---- losses ------------------------------------------------------------------

/// Mean cross entropy over the batch with softmax folded in. Returns the loss
/// and d(loss)/d(logits), already divided by the batch size.
double softmax_xent(const Tensor& logits, const std::vector<std::size_t>& labels, Tensor& dlogits);

/// Softmax probabilities per row (prediction-time helper).
Tensor softmax(const Tensor& logits);

/// Squared L2 distance summed over features and averaged over rows. Returns
/// the loss and d(loss)/d(pred).
double l2_loss(const Tensor& pred, const Tensor& target, Tensor& dpred);

/// Per-bit sigmoid cross entropy in nats with a 0/1 mask per row: masked rows
/// contribute nothing to the loss or the gradient. Bits are summed, the batch
/// is averaged. row_mask has one entry per logits row.
double masked_sigmoid_xent(const Tensor& logits, const Tensor& targets, const Tensor& row_mask,
                           Tensor& dlogits);

// ---- lstm --------------------------------------------------------------------

/// LSTM step without peephole connections. The four gates are packed row-wise
/// into one weight matrix over z = [x; h_prev], in the order
/// input, forget, candidate, output: W [4U x (X+U)], b [4U].
struct LstmCore {
    Tensor W;
    Tensor b;
    std::size_t input_dim = 0;
    std::size_t units = 0;
    AdamState w_state;
    AdamState b_state;

    /// Gaussian init with stddev 1/sqrt(X+U); forget-gate biases start at 1
    /// so early training does not forget by default.
    static LstmCore create(std::size_t input_dim, std::size_t units, RngState& rng, AdamConfig cfg);
};

struct LstmCache {
    Tensor z;       // [batch x (X+U)]
    Tensor c_prev;  // [batch x U]
    Tensor i, f, g, o;
    Tensor c;
    Tensor tanh_c;
};

struct LstmGrads {
    Tensor dx;
    Tensor dh_prev;
    Tensor dc_prev;
    Tensor dW;
    Tensor db;
};

void lstm_step_forward(const LstmCore& core, const Tensor& x, const Tensor& h_prev,
                       const Tensor& c_prev, Tensor& h, Tensor& c, LstmCache& cache);
LstmGrads lstm_step_backward(const LstmCore& core, const LstmCache& cache, const Tensor& dh,
                             const Tensor& dc);
void lstm_apply(LstmCore& core, const Tensor& dW, const Tensor& db);

// ---- misc --------------------------------------------------------------------

Tensor sigmoid(const Tensor& x);
Tensor tanh_t(const Tensor& x);
/// One-hot rows: out[r, labels[r]] = 1.
Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes);

}  // namespace dni

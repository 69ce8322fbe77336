// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "dni/adam.hpp"
#include "dni/layers.hpp"
#include "dni/rng.hpp"
#include "dni/synthetic_models.hpp"
#include "dni/tasks_io.hpp"
#include "dni/tensor.hpp"

namespace dni {

/// Two networks on one digit stream. Network A ticks every step: a two-layer
/// FCN feeds an LSTM, a classifier head counts odd digits over the last T
/// steps, and a message head (linear + standardization) reports to Network B.
/// Network B ticks every T steps: its LSTM consumes A's message and a
/// classifier head counts threes over the last T*T steps.
enum class TwoNetMode { locked, decoupled_dni, decoupled_no_feedback };

struct TwoNetConfig {
    std::size_t T = 4;  // B ticks once per T A-steps; B's loss lands every T*T steps
    std::size_t input_dim = 784;
    std::size_t fcn_width = 64;
    std::size_t a_units = 64;
    std::size_t b_units = 64;
    std::size_t message_dim = 32;
    double sg_feedback_scale = 10.0;
    TwoNetMode mode = TwoNetMode::decoupled_dni;
    AdamConfig adam{3e-4, 0.9, 0.999, 1e-8};
    AdamConfig sg_adam{3e-4, 0.9, 0.999, 1e-8};

    std::size_t odd_classes() const { return T + 1; }
    std::size_t threes_classes() const { return T * T + 1; }
    void validate() const;  // T >= 2 and positive dims
};

/// Count targets at one boundary of the stream.
struct StreamLabels {
    std::size_t count_odd = 0;     // over the last min(T, len) digits
    std::size_t count_threes = 0;  // over the last min(T*T, len) digits
};

StreamLabels stream_labels(const std::vector<std::size_t>& digits, std::size_t T);

struct TwoNetSystem {
    TwoNetConfig cfg;
    std::size_t batch = 0;

    // Network A.
    LinearLayer fcn1, fcn2;
    BatchNormLayer bn1, bn2;
    LstmCore a_core;
    LinearLayer a_classifier;
    LinearLayer msg_head;

    // Network B plus its model of A's message gradient.
    LstmCore b_core;
    LinearLayer b_classifier;
    SgModel msg_sg;

    // Rolling stream state.
    Tensor a_h, a_c, b_h, b_c;
    std::size_t steps_done = 0;
    std::size_t a_updates = 0;
    std::size_t b_updates = 0;

    // Decoupled staging: B's inputs since its last update, and the running
    // count of threes over the same span.
    std::vector<Tensor> staged_messages;
    std::vector<LstmCache> staged_b_caches;
    std::vector<std::size_t> staged_threes;

    static TwoNetSystem create(const TwoNetConfig& cfg, std::size_t batch, RngState& rng);
};

void set_learning_rate(TwoNetSystem& sys, double lr);     // both trunks
void set_sg_learning_rate(TwoNetSystem& sys, double lr);  // message-gradient model only

/// Pre-update gradients of one step, for oracle checks. Parts that did not
/// run in a given step stay empty.
struct MultiNetGrads {
    Tensor fcn1_dW, fcn1_db, bn1_dgamma, bn1_dbeta;
    Tensor fcn2_dW, fcn2_db, bn2_dgamma, bn2_dbeta;
    Tensor a_core_dW, a_core_db;
    Tensor a_cls_dW, a_cls_db;
    Tensor msg_dW, msg_db;
    Tensor b_core_dW, b_core_db;
    Tensor b_cls_dW, b_cls_db;
};

struct LockedReport {
    double total_loss = 0.0;
    std::vector<double> odd_losses;  // one per A boundary, T of them
    double threes_loss = 0.0;
    MultiNetGrads grads;
};

/// One joint window: T*T A-steps and T B-ticks unrolled as a single graph,
/// full backpropagation through the message links, then exactly one update to
/// every trunk parameter of A and B. xs/labels hold T*T entries.
LockedReport locked_joint_step(TwoNetSystem& sys, const std::vector<Tensor>& xs,
                               const std::vector<std::vector<std::size_t>>& labels);

struct DecoupledReport {
    double odd_loss = 0.0;
    double threes_loss = std::numeric_limits<double>::quiet_NaN();  // on B updates
    double sg_loss = std::numeric_limits<double>::quiet_NaN();      // on B updates
    bool b_updated = false;
    Tensor message;   // standardized message emitted at this boundary
    Tensor feedback;  // gradient injected at the message, already scaled
    MultiNetGrads grads;
};

/// One A window: T A-steps, one update to A seeded by its own count loss plus
/// the (scaled) synthetic message gradient. B consumes the detached message;
/// every T-th call B updates on its count loss and the message-gradient model
/// regresses on the true gradients that update produced. xs/labels hold T
/// entries. Mode decoupled_no_feedback zeroes the injected gradient.
DecoupledReport decoupled_step(TwoNetSystem& sys, const std::vector<Tensor>& xs,
                               const std::vector<std::vector<std::size_t>>& labels);

/// Draws one stream step: each batch row gets an independent uniform sample
/// from the dataset.
void sample_digit_step(const MnistDataset& data, std::size_t batch, RngState& rng, Tensor& x,
                       std::vector<std::size_t>& labels);

struct TwoNetEval {
    double a_error = 0.0;        // odd-count error rate at A boundaries
    double b_error = 0.0;        // threes-count error rate at B boundaries
    double chance_b_error = 0.0; // error of always predicting the modal count
};

/// Runs `windows` update-free B-windows (T*T steps each) from a zero state on
/// digits drawn from the dataset. FCN batch norm runs in eval mode; nothing
/// in the system is modified.
TwoNetEval evaluate_stream(const TwoNetSystem& sys, const MnistDataset& data,
                           std::size_t windows, RngState rng);

}  // namespace dni

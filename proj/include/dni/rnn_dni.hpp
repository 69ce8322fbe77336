// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "dni/layers.hpp"
#include "dni/rng.hpp"
#include "dni/synthetic_models.hpp"
#include "dni/tasks_io.hpp"
#include "dni/tensor.hpp"

namespace dni {

/// Truncated-BPTT training options. sg_scale is applied only where the
/// synthetic gradient is consumed as the boundary seed, never to the
/// regression target.
struct TbpttConfig {
    std::size_t T = 3;  // unroll length, one of {2,3,4,5,8,20,40}
    bool dni_enabled = true;
    bool aux_enabled = false;
    double sg_scale = 0.1;
    bool backprop_sg_error_into_core = false;

    void validate() const;
};

/// Future-gradient head: a zero-initialised linear map from the core output
/// to the synthetic-gradient space (2 x units), trained to predict what the
/// synthetic model will emit one window later.
using AuxHead = LinearLayer;

struct RnnDniModel {
    std::size_t input_dim = 0;
    std::size_t units = 0;
    std::size_t output_dim = 0;
    LstmCore core;
    LinearLayer readout;
    /// Predicts [dh; dc] (2 x units wide) from the core output h.
    SgModel sg;
    AuxHead aux;

    static RnnDniModel create(std::size_t input_dim, std::size_t units, std::size_t output_dim,
                              RngState& rng, AdamConfig adam = {7e-5, 0.9, 0.999, 1e-8},
                              AdamConfig sg_adam = {7e-5, 0.9, 0.999, 1e-8});
};

/// Applies a new learning rate to every Adam state in the model.
void set_learning_rate(RnnDniModel& model, double lr);

/// Trainer state carried between windows. Exactly one core beyond the T
/// fresh steps is retained: the boundary state (h, c) plus the cache of the
/// step that produced it, so the pending prediction's regression error can
/// optionally flow one step back into the core.
struct RnnTrainWindow {
    TbpttConfig cfg;
    Tensor h, c;          // [batch x units] boundary state
    Tensor pending_pred;  // raw synthetic gradient awaiting its target
    bool has_pending = false;
    LstmCache boundary_cache;  // last core of the previous unroll
    bool has_boundary_cache = false;
    std::uint64_t windows_done = 0;

    static RnnTrainWindow start(const TbpttConfig& cfg, std::size_t batch, std::size_t units);
};

struct WindowReport {
    double loss = 0.0;  // sum of per-step losses
    std::vector<double> step_losses;
    std::vector<Tensor> logits;  // per-step readout outputs
    double sg_loss = std::numeric_limits<double>::quiet_NaN();   // NaN: no pending regression ran
    double aux_loss = std::numeric_limits<double>::quiet_NaN();  // NaN: aux task did not run
    Tensor boundary_pred;        // raw synthetic gradient at the new boundary
    Tensor start_grad;           // [dh; dc] at the window start, the pending target
    Tensor core_dW, core_db;     // parameter gradients accumulated this window
    Tensor readout_dW, readout_db;
};

/// One training window: unroll T steps from the carried state, seed the
/// boundary with sg_scale * prediction (zeros when DNI is off), backpropagate
/// through the window, regress the pending prediction onto the gradient that
/// arrives at the window start, run the aux regression if enabled, and apply
/// one Adam update to the core and readout. xs, targets and masks each hold T
/// per-step tensors; masks are per-row 0/1.
WindowReport window_step(RnnDniModel& model, RnnTrainWindow& window, const std::vector<Tensor>& xs,
                         const std::vector<Tensor>& targets, const std::vector<Tensor>& masks);

/// Regression loss of the future-gradient head at h_start against a detached
/// synthetic gradient produced one window later. Pure evaluation, no update.
double aux_future_loss(RnnDniModel& model, const Tensor& h_start, const Tensor& future_pred);

// ---- curriculum runner ---------------------------------------------------------

struct CurriculumRunConfig {
    CurriculumState::Kind kind = CurriculumState::Kind::copy;
    TbpttConfig tbptt;
    std::size_t batch = 32;
    std::size_t units = 64;
    std::size_t data_bits = 8;
    std::size_t budget_episodes = 150000;  // total across the batch
    double lr = 7e-5;
    double sg_lr = 7e-5;
    std::uint64_t seed = 1;
};

struct CurriculumPoint {
    std::size_t samples;  // episodes consumed when the difficulty was solved
    std::size_t t_task;   // episode length of the difficulty that was solved
};

struct CurriculumResult {
    std::vector<CurriculumPoint> trace;
    std::size_t episodes_consumed = 0;
    std::size_t max_t_task_solved = 0;  // 0 until the first advancement
    CurriculumState curriculum;         // final difficulty state
    std::uint64_t windows = 0;
};

/// One generated episode in flight: inputs are consumed row by row, sigmoid
/// probabilities are written back one window later as the logits appear, and
/// the completed record scores the curriculum.
struct EpisodeRecord {
    Episode ep;
    Tensor probs;  // [t_task x data_bits]
    std::size_t rows_filled = 0;
};

struct CurriculumStream {
    TaskStreamState task;
    std::deque<EpisodeRecord> live;
    std::size_t cursor = 0;  // next unconsumed input row of the back record
};

/// Stepwise curriculum training loop. All state lives in the struct so a run
/// can stop between windows, be checkpointed, and continue bit-for-bit.
struct CurriculumTrainer {
    CurriculumRunConfig cfg;
    RnnDniModel model;
    RnnTrainWindow window;
    CurriculumResult result;
    std::vector<CurriculumStream> streams;
    double last_loss = std::numeric_limits<double>::quiet_NaN();     // most recent window
    double last_sg_loss = std::numeric_limits<double>::quiet_NaN();  // NaN until a regression runs

    static CurriculumTrainer create(const CurriculumRunConfig& cfg);
    /// Runs one window, or returns false if the episode budget is spent.
    bool step();
};

/// Trains an LSTM on a batch of independent task streams, consumed
/// continuously across episode boundaries, advancing the difficulty whenever
/// the rolling bits-error average drops below the threshold. Returns the
/// progression trace.
CurriculumResult run_curriculum(const CurriculumRunConfig& cfg);

}  // namespace dni

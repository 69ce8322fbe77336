// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dni/checkpoint.hpp"
#include "dni/ff_dni.hpp"
#include "dni/multi_net.hpp"
#include "dni/rnn_dni.hpp"
#include "dni/tasks_io.hpp"

namespace dni {

// ---- experiment configuration ----------------------------------------------------

enum class ExperimentKind {
    ff_mnist,        // feedforward classifier: backprop | dni | stale gradients
    ff_stochastic,   // per-unit updates with probability p_update
    ff_unlock,       // forward- and update-decoupled training
    rnn_copy,        // Copy curriculum (budget counts episodes)
    rnn_repeat,      // Repeat Copy curriculum (budget counts episodes)
    rnn_chars,       // next-character prediction over a byte stream
    multi_net,       // two networks coupled by a message channel
    bp_lambda_check, // built-in estimator self-checks, one row per repetition
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

/// Trainer selector for ff_mnist. The other ff kinds fix their step type.
enum class FfMethod { backprop, dni, stale };

std::string to_string(FfMethod method);
FfMethod parse_ff_method(const std::string& name);

struct FfOptions {
    FfMethod method = FfMethod::dni;
    std::size_t hidden = 256;
    std::size_t depth = 3;
    DniPlacement placement = DniPlacement::every;
    std::size_t single_at = 1;
    Conditioning conditioning = Conditioning::none;
    std::size_t sg_hidden_layers = 2;
    std::size_t sg_hidden_width = 256;
    double lr = 3e-4;
    double sg_lr = 3e-4;
    double p_update = 1.0;  // ff_stochastic and ff_unlock
    /// Step-decay: divide the learning rate by 10 at 60% and at 80% of the
    /// step budget.
    bool lr_decay = false;
};

struct RnnOptions {
    std::size_t T = 3;
    bool dni = true;
    bool aux = false;
    double sg_scale = 0.1;
    bool sg_into_core = false;
    std::size_t units = 64;
    std::size_t data_bits = 8;
    double lr = 7e-5;
    double sg_lr = 7e-5;
};

struct TwoNetOptions {
    TwoNetMode mode = TwoNetMode::decoupled_dni;
    std::size_t T = 4;
    std::size_t fcn_width = 64;
    std::size_t a_units = 64;
    std::size_t b_units = 64;
    std::size_t message_dim = 32;
    double sg_feedback_scale = 10.0;
    double lr = 3e-4;
    double sg_lr = 3e-4;
    std::size_t eval_windows = 50;
};

std::string to_string(TwoNetMode mode);
TwoNetMode parse_two_net_mode(const std::string& name);

/// One-parameter grid attached to a config; `sweep` runs the base config once
/// per value with deterministic seed offsets.
struct SweepSpec {
    std::string parameter;  // empty: no sweep attached
    std::vector<double> values;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ff_mnist;
    std::uint64_t seed = 1;
    /// Steps for step-driven kinds; total episodes for the rnn curricula.
    std::uint64_t budget = 0;
    std::string out_dir = "runs/out";
    std::size_t batch = 256;
    std::uint64_t metrics_every = 1;
    std::uint64_t eval_every = 0;      // 0: evaluate only at the final step
    std::uint64_t checkpoint_every = 0;  // 0: write only the final checkpoint
    /// Dataset root fallback; the DNI_DATA_DIR environment variable wins when
    /// it holds the expected splits.
    std::string data_dir = "data";
    std::string chars_path;  // rnn_chars input; empty uses a built-in sample text
    FfOptions ff;
    RnnOptions rnn;
    TwoNetOptions two_net;
    SweepSpec sweep;

    void validate() const;
};

/// Strict JSON codec: unknown keys are errors, serialization is canonical and
/// round-trips every field.
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// ---- running ----------------------------------------------------------------------

struct MetricsRow {
    std::uint64_t step = 0;
    std::uint64_t samples = 0;
    std::vector<double> values;  // aligned with Runner::columns()
};

/// One experiment's stepwise state machine. `advance` runs exactly one
/// harness step; all cross-step state round-trips through save/load so a run
/// can be split at any step boundary without changing the trajectory.
class Runner {
  public:
    virtual ~Runner() = default;
    virtual std::vector<std::string> columns() const = 0;
    virtual bool done() const = 0;
    virtual MetricsRow advance() = 0;
    virtual void save(CheckpointWriter& w) const = 0;
    virtual void load(const CheckpointReader& r) = 0;
};

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg);

struct RunResult {
    std::uint64_t steps = 0;  // harness steps completed over the whole run
    std::string metrics_path;
    std::string checkpoint_path;
};

/// Runs to the budget, writing out_dir/config.json, out_dir/metrics.csv and
/// out_dir/checkpoint.bin. With a resume path, restores that checkpoint and
/// continues; the resumed CSV holds only the new rows.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& resume_path = "");

/// One run per sweep value, in out_dir/run_000, run_001, ...; run i uses
/// seed + i. Writes out_dir/sweep_manifest.json.
std::vector<RunResult> run_sweep(const ExperimentConfig& base);

// ---- verification -------------------------------------------------------------

struct VerifyCheck {
    std::string name;
    bool passed = false;
    double value = 0.0;  // the measured error the threshold was applied to
    std::string detail;
};

/// Built-in invariant suite. `corrupt_check` is a test hook: the named check
/// has its computed gradient (or equivalent) perturbed before comparison, so
/// exactly that check must fail. Unknown names throw.
std::vector<VerifyCheck> run_verification(const std::string& corrupt_check = "");

/// Shared self-check measurements (also the bp_lambda_check experiment body).
/// Max parameter divergence between a lambda = 1 mixed-estimator trajectory
/// and plain backprop on a small relu chain.
double bp_lambda_chain_divergence(std::size_t depth, std::size_t width, std::size_t batch,
                                  std::size_t steps, std::uint64_t seed);
/// Max |sum(weights) - 1| over random schedules of length <= 8.
double lambda_simplex_deviation(std::size_t schedules, std::uint64_t seed);
/// Max error of the mixed estimator against exact backprop when every
/// synthetic gradient is the true gradient, over random schedules.
double oracle_mixture_error(std::size_t schedules, std::uint64_t seed);
/// Max |difference| between window_step's accumulated parameter gradients and
/// the per-step mixed-estimator recurrence with the truncation-rule schedule,
/// over a short multi-window run.
double rnn_window_recurrence_divergence(std::size_t T, std::size_t windows, std::uint64_t seed);

}  // namespace dni

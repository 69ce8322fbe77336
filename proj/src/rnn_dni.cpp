// SPDX-License-Identifier: Apache-2.0
#include "dni/rnn_dni.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace dni {

void TbpttConfig::validate() const {
    static constexpr std::size_t allowed[] = {2, 3, 4, 5, 8, 20, 40};
    if (std::find(std::begin(allowed), std::end(allowed), T) == std::end(allowed)) {
        throw std::invalid_argument("TbpttConfig: T must be one of {2,3,4,5,8,20,40}");
    }
    if (aux_enabled && T < 2) {
        throw std::invalid_argument("TbpttConfig: aux task needs T >= 2");
    }
    if (aux_enabled && !dni_enabled) {
        throw std::invalid_argument("TbpttConfig: aux task needs DNI enabled");
    }
}

RnnDniModel RnnDniModel::create(std::size_t input_dim, std::size_t units, std::size_t output_dim,
                                RngState& rng, AdamConfig adam, AdamConfig sg_adam) {
    RnnDniModel m;
    m.input_dim = input_dim;
    m.units = units;
    m.output_dim = output_dim;
    m.core = LstmCore::create(input_dim, units, rng, adam);
    m.readout = LinearLayer::create(units, output_dim, rng, adam);
    SgModelConfig cfg;
    cfg.input_dim = units;
    cfg.output_dim = 2 * units;
    cfg.hidden_layers = 1;
    cfg.hidden_width = units;
    cfg.adam = sg_adam;
    m.sg = SgModel::create(cfg, rng);
    m.aux = LinearLayer::zeros(units, 2 * units, sg_adam);
    return m;
}

namespace {

void set_lr(AdamState& st, double lr) { st.cfg.lr = lr; }

void set_lr(LinearLayer& l, double lr) {
    set_lr(l.w_state, lr);
    set_lr(l.b_state, lr);
}

}  // namespace

void set_learning_rate(RnnDniModel& model, double lr) {
    set_lr(model.core.w_state, lr);
    set_lr(model.core.b_state, lr);
    set_lr(model.readout, lr);
    for (auto& h : model.sg.hidden) set_lr(h, lr);
    for (auto& n : model.sg.norms) {
        set_lr(n.gamma_state, lr);
        set_lr(n.beta_state, lr);
    }
    set_lr(model.sg.out, lr);
    set_lr(model.aux, lr);
}

RnnTrainWindow RnnTrainWindow::start(const TbpttConfig& cfg, std::size_t batch,
                                     std::size_t units) {
    cfg.validate();
    RnnTrainWindow w;
    w.cfg = cfg;
    w.h = Tensor({batch, units});
    w.c = Tensor({batch, units});
    return w;
}

double aux_future_loss(RnnDniModel& model, const Tensor& h_start, const Tensor& future_pred) {
    LinearCache cache;
    const Tensor pred = linear_forward(model.aux, h_start, cache);
    Tensor dpred;
    return l2_loss(pred, future_pred, dpred);
}

WindowReport window_step(RnnDniModel& model, RnnTrainWindow& window, const std::vector<Tensor>& xs,
                         const std::vector<Tensor>& targets, const std::vector<Tensor>& masks) {
    const TbpttConfig& cfg = window.cfg;
    const std::size_t T = cfg.T;
    const std::size_t U = model.units;
    if (xs.size() != T || targets.size() != T || masks.size() != T) {
        throw std::invalid_argument("window_step: need exactly T steps of inputs/targets/masks");
    }
    if (cfg.dni_enabled && window.windows_done > 0 && !window.has_pending) {
        throw std::invalid_argument("window_step: pending prediction missing on a non-first window");
    }
    const std::size_t batch = xs[0].rows();

    WindowReport report;
    report.step_losses.resize(T);
    report.logits.resize(T);

    // Forward unroll from the carried boundary state.
    std::vector<LstmCache> caches(T);
    std::vector<LinearCache> ro_caches(T);
    std::vector<Tensor> dlogits(T);
    std::vector<Tensor> hs(T + 1), cs(T + 1);
    hs[0] = window.h;
    cs[0] = window.c;
    for (std::size_t t = 0; t < T; ++t) {
        lstm_step_forward(model.core, xs[t], hs[t], cs[t], hs[t + 1], cs[t + 1], caches[t]);
        report.logits[t] = linear_forward(model.readout, hs[t + 1], ro_caches[t]);
        report.step_losses[t] =
            masked_sigmoid_xent(report.logits[t], targets[t], masks[t], dlogits[t]);
        report.loss += report.step_losses[t];
    }

    // Boundary seed: the synthetic gradient at the final state, scaled where
    // it is consumed. Zero when DNI is off, exactly truncated BPTT.
    Tensor dh({batch, U}), dc({batch, U});
    if (cfg.dni_enabled) {
        report.boundary_pred = sg_predict(model.sg, hs[T]);
        dh = scale(slice_cols(report.boundary_pred, 0, U), cfg.sg_scale);
        dc = scale(slice_cols(report.boundary_pred, U, 2 * U), cfg.sg_scale);
    }

    // BPTT through the window, accumulating parameter gradients.
    report.core_dW = Tensor(model.core.W.shape());
    report.core_db = Tensor(model.core.b.shape());
    report.readout_dW = Tensor(model.readout.W.shape());
    report.readout_db = Tensor(model.readout.b.shape());
    for (std::size_t t = T; t-- > 0;) {
        LinearGrads rg = linear_backward(model.readout, ro_caches[t], dlogits[t]);
        axpy(report.readout_dW, 1.0, rg.dW);
        axpy(report.readout_db, 1.0, rg.db);
        axpy(dh, 1.0, rg.dx);
        LstmGrads lg = lstm_step_backward(model.core, caches[t], dh, dc);
        axpy(report.core_dW, 1.0, lg.dW);
        axpy(report.core_db, 1.0, lg.db);
        dh = std::move(lg.dh_prev);
        dc = std::move(lg.dc_prev);
    }
    report.start_grad = concat_cols(dh, dc);

    // The gradient that arrived at the window start is the (slightly stale)
    // target for the prediction consumed one window ago. Its regression error
    // may flow one step further back through the retained boundary core.
    if (cfg.dni_enabled && window.has_pending) {
        Tensor sg_dh;
        report.sg_loss =
            sg_update(model.sg, window.h, nullptr, report.start_grad,
                      cfg.backprop_sg_error_into_core ? &sg_dh : nullptr);
        if (cfg.backprop_sg_error_into_core && window.has_boundary_cache) {
            LstmGrads extra =
                lstm_step_backward(model.core, window.boundary_cache, sg_dh, Tensor({batch, U}));
            axpy(report.core_dW, 1.0, extra.dW);
            axpy(report.core_db, 1.0, extra.db);
        }

        if (cfg.aux_enabled) {
            LinearCache ac;
            const Tensor aux_pred = linear_forward(model.aux, window.h, ac);
            Tensor dap;
            report.aux_loss = l2_loss(aux_pred, report.boundary_pred, dap);
            LinearGrads ag = linear_backward(model.aux, ac, dap);
            linear_apply(model.aux, ag);
        }
    }

    lstm_apply(model.core, report.core_dW, report.core_db);
    LinearGrads ro;
    ro.dW = report.readout_dW;
    ro.db = report.readout_db;
    linear_apply(model.readout, ro);

    window.h = hs[T];
    window.c = cs[T];
    window.pending_pred = report.boundary_pred;
    window.has_pending = cfg.dni_enabled;
    window.boundary_cache = caches[T - 1];
    window.has_boundary_cache = true;
    window.windows_done += 1;
    return report;
}

// ---- curriculum runner ---------------------------------------------------------

namespace {

EpisodeRecord fresh_record(CurriculumState& cur, TaskStreamState& stream) {
    EpisodeRecord rec;
    rec.ep = cur.kind == CurriculumState::Kind::copy
                 ? gen_copy(cur.n, stream)
                 : gen_repeat_copy(cur.n, cur.r, stream);
    rec.probs = Tensor({rec.ep.t_task, stream.data_bits});
    return rec;
}

}  // namespace

CurriculumTrainer CurriculumTrainer::create(const CurriculumRunConfig& cfg) {
    cfg.tbptt.validate();
    const std::size_t B = cfg.batch;
    const std::size_t bits = cfg.data_bits;

    RngState rng(cfg.seed);
    AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
    AdamConfig sg_adam{cfg.sg_lr, 0.9, 0.999, 1e-8};
    CurriculumTrainer tr;
    tr.cfg = cfg;
    tr.model = RnnDniModel::create(bits + 3, cfg.units, bits, rng, adam, sg_adam);
    tr.window = RnnTrainWindow::start(cfg.tbptt, B, cfg.units);
    tr.result.curriculum.kind = cfg.kind;
    tr.streams.resize(B);
    for (std::size_t s = 0; s < B; ++s) {
        tr.streams[s].task.rng = rng.split();
        tr.streams[s].task.data_bits = bits;
        tr.streams[s].live.push_back(fresh_record(tr.result.curriculum, tr.streams[s].task));
    }
    return tr;
}

bool CurriculumTrainer::step() {
    if (result.episodes_consumed >= cfg.budget_episodes) return false;
    const std::size_t T = cfg.tbptt.T;
    const std::size_t B = cfg.batch;
    const std::size_t bits = cfg.data_bits;

    // Steps are assembled per window; scoring lags until the logits exist.
    struct StepRef {
        std::size_t record;  // index into live at scoring time
        std::size_t row;
    };
    std::vector<Tensor> xs(T), targets(T), masks(T);
    std::vector<std::vector<StepRef>> refs(T, std::vector<StepRef>(B));
    for (std::size_t t = 0; t < T; ++t) {
        xs[t] = Tensor({B, bits + 3});
        targets[t] = Tensor({B, bits});
        masks[t] = Tensor({B});
        for (std::size_t s = 0; s < B; ++s) {
            CurriculumStream& st = streams[s];
            if (st.cursor == st.live.back().ep.t_task) {
                st.live.push_back(fresh_record(result.curriculum, st.task));
                st.cursor = 0;
            }
            const Episode& ep = st.live.back().ep;
            const std::size_t row = st.cursor++;
            refs[t][s] = {st.live.size() - 1, row};
            for (std::size_t j = 0; j < bits + 3; ++j) xs[t](s, j) = ep.inputs(row, j);
            for (std::size_t j = 0; j < bits; ++j) targets[t](s, j) = ep.targets(row, j);
            masks[t][s] = ep.mask[row];
        }
    }

    WindowReport report = window_step(model, window, xs, targets, masks);
    result.windows += 1;
    last_loss = report.loss;
    last_sg_loss = report.sg_loss;

    // Score: write probabilities back, close out finished episodes, and
    // let completed ones drive the curriculum (in step, then stream order).
    for (std::size_t t = 0; t < T; ++t) {
        const Tensor probs = sigmoid(report.logits[t]);
        for (std::size_t s = 0; s < B; ++s) {
            EpisodeRecord& rec = streams[s].live[refs[t][s].record];
            for (std::size_t j = 0; j < bits; ++j) rec.probs(refs[t][s].row, j) = probs(s, j);
            rec.rows_filled += 1;
            if (rec.rows_filled == rec.ep.t_task) {
                result.episodes_consumed += 1;
                // Warm-up episodes carry no scored rows; they cannot be
                // measured, so they do not feed the threshold.
                if (rec.ep.mask.sum() > 0.0) {
                    const std::size_t solved = result.curriculum.t_task();
                    if (curriculum_advance(result.curriculum, bits_error(rec.probs, rec.ep))) {
                        result.trace.push_back({result.episodes_consumed, solved});
                        result.max_t_task_solved = std::max(result.max_t_task_solved, solved);
                    }
                }
            }
        }
    }
    // Finished episodes at the front can go; record indices are rebuilt
    // from scratch at the next assembly so popping here is safe.
    for (std::size_t s = 0; s < B; ++s) {
        auto& live = streams[s].live;
        while (live.size() > 1 && live.front().rows_filled == live.front().ep.t_task)
            live.pop_front();
    }
    return true;
}

CurriculumResult run_curriculum(const CurriculumRunConfig& cfg) {
    CurriculumTrainer tr = CurriculumTrainer::create(cfg);
    while (tr.step()) {
    }
    return tr.result;
}

}  // namespace dni

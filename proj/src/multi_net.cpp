// SPDX-License-Identifier: Apache-2.0
#include "dni/multi_net.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace dni {

namespace {

void set_lr(AdamState& st, double lr) { st.cfg.lr = lr; }

void set_lr(LinearLayer& l, double lr) {
    set_lr(l.w_state, lr);
    set_lr(l.b_state, lr);
}

void set_lr(BatchNormLayer& l, double lr) {
    set_lr(l.gamma_state, lr);
    set_lr(l.beta_state, lr);
}

void set_lr(LstmCore& core, double lr) {
    set_lr(core.w_state, lr);
    set_lr(core.b_state, lr);
}

void set_lr(SgModel& m, double lr) {
    for (auto& h : m.hidden) set_lr(h, lr);
    for (auto& n : m.norms) set_lr(n, lr);
    set_lr(m.out, lr);
}

void acc(Tensor& into, const Tensor& g) {
    if (into.size() == 0)
        into = g;
    else
        axpy(into, 1.0, g);
}

/// One Network A step: two FCN units then the LSTM.
struct AStepCache {
    LinearCache lin1, lin2;
    BnCache bn1, bn2;
    ReluCache relu1, relu2;
    LstmCache lstm;
};

void a_forward_step(TwoNetSystem& sys, const Tensor& x, BnMode mode, Tensor& h, Tensor& c,
                    AStepCache& cache) {
    Tensor z1 = linear_forward(sys.fcn1, x, cache.lin1);
    Tensor n1 = batchnorm_forward(sys.bn1, z1, mode, cache.bn1);
    Tensor r1 = relu_forward(n1, cache.relu1);
    Tensor z2 = linear_forward(sys.fcn2, r1, cache.lin2);
    Tensor n2 = batchnorm_forward(sys.bn2, z2, mode, cache.bn2);
    Tensor r2 = relu_forward(n2, cache.relu2);
    Tensor h_new, c_new;
    lstm_step_forward(sys.a_core, r2, h, c, h_new, c_new, cache.lstm);
    h = std::move(h_new);
    c = std::move(c_new);
}

/// Backward through one A step. dh/dc enter at the step's output state and
/// leave at its input state; trunk gradients accumulate into g.
void a_backward_step(TwoNetSystem& sys, const AStepCache& cache, Tensor& dh, Tensor& dc,
                     MultiNetGrads& g) {
    LstmGrads lg = lstm_step_backward(sys.a_core, cache.lstm, dh, dc);
    acc(g.a_core_dW, lg.dW);
    acc(g.a_core_db, lg.db);
    Tensor d_n2 = relu_backward(cache.relu2, lg.dx);
    BnGrads b2 = batchnorm_backward(sys.bn2, cache.bn2, d_n2);
    acc(g.bn2_dgamma, b2.dgamma);
    acc(g.bn2_dbeta, b2.dbeta);
    LinearGrads l2 = linear_backward(sys.fcn2, cache.lin2, b2.dx);
    acc(g.fcn2_dW, l2.dW);
    acc(g.fcn2_db, l2.db);
    Tensor d_n1 = relu_backward(cache.relu1, l2.dx);
    BnGrads b1 = batchnorm_backward(sys.bn1, cache.bn1, d_n1);
    acc(g.bn1_dgamma, b1.dgamma);
    acc(g.bn1_dbeta, b1.dbeta);
    LinearGrads l1 = linear_backward(sys.fcn1, cache.lin1, b1.dx);
    acc(g.fcn1_dW, l1.dW);
    acc(g.fcn1_db, l1.db);
    dh = std::move(lg.dh_prev);
    dc = std::move(lg.dc_prev);
}

void apply_linear(LinearLayer& l, const Tensor& dW, const Tensor& db) {
    LinearGrads g;
    g.dW = dW;
    g.db = db;
    linear_apply(l, g);
}

void apply_bn(BatchNormLayer& l, const Tensor& dgamma, const Tensor& dbeta) {
    BnGrads g;
    g.dgamma = dgamma;
    g.dbeta = dbeta;
    batchnorm_apply(l, g);
}

void apply_a_parts(TwoNetSystem& sys, const MultiNetGrads& g) {
    apply_linear(sys.fcn1, g.fcn1_dW, g.fcn1_db);
    apply_bn(sys.bn1, g.bn1_dgamma, g.bn1_dbeta);
    apply_linear(sys.fcn2, g.fcn2_dW, g.fcn2_db);
    apply_bn(sys.bn2, g.bn2_dgamma, g.bn2_dbeta);
    lstm_apply(sys.a_core, g.a_core_dW, g.a_core_db);
    apply_linear(sys.a_classifier, g.a_cls_dW, g.a_cls_db);
    apply_linear(sys.msg_head, g.msg_dW, g.msg_db);
}

void apply_b_parts(TwoNetSystem& sys, const MultiNetGrads& g) {
    lstm_apply(sys.b_core, g.b_core_dW, g.b_core_db);
    apply_linear(sys.b_classifier, g.b_cls_dW, g.b_cls_db);
}

void check_window(const TwoNetSystem& sys, const std::vector<Tensor>& xs,
                  const std::vector<std::vector<std::size_t>>& labels, std::size_t steps,
                  const char* where) {
    if (xs.size() != steps || labels.size() != steps)
        throw std::invalid_argument(std::string(where) + ": window length mismatch");
    for (std::size_t t = 0; t < steps; ++t) {
        if (xs[t].rows() != sys.batch || xs[t].cols() != sys.cfg.input_dim)
            throw std::invalid_argument(std::string(where) + ": bad input shape");
        if (labels[t].size() != sys.batch)
            throw std::invalid_argument(std::string(where) + ": bad label count");
    }
}

/// Count targets per batch row over labels[lo, hi).
std::vector<std::size_t> count_rows(const std::vector<std::vector<std::size_t>>& labels,
                                    std::size_t lo, std::size_t hi, bool odd) {
    std::vector<std::size_t> out(labels[lo].size(), 0);
    for (std::size_t t = lo; t < hi; ++t)
        for (std::size_t r = 0; r < out.size(); ++r) {
            const std::size_t d = labels[t][r];
            if (odd ? (d % 2 == 1) : (d == 3)) ++out[r];
        }
    return out;
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) rows += p.rows();
    Tensor out({rows, cols});
    std::size_t at = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.rows(); ++i, ++at)
            for (std::size_t j = 0; j < cols; ++j) out(at, j) = p(i, j);
    }
    return out;
}

}  // namespace

void TwoNetConfig::validate() const {
    if (T < 2) throw std::invalid_argument("TwoNetConfig: T must be >= 2");
    if (input_dim == 0 || fcn_width == 0 || a_units == 0 || b_units == 0 || message_dim == 0)
        throw std::invalid_argument("TwoNetConfig: dims must be positive");
}

StreamLabels stream_labels(const std::vector<std::size_t>& digits, std::size_t T) {
    StreamLabels out;
    const std::size_t n = digits.size();
    const std::size_t wo = std::min(T, n);
    const std::size_t wt = std::min(T * T, n);
    for (std::size_t i = n - wo; i < n; ++i) out.count_odd += digits[i] % 2;
    for (std::size_t i = n - wt; i < n; ++i) out.count_threes += digits[i] == 3 ? 1 : 0;
    return out;
}

TwoNetSystem TwoNetSystem::create(const TwoNetConfig& cfg, std::size_t batch, RngState& rng) {
    cfg.validate();
    if (batch < 2) throw std::invalid_argument("TwoNetSystem: batch must be >= 2");
    TwoNetSystem sys;
    sys.cfg = cfg;
    sys.batch = batch;
    sys.fcn1 = LinearLayer::create(cfg.input_dim, cfg.fcn_width, rng, cfg.adam);
    sys.bn1 = BatchNormLayer::create(cfg.fcn_width, cfg.adam);
    sys.fcn2 = LinearLayer::create(cfg.fcn_width, cfg.fcn_width, rng, cfg.adam);
    sys.bn2 = BatchNormLayer::create(cfg.fcn_width, cfg.adam);
    sys.a_core = LstmCore::create(cfg.fcn_width, cfg.a_units, rng, cfg.adam);
    sys.a_classifier = LinearLayer::create(cfg.a_units, cfg.odd_classes(), rng, cfg.adam);
    sys.msg_head = LinearLayer::create(cfg.a_units, cfg.message_dim, rng, cfg.adam);
    sys.b_core = LstmCore::create(cfg.message_dim, cfg.b_units, rng, cfg.adam);
    sys.b_classifier = LinearLayer::create(cfg.b_units, cfg.threes_classes(), rng, cfg.adam);
    SgModelConfig sg;
    sg.input_dim = cfg.message_dim;
    sg.output_dim = cfg.message_dim;
    sg.hidden_layers = 1;
    sg.hidden_width = cfg.message_dim;
    sg.adam = cfg.sg_adam;
    sys.msg_sg = SgModel::create(sg, rng);
    sys.a_h = Tensor({batch, cfg.a_units});
    sys.a_c = Tensor({batch, cfg.a_units});
    sys.b_h = Tensor({batch, cfg.b_units});
    sys.b_c = Tensor({batch, cfg.b_units});
    sys.staged_threes.assign(batch, 0);
    return sys;
}

void set_learning_rate(TwoNetSystem& sys, double lr) {
    set_lr(sys.fcn1, lr);
    set_lr(sys.bn1, lr);
    set_lr(sys.fcn2, lr);
    set_lr(sys.bn2, lr);
    set_lr(sys.a_core, lr);
    set_lr(sys.a_classifier, lr);
    set_lr(sys.msg_head, lr);
    set_lr(sys.b_core, lr);
    set_lr(sys.b_classifier, lr);
}

void set_sg_learning_rate(TwoNetSystem& sys, double lr) { set_lr(sys.msg_sg, lr); }

LockedReport locked_joint_step(TwoNetSystem& sys, const std::vector<Tensor>& xs,
                               const std::vector<std::vector<std::size_t>>& labels) {
    if (sys.cfg.mode != TwoNetMode::locked)
        throw std::invalid_argument("locked_joint_step: system is not in locked mode");
    const std::size_t T = sys.cfg.T, TT = T * T;
    check_window(sys, xs, labels, TT, "locked_joint_step");

    LockedReport rep;
    Tensor h = sys.a_h, c = sys.a_c;
    Tensor bh = sys.b_h, bc = sys.b_c;
    std::vector<AStepCache> acaches(TT);
    std::vector<LstmCache> bcaches(T);
    std::vector<LinearCache> cls_caches(T), msg_caches(T);
    std::vector<StandardizeCache> std_caches(T);
    std::vector<Tensor> odd_dlogits(T);

    for (std::size_t t = 0; t < TT; ++t) {
        a_forward_step(sys, xs[t], BnMode::train, h, c, acaches[t]);
        if ((t + 1) % T == 0) {
            const std::size_t k = (t + 1) / T - 1;
            Tensor logits = linear_forward(sys.a_classifier, h, cls_caches[k]);
            rep.odd_losses.push_back(
                softmax_xent(logits, count_rows(labels, k * T, (k + 1) * T, true),
                             odd_dlogits[k]));
            Tensor m = standardize_forward(
                linear_forward(sys.msg_head, h, msg_caches[k]), std_caches[k]);
            Tensor bh_new, bc_new;
            lstm_step_forward(sys.b_core, m, bh, bc, bh_new, bc_new, bcaches[k]);
            bh = std::move(bh_new);
            bc = std::move(bc_new);
        }
    }
    LinearCache b_cls_cache;
    Tensor b_logits = linear_forward(sys.b_classifier, bh, b_cls_cache);
    Tensor b_dlogits;
    rep.threes_loss = softmax_xent(b_logits, count_rows(labels, 0, TT, false), b_dlogits);
    rep.total_loss = rep.threes_loss;
    for (double l : rep.odd_losses) rep.total_loss += l;

    // Network B backward, collecting the true message gradients.
    MultiNetGrads& g = rep.grads;
    LinearGrads bcls = linear_backward(sys.b_classifier, b_cls_cache, b_dlogits);
    acc(g.b_cls_dW, bcls.dW);
    acc(g.b_cls_db, bcls.db);
    Tensor db_h = bcls.dx;
    Tensor db_c({sys.batch, sys.cfg.b_units});
    std::vector<Tensor> dm(T);
    for (std::size_t k = T; k-- > 0;) {
        LstmGrads bg = lstm_step_backward(sys.b_core, bcaches[k], db_h, db_c);
        acc(g.b_core_dW, bg.dW);
        acc(g.b_core_db, bg.db);
        dm[k] = std::move(bg.dx);
        db_h = std::move(bg.dh_prev);
        db_c = std::move(bg.dc_prev);
    }

    // Network A backward, with the count and message paths joining at each
    // boundary state.
    Tensor da_h({sys.batch, sys.cfg.a_units});
    Tensor da_c({sys.batch, sys.cfg.a_units});
    for (std::size_t t = TT; t-- > 0;) {
        if ((t + 1) % T == 0) {
            const std::size_t k = (t + 1) / T - 1;
            LinearGrads cg = linear_backward(sys.a_classifier, cls_caches[k], odd_dlogits[k]);
            acc(g.a_cls_dW, cg.dW);
            acc(g.a_cls_db, cg.db);
            axpy(da_h, 1.0, cg.dx);
            Tensor d_pre = standardize_backward(std_caches[k], dm[k]);
            LinearGrads mg = linear_backward(sys.msg_head, msg_caches[k], d_pre);
            acc(g.msg_dW, mg.dW);
            acc(g.msg_db, mg.db);
            axpy(da_h, 1.0, mg.dx);
        }
        a_backward_step(sys, acaches[t], da_h, da_c, g);
    }

    apply_a_parts(sys, g);
    apply_b_parts(sys, g);
    sys.a_h = std::move(h);
    sys.a_c = std::move(c);
    sys.b_h = std::move(bh);
    sys.b_c = std::move(bc);
    sys.steps_done += TT;
    ++sys.a_updates;
    ++sys.b_updates;
    return rep;
}

DecoupledReport decoupled_step(TwoNetSystem& sys, const std::vector<Tensor>& xs,
                               const std::vector<std::vector<std::size_t>>& labels) {
    if (sys.cfg.mode == TwoNetMode::locked)
        throw std::invalid_argument("decoupled_step: system is in locked mode");
    const std::size_t T = sys.cfg.T;
    check_window(sys, xs, labels, T, "decoupled_step");

    DecoupledReport rep;
    MultiNetGrads& g = rep.grads;
    Tensor h = sys.a_h, c = sys.a_c;
    std::vector<AStepCache> acaches(T);
    for (std::size_t t = 0; t < T; ++t) a_forward_step(sys, xs[t], BnMode::train, h, c, acaches[t]);

    LinearCache cls_cache, msg_cache;
    StandardizeCache std_cache;
    Tensor odd_dlogits;
    Tensor logits = linear_forward(sys.a_classifier, h, cls_cache);
    rep.odd_loss = softmax_xent(logits, count_rows(labels, 0, T, true), odd_dlogits);
    rep.message = standardize_forward(linear_forward(sys.msg_head, h, msg_cache), std_cache);

    // The synthetic message gradient stands in for Network B's backward pass,
    // so A updates now instead of waiting T*T steps.
    Tensor delta_hat = sg_predict(sys.msg_sg, rep.message);
    if (sys.cfg.mode == TwoNetMode::decoupled_dni) {
        rep.feedback = scale(delta_hat, sys.cfg.sg_feedback_scale);
    } else {
        rep.feedback = Tensor({sys.batch, sys.cfg.message_dim});
    }

    LinearGrads cg = linear_backward(sys.a_classifier, cls_cache, odd_dlogits);
    acc(g.a_cls_dW, cg.dW);
    acc(g.a_cls_db, cg.db);
    Tensor da_h = cg.dx;
    Tensor d_pre = standardize_backward(std_cache, rep.feedback);
    LinearGrads mg = linear_backward(sys.msg_head, msg_cache, d_pre);
    acc(g.msg_dW, mg.dW);
    acc(g.msg_db, mg.db);
    axpy(da_h, 1.0, mg.dx);
    Tensor da_c({sys.batch, sys.cfg.a_units});
    for (std::size_t t = T; t-- > 0;) a_backward_step(sys, acaches[t], da_h, da_c, g);
    apply_a_parts(sys, g);
    ++sys.a_updates;

    // Network B consumes the detached message on its own clock.
    LstmCache bcache;
    Tensor bh_new, bc_new;
    lstm_step_forward(sys.b_core, rep.message, sys.b_h, sys.b_c, bh_new, bc_new, bcache);
    sys.b_h = std::move(bh_new);
    sys.b_c = std::move(bc_new);
    sys.staged_messages.push_back(rep.message);
    sys.staged_b_caches.push_back(std::move(bcache));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t r = 0; r < sys.batch; ++r)
            if (labels[t][r] == 3) ++sys.staged_threes[r];

    sys.a_h = std::move(h);
    sys.a_c = std::move(c);
    sys.steps_done += T;

    if (sys.staged_messages.size() == T) {
        LinearCache b_cls_cache;
        Tensor b_logits = linear_forward(sys.b_classifier, sys.b_h, b_cls_cache);
        Tensor b_dlogits;
        rep.threes_loss = softmax_xent(b_logits, sys.staged_threes, b_dlogits);
        LinearGrads bcls = linear_backward(sys.b_classifier, b_cls_cache, b_dlogits);
        acc(g.b_cls_dW, bcls.dW);
        acc(g.b_cls_db, bcls.db);
        Tensor db_h = bcls.dx;
        Tensor db_c({sys.batch, sys.cfg.b_units});
        std::vector<Tensor> dm(T);
        for (std::size_t k = T; k-- > 0;) {
            LstmGrads bg = lstm_step_backward(sys.b_core, sys.staged_b_caches[k], db_h, db_c);
            acc(g.b_core_dW, bg.dW);
            acc(g.b_core_db, bg.db);
            dm[k] = std::move(bg.dx);
            db_h = std::move(bg.dh_prev);
            db_c = std::move(bg.dc_prev);
        }
        apply_b_parts(sys, g);
        ++sys.b_updates;
        // The true gradients exist now; the message model regresses on all of
        // this window's (message, gradient) pairs in one step.
        rep.sg_loss = sg_update(sys.msg_sg, stack_rows(sys.staged_messages), nullptr,
                                stack_rows(dm));
        rep.b_updated = true;
        sys.staged_messages.clear();
        sys.staged_b_caches.clear();
        sys.staged_threes.assign(sys.batch, 0);
    }
    return rep;
}

void sample_digit_step(const MnistDataset& data, std::size_t batch, RngState& rng, Tensor& x,
                       std::vector<std::size_t>& labels) {
    if (data.size() == 0) throw std::invalid_argument("sample_digit_step: empty dataset");
    const std::size_t dim = data.images.cols();
    x = Tensor({batch, dim});
    labels.assign(batch, 0);
    for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t idx = rng.next_below(data.size());
        for (std::size_t j = 0; j < dim; ++j) x(r, j) = data.images(idx, j);
        labels[r] = data.labels[idx];
    }
}

TwoNetEval evaluate_stream(const TwoNetSystem& sys, const MnistDataset& data,
                           std::size_t windows, RngState rng) {
    TwoNetSystem s = sys;  // batch-norm forward wants mutable layers; keep the caller's intact
    const std::size_t T = s.cfg.T, TT = T * T;
    Tensor h({s.batch, s.cfg.a_units}), c({s.batch, s.cfg.a_units});
    Tensor bh({s.batch, s.cfg.b_units}), bc({s.batch, s.cfg.b_units});
    std::size_t a_wrong = 0, a_total = 0, b_wrong = 0, b_total = 0;
    std::vector<std::size_t> count_freq(s.cfg.threes_classes(), 0);

    for (std::size_t w = 0; w < windows; ++w) {
        std::vector<std::vector<std::size_t>> window_labels;
        for (std::size_t t = 0; t < TT; ++t) {
            Tensor x;
            std::vector<std::size_t> lab;
            sample_digit_step(data, s.batch, rng, x, lab);
            window_labels.push_back(std::move(lab));
            AStepCache cache;
            a_forward_step(s, x, BnMode::eval, h, c, cache);
            if ((t + 1) % T == 0) {
                const std::size_t k = (t + 1) / T - 1;
                LinearCache cc, mc;
                StandardizeCache sc;
                Tensor logits = linear_forward(s.a_classifier, h, cc);
                std::vector<std::size_t> odd = count_rows(window_labels, k * T, (k + 1) * T, true);
                for (std::size_t r = 0; r < s.batch; ++r) {
                    std::size_t best = 0;
                    for (std::size_t j = 1; j < logits.cols(); ++j)
                        if (logits(r, j) > logits(r, best)) best = j;
                    a_wrong += best != odd[r] ? 1 : 0;
                    ++a_total;
                }
                Tensor m = standardize_forward(linear_forward(s.msg_head, h, mc), sc);
                Tensor bh_new, bc_new;
                LstmCache bcache;
                lstm_step_forward(s.b_core, m, bh, bc, bh_new, bc_new, bcache);
                bh = std::move(bh_new);
                bc = std::move(bc_new);
            }
        }
        LinearCache bcc;
        Tensor b_logits = linear_forward(s.b_classifier, bh, bcc);
        std::vector<std::size_t> threes = count_rows(window_labels, 0, TT, false);
        for (std::size_t r = 0; r < s.batch; ++r) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < b_logits.cols(); ++j)
                if (b_logits(r, j) > b_logits(r, best)) best = j;
            b_wrong += best != threes[r] ? 1 : 0;
            ++b_total;
            ++count_freq[threes[r]];
        }
    }
    TwoNetEval out;
    out.a_error = a_total ? static_cast<double>(a_wrong) / static_cast<double>(a_total) : 0.0;
    out.b_error = b_total ? static_cast<double>(b_wrong) / static_cast<double>(b_total) : 0.0;
    const std::size_t modal = *std::max_element(count_freq.begin(), count_freq.end());
    out.chance_b_error =
        b_total ? 1.0 - static_cast<double>(modal) / static_cast<double>(b_total) : 0.0;
    return out;
}

}  // namespace dni

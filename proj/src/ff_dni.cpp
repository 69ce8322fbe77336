// SPDX-License-Identifier: Apache-2.0
#include "dni/ff_dni.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dni {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct UnitCaches {
    LinearCache lin;
    BnCache bn;
    ReluCache relu;
};

Tensor unit_forward(FfNetwork& net, std::size_t u, const Tensor& in, UnitCaches& c) {
    Tensor a = linear_forward(net.hidden[u].lin, in, c.lin);
    a = batchnorm_forward(net.hidden[u].bn, a, BnMode::train, c.bn);
    return relu_forward(a, c.relu);
}

struct UnitGrads {
    LinearGrads lin;
    BnGrads bn;
    Tensor dx;
};

UnitGrads unit_backward(FfNetwork& net, std::size_t u, const UnitCaches& c, const Tensor& dy) {
    UnitGrads g;
    const Tensor da = relu_backward(c.relu, dy);
    g.bn = batchnorm_backward(net.hidden[u].bn, c.bn, da);
    g.lin = linear_backward(net.hidden[u].lin, c.lin, g.bn.dx);
    g.dx = g.lin.dx;
    return g;
}

void unit_apply(FfNetwork& net, std::size_t u, const UnitGrads& g) {
    linear_apply(net.hidden[u].lin, g.lin);
    batchnorm_apply(net.hidden[u].bn, g.bn);
}

struct ForwardPass {
    std::vector<UnitCaches> caches;  // per hidden unit
    std::vector<Tensor> h;           // h[i] = output of hidden unit i
    LinearCache cls_cache;
    Tensor logits;
    Tensor dlogits;
    double loss = 0.0;
};

ForwardPass full_forward(FfNetwork& net, const MnistBatch& batch) {
    ForwardPass fp;
    fp.caches.resize(net.spec.depth);
    fp.h.resize(net.spec.depth);
    Tensor a = batch.x;
    for (std::size_t u = 0; u < net.spec.depth; ++u) {
        a = unit_forward(net, u, a, fp.caches[u]);
        fp.h[u] = a;
    }
    fp.logits = linear_forward(net.classifier, a, fp.cls_cache);
    fp.loss = softmax_xent(fp.logits, batch.labels, fp.dlogits);
    return fp;
}

/// Exact loss gradient at every interface, from the forward caches and the
/// current (pre-update) parameters.
std::vector<Tensor> true_interface_grads(FfNetwork& net, const ForwardPass& fp) {
    std::vector<Tensor> truth(net.spec.depth);
    Tensor d = linear_backward(net.classifier, fp.cls_cache, fp.dlogits).dx;
    for (std::size_t u = net.spec.depth; u-- > 0;) {
        truth[u] = d;
        if (u > 0) d = unit_backward(net, u, fp.caches[u], d).dx;
    }
    return truth;
}

const std::vector<std::size_t>* cond_labels(const FfNetwork& net, const MnistBatch& batch) {
    return net.spec.conditioning == Conditioning::label_one_hot ? &batch.labels : nullptr;
}

/// Shared engine for backprop_step and dni_step: the chain is cut at the
/// given interfaces; each segment updates from the gradient at its top
/// (synthetic below the loss, exact at the loss) and feeds the regression
/// target for the interface below it.
TrainStepReport run_segmented(FfNetwork& net, const MnistBatch& batch,
                              const std::vector<std::size_t>& interfaces, bool with_diagnostics) {
    const std::size_t depth = net.spec.depth;
    TrainStepReport report;
    report.sg_loss.assign(depth, kNaN);
    report.updated.assign(net.units(), true);

    ForwardPass fp = full_forward(net, batch);
    report.loss = fp.loss;

    std::vector<Tensor> truth;
    if (with_diagnostics) truth = true_interface_grads(net, fp);

    // Predictions for every decoupled interface, taken before any update.
    std::vector<Tensor> sg_pred(depth);
    for (std::size_t i : interfaces) sg_pred[i] = sg_predict(net.sg_at(i), fp.h[i], cond_labels(net, batch));
    if (with_diagnostics) {
        report.diags.resize(depth);
        for (std::size_t i = 0; i < depth; ++i)
            report.diags[i] = gradient_diagnostics(
                interfaces.end() != std::find(interfaces.begin(), interfaces.end(), i)
                    ? sg_pred[i]
                    : truth[i],
                truth[i]);
    }

    // Bottom-up over segments [lo, hi]; hi == depth means the classifier tops
    // the segment and the true loss drives it.
    std::size_t lo = 0;
    std::size_t boundary_idx = 0;
    while (lo <= depth) {
        const bool has_sg_top = boundary_idx < interfaces.size();
        const std::size_t hi = has_sg_top ? interfaces[boundary_idx] : depth;

        Tensor d;  // gradient flowing down through the segment
        LinearGrads cls_grads;
        if (hi == depth) {
            cls_grads = linear_backward(net.classifier, fp.cls_cache, fp.dlogits);
            d = cls_grads.dx;
        } else {
            d = sg_pred[hi];
        }
        std::vector<UnitGrads> grads;
        const std::size_t top_hidden = hi == depth ? depth : hi + 1;  // one past the top hidden unit
        for (std::size_t u = top_hidden; u-- > lo;) {
            grads.push_back(unit_backward(net, u, fp.caches[u], d));
            d = grads.back().dx;
        }
        // d is now the gradient at the segment's input: the regression target
        // for the interface just below (if any).
        if (lo > 0) {
            const std::size_t below = lo - 1;
            report.sg_loss[below] =
                sg_update(net.sg_at(below), fp.h[below], cond_labels(net, batch), d);
        }
        if (hi == depth) linear_apply(net.classifier, cls_grads);
        for (std::size_t j = 0; j < grads.size(); ++j)
            unit_apply(net, top_hidden - 1 - j, grads[j]);

        if (hi == depth) break;
        lo = hi + 1;
        ++boundary_idx;
    }
    return report;
}

}  // namespace

FfNetwork FfNetwork::create(const FfNetworkSpec& spec, RngState& rng) {
    if (spec.depth < 1) throw std::invalid_argument("FfNetwork: depth must be >= 1");
    if (spec.placement == DniPlacement::single &&
        (spec.single_at < 1 || spec.single_at > spec.depth)) {
        throw std::invalid_argument("FfNetwork: single_at out of range");
    }
    FfNetwork net;
    net.spec = spec;
    std::size_t in = spec.input_dim;
    for (std::size_t u = 0; u < spec.depth; ++u) {
        FfHiddenLayer layer;
        layer.lin = LinearLayer::create(in, spec.hidden, rng, spec.adam);
        layer.bn = BatchNormLayer::create(spec.hidden, spec.adam);
        net.hidden.push_back(std::move(layer));
        in = spec.hidden;
    }
    net.classifier = LinearLayer::create(spec.hidden, spec.classes, rng, spec.adam);

    if (spec.placement != DniPlacement::none) {
        if (spec.placement == DniPlacement::every) {
            for (std::size_t i = 0; i < spec.depth; ++i) net.sg_interfaces.push_back(i);
        } else {
            net.sg_interfaces.push_back(spec.single_at - 1);
        }
        for (std::size_t i : net.sg_interfaces) {
            (void)i;
            SgModelConfig cfg;
            cfg.input_dim = spec.hidden;
            cfg.output_dim = spec.hidden;
            cfg.hidden_layers = spec.sg_hidden_layers;
            cfg.hidden_width = spec.sg_hidden_width;
            cfg.conditioning = spec.conditioning;
            cfg.num_classes = spec.classes;
            cfg.adam = spec.sg_adam;
            net.sg.push_back(SgModel::create(cfg, rng));
        }
    }
    return net;
}

void FfNetwork::attach_input_models(RngState& rng) {
    input_models.clear();
    for (std::size_t i = 0; i < spec.depth; ++i) {
        SgModelConfig cfg;
        cfg.input_dim = spec.input_dim;
        cfg.output_dim = spec.hidden;
        cfg.hidden_layers = 1;
        cfg.hidden_width = spec.sg_hidden_width;
        cfg.adam = spec.sg_adam;
        input_models.push_back(SgModel::create(cfg, rng));
    }
}

bool FfNetwork::has_sg_at(std::size_t interface) const {
    return std::find(sg_interfaces.begin(), sg_interfaces.end(), interface) != sg_interfaces.end();
}

SgModel& FfNetwork::sg_at(std::size_t interface) {
    for (std::size_t j = 0; j < sg_interfaces.size(); ++j)
        if (sg_interfaces[j] == interface) return sg[j];
    throw std::invalid_argument("FfNetwork: no synthetic gradient model at that interface");
}

MnistBatch sample_batch(const MnistDataset& ds, std::size_t n, RngState& rng) {
    MnistBatch b;
    b.x = Tensor({n, ds.images.cols()});
    b.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t idx = rng.next_below(ds.size());
        for (std::size_t j = 0; j < ds.images.cols(); ++j) b.x(r, j) = ds.images(idx, j);
        b.labels[r] = ds.labels[idx];
    }
    return b;
}

InterfaceDiag gradient_diagnostics(const Tensor& synthetic, const Tensor& truth) {
    require_same_shape(synthetic, truth, "gradient_diagnostics");
    InterfaceDiag d;
    d.l2 = l2_norm(sub(synthetic, truth));
    const double ns = l2_norm(synthetic), nt = l2_norm(truth);
    if (ns == 0.0 && nt == 0.0) {
        d.cosine = 1.0;
    } else if (ns == 0.0 || nt == 0.0) {
        d.cosine = 0.0;
    } else {
        d.cosine = dot(synthetic, truth) / (ns * nt);
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
        const int ss = synthetic[i] > 0.0 ? 1 : (synthetic[i] < 0.0 ? -1 : 0);
        const int st = truth[i] > 0.0 ? 1 : (truth[i] < 0.0 ? -1 : 0);
        if (ss != st) ++wrong;
    }
    d.sign_error = static_cast<double>(wrong) / static_cast<double>(synthetic.size());
    return d;
}

TrainStepReport backprop_step(FfNetwork& net, const MnistBatch& batch) {
    return run_segmented(net, batch, {}, false);
}

TrainStepReport dni_step(FfNetwork& net, const MnistBatch& batch, bool with_diagnostics) {
    return run_segmented(net, batch, net.sg_interfaces, with_diagnostics);
}

TrainStepReport stochastic_dni_step(FfNetwork& net, const MnistBatch& batch,
                                    UpdateScheduler& scheduler) {
    const std::size_t depth = net.spec.depth;
    TrainStepReport report;
    report.sg_loss.assign(depth, kNaN);
    report.updated.assign(net.units(), false);

    ForwardPass fp = full_forward(net, batch);
    report.loss = fp.loss;

    if (net.spec.placement == DniPlacement::none) {
        // Baseline: top-down sweep; the first skipped unit drops the gradient
        // for everything below it.
        LinearGrads cls_grads;
        Tensor d;
        bool flowing = scheduler.rng.next_double() < scheduler.p_update;
        if (flowing) {
            report.updated[depth] = true;
            cls_grads = linear_backward(net.classifier, fp.cls_cache, fp.dlogits);
            d = cls_grads.dx;
        }
        std::vector<std::pair<std::size_t, UnitGrads>> pending;
        for (std::size_t u = depth; flowing && u-- > 0;) {
            flowing = scheduler.rng.next_double() < scheduler.p_update;
            if (!flowing) break;
            report.updated[u] = true;
            pending.emplace_back(u, unit_backward(net, u, fp.caches[u], d));
            d = pending.back().second.dx;
        }
        if (report.updated[depth]) linear_apply(net.classifier, cls_grads);
        for (auto& [u, g] : pending) unit_apply(net, u, g);
        return report;
    }

    if (net.spec.placement != DniPlacement::every) {
        throw std::invalid_argument("stochastic_dni_step: needs every-layer placement or none");
    }

    std::vector<Tensor> sg_pred(depth);
    for (std::size_t i = 0; i < depth; ++i)
        sg_pred[i] = sg_predict(net.sg_at(i), fp.h[i], cond_labels(net, batch));

    const std::vector<std::size_t> order = scheduler.rng.permutation(net.units());
    for (std::size_t u : order) {
        if (scheduler.rng.next_double() >= scheduler.p_update) continue;
        report.updated[u] = true;
        if (u == depth) {
            LinearGrads g = linear_backward(net.classifier, fp.cls_cache, fp.dlogits);
            report.sg_loss[depth - 1] =
                sg_update(net.sg_at(depth - 1), fp.h[depth - 1], cond_labels(net, batch), g.dx);
            linear_apply(net.classifier, g);
        } else {
            UnitGrads g = unit_backward(net, u, fp.caches[u], sg_pred[u]);
            if (u > 0) {
                report.sg_loss[u - 1] =
                    sg_update(net.sg_at(u - 1), fp.h[u - 1], cond_labels(net, batch), g.dx);
            }
            unit_apply(net, u, g);
        }
    }
    return report;
}

TrainStepReport complete_unlock_step(FfNetwork& net, const MnistBatch& batch,
                                     UpdateScheduler& scheduler) {
    const std::size_t depth = net.spec.depth;
    if (net.spec.placement != DniPlacement::every) {
        throw std::invalid_argument("complete_unlock_step: needs every-layer placement");
    }
    if (net.input_models.size() != depth) {
        throw std::invalid_argument("complete_unlock_step: call attach_input_models first");
    }
    TrainStepReport report;
    report.loss = kNaN;
    report.sg_loss.assign(depth, kNaN);
    report.updated.assign(net.units(), false);

    std::vector<bool> active(net.units());
    for (std::size_t u = 0; u < net.units(); ++u)
        active[u] = scheduler.rng.next_double() < scheduler.p_update;

    // Forward phase. Busy units produce nothing; consumers of a busy unit
    // take the synthetic input predicted from the raw batch.
    std::vector<UnitCaches> caches(depth);
    std::vector<Tensor> unit_in(net.units());
    std::vector<Tensor> h(depth);  // produced outputs (only where active)
    for (std::size_t u = 0; u < net.units(); ++u) {
        if (!active[u]) continue;
        if (u == 0) {
            unit_in[u] = batch.x;
        } else if (active[u - 1]) {
            unit_in[u] = h[u - 1];
        } else {
            unit_in[u] = synth_input_predict(net.input_models[u - 1], batch.x);
        }
        if (u < depth) h[u] = unit_forward(net, u, unit_in[u], caches[u]);
    }

    // Update phase, bottom-up.
    LinearCache cls_cache;
    for (std::size_t u = 0; u < net.units(); ++u) {
        if (!active[u]) continue;
        report.updated[u] = true;
        if (u == depth) {
            const Tensor logits = linear_forward(net.classifier, unit_in[u], cls_cache);
            Tensor dlogits;
            report.loss = softmax_xent(logits, batch.labels, dlogits);
            LinearGrads g = linear_backward(net.classifier, cls_cache, dlogits);
            report.sg_loss[depth - 1] =
                sg_update(net.sg_at(depth - 1), unit_in[u], cond_labels(net, batch), g.dx);
            linear_apply(net.classifier, g);
        } else {
            const Tensor pred = sg_predict(net.sg_at(u), h[u], cond_labels(net, batch));
            UnitGrads g = unit_backward(net, u, caches[u], pred);
            if (u > 0) {
                report.sg_loss[u - 1] =
                    sg_update(net.sg_at(u - 1), unit_in[u], cond_labels(net, batch), g.dx);
            }
            unit_apply(net, u, g);
            // The producer ran, so its activation model has a fresh target.
            synth_input_update(net.input_models[u], batch.x, nullptr, h[u]);
        }
    }
    return report;
}

TrainStepReport stale_gradient_step(FfNetwork& net, const MnistBatch& batch,
                                    StaleGradientCache& cache) {
    const std::size_t depth = net.spec.depth;
    TrainStepReport report;
    report.sg_loss.assign(depth, kNaN);
    report.updated.assign(net.units(), true);

    ForwardPass fp = full_forward(net, batch);
    report.loss = fp.loss;
    if (cache.ema.size() != depth) {
        cache.ema.assign(depth, Tensor(fp.h[0].shape()));
    }

    const std::vector<Tensor> truth = true_interface_grads(net, fp);

    LinearGrads cls_grads = linear_backward(net.classifier, fp.cls_cache, fp.dlogits);
    std::vector<UnitGrads> grads(depth);
    for (std::size_t u = 0; u < depth; ++u)
        grads[u] = unit_backward(net, u, fp.caches[u], cache.ema[u]);
    linear_apply(net.classifier, cls_grads);
    for (std::size_t u = 0; u < depth; ++u) unit_apply(net, u, grads[u]);

    for (std::size_t u = 0; u < depth; ++u) {
        Tensor next = scale(cache.ema[u], cache.decay);
        axpy(next, 1.0 - cache.decay, truth[u]);
        cache.ema[u] = std::move(next);
    }
    return report;
}

double eval_error(FfNetwork& net, const MnistDataset& ds, std::size_t eval_batch) {
    std::size_t wrong = 0;
    for (std::size_t start = 0; start < ds.size(); start += eval_batch) {
        const std::size_t n = std::min(eval_batch, ds.size() - start);
        Tensor a({n, ds.images.cols()});
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < ds.images.cols(); ++j)
                a(r, j) = ds.images(start + r, j);
        for (std::size_t u = 0; u < net.spec.depth; ++u) {
            LinearCache lc;
            BnCache bc;
            ReluCache rc;
            a = linear_forward(net.hidden[u].lin, a, lc);
            a = batchnorm_forward(net.hidden[u].bn, a, BnMode::eval, bc);
            a = relu_forward(a, rc);
        }
        LinearCache lc;
        const Tensor logits = linear_forward(net.classifier, a, lc);
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols(); ++c)
                if (logits(r, c) > logits(r, best)) best = c;
            if (best != ds.labels[start + r]) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

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

void set_lr(SgModel& m, double lr) {
    for (auto& h : m.hidden) set_lr(h, lr);
    for (auto& n : m.norms) set_lr(n, lr);
    set_lr(m.out, lr);
}

}  // namespace

void set_learning_rate(FfNetwork& net, double lr) {
    for (auto& layer : net.hidden) {
        set_lr(layer.lin, lr);
        set_lr(layer.bn, lr);
    }
    set_lr(net.classifier, lr);
    for (auto& m : net.sg) set_lr(m, lr);
    for (auto& m : net.input_models) set_lr(m, lr);
}

}  // namespace dni

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dni/gradcheck.hpp"
#include "dni/multi_net.hpp"

using namespace dni;

namespace {

TwoNetConfig tiny_cfg(TwoNetMode mode) {
    TwoNetConfig cfg;
    cfg.T = 2;
    cfg.input_dim = 5;
    cfg.fcn_width = 4;
    cfg.a_units = 3;
    cfg.b_units = 3;
    cfg.message_dim = 3;
    cfg.mode = mode;
    cfg.adam = {3e-3, 0.9, 0.999, 1e-8};
    cfg.sg_adam = {3e-3, 0.9, 0.999, 1e-8};
    return cfg;
}

struct StreamWindow {
    std::vector<Tensor> xs;
    std::vector<std::vector<std::size_t>> labels;
};

StreamWindow rand_stream(RngState& rng, std::size_t steps, std::size_t batch,
                         std::size_t input_dim) {
    StreamWindow w;
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor x({batch, input_dim});
        rng.fill_gaussian(x, 1.0);
        std::vector<std::size_t> lab(batch);
        for (auto& d : lab) d = rng.next_below(10);
        w.xs.push_back(std::move(x));
        w.labels.push_back(std::move(lab));
    }
    return w;
}

bool same_tensor(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

std::vector<std::size_t> odd_counts(const std::vector<std::vector<std::size_t>>& labels,
                                    std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out(labels[lo].size(), 0);
    for (std::size_t t = lo; t < hi; ++t)
        for (std::size_t r = 0; r < out.size(); ++r) out[r] += labels[t][r] % 2;
    return out;
}

/// A-side objective under a fixed injected message gradient: the odd-count
/// loss plus <feedback, message>, mirroring what the decoupled update sees.
double a_window_objective(TwoNetSystem sys, const StreamWindow& w, const Tensor& feedback) {
    Tensor h = sys.a_h, c = sys.a_c;
    for (const Tensor& x : w.xs) {
        LinearCache l1, l2;
        BnCache b1, b2;
        ReluCache r1, r2;
        LstmCache lc;
        Tensor z1 = linear_forward(sys.fcn1, x, l1);
        Tensor n1 = batchnorm_forward(sys.bn1, z1, BnMode::train, b1);
        Tensor a1 = relu_forward(n1, r1);
        Tensor z2 = linear_forward(sys.fcn2, a1, l2);
        Tensor n2 = batchnorm_forward(sys.bn2, z2, BnMode::train, b2);
        Tensor a2 = relu_forward(n2, r2);
        Tensor h_new, c_new;
        lstm_step_forward(sys.a_core, a2, h, c, h_new, c_new, lc);
        h = std::move(h_new);
        c = std::move(c_new);
    }
    LinearCache cc, mc;
    StandardizeCache sc;
    Tensor logits = linear_forward(sys.a_classifier, h, cc);
    Tensor scratch;
    const double loss = softmax_xent(logits, odd_counts(w.labels, 0, w.labels.size()), scratch);
    Tensor m = standardize_forward(linear_forward(sys.msg_head, h, mc), sc);
    return loss + dot(feedback, m);
}

}  // namespace

TEST_CASE("stream_labels hand cases and recount oracle") {
    CHECK(stream_labels({1, 2}, 2).count_odd == 1);
    CHECK(stream_labels({1, 2}, 2).count_threes == 0);
    CHECK(stream_labels({3, 3, 3, 3}, 2).count_threes == 4);
    CHECK(stream_labels({3, 3, 3, 3}, 2).count_odd == 2);
    CHECK(stream_labels({9, 3, 5, 0}, 2).count_odd == 1);  // only the last two count

    RngState rng(7);
    std::vector<std::size_t> digits(10000);
    for (auto& d : digits) d = rng.next_below(10);
    for (std::size_t T : {2, 4, 7}) {
        StreamLabels got = stream_labels(digits, T);
        std::size_t odd = 0, threes = 0;
        for (std::size_t i = digits.size() - T; i < digits.size(); ++i) odd += digits[i] % 2;
        for (std::size_t i = digits.size() - T * T; i < digits.size(); ++i)
            threes += digits[i] == 3 ? 1 : 0;
        CHECK(got.count_odd == odd);
        CHECK(got.count_threes == threes);
    }
}

TEST_CASE("construction and mode validation") {
    RngState rng(11);
    TwoNetConfig bad = tiny_cfg(TwoNetMode::locked);
    bad.T = 1;
    CHECK_THROWS_AS(TwoNetSystem::create(bad, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(TwoNetSystem::create(tiny_cfg(TwoNetMode::locked), 1, rng),
                    std::invalid_argument);

    TwoNetSystem locked = TwoNetSystem::create(tiny_cfg(TwoNetMode::locked), 3, rng);
    TwoNetSystem dec = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_dni), 3, rng);
    RngState data(12);
    StreamWindow w4 = rand_stream(data, 4, 3, 5);
    StreamWindow w2 = rand_stream(data, 2, 3, 5);
    CHECK_THROWS_AS(decoupled_step(locked, w2.xs, w2.labels), std::invalid_argument);
    CHECK_THROWS_AS(locked_joint_step(dec, w4.xs, w4.labels), std::invalid_argument);
    CHECK_THROWS_AS(locked_joint_step(locked, w2.xs, w2.labels), std::invalid_argument);
    StreamWindow short_labels = w4;
    short_labels.labels[1].pop_back();
    CHECK_THROWS_AS(locked_joint_step(locked, short_labels.xs, short_labels.labels),
                    std::invalid_argument);
}

TEST_CASE("locked window: T*T steps, T boundaries, one joint update") {
    RngState rng(21);
    TwoNetSystem sys = TwoNetSystem::create(tiny_cfg(TwoNetMode::locked), 3, rng);
    RngState data(22);
    StreamWindow w = rand_stream(data, 4, 3, 5);
    LockedReport rep = locked_joint_step(sys, w.xs, w.labels);
    CHECK(sys.steps_done == 4);
    CHECK(sys.a_updates == 1);
    CHECK(sys.b_updates == 1);
    CHECK(rep.odd_losses.size() == 2);
    CHECK(rep.total_loss ==
          doctest::Approx(rep.odd_losses[0] + rep.odd_losses[1] + rep.threes_loss));
    CHECK(rep.total_loss > 0.0);

    // Zero learning rate freezes every parameter while state still rolls.
    TwoNetSystem frozen = TwoNetSystem::create(tiny_cfg(TwoNetMode::locked), 3, rng);
    set_learning_rate(frozen, 0.0);
    TwoNetSystem before = frozen;
    locked_joint_step(frozen, w.xs, w.labels);
    CHECK(same_tensor(frozen.fcn1.W, before.fcn1.W));
    CHECK(same_tensor(frozen.a_core.W, before.a_core.W));
    CHECK(same_tensor(frozen.b_core.W, before.b_core.W));
    CHECK(same_tensor(frozen.msg_head.W, before.msg_head.W));
    CHECK_FALSE(same_tensor(frozen.a_h, before.a_h));
}

TEST_CASE("locked gradients match finite differences on a tiny instance") {
    RngState rng(31);
    TwoNetSystem sys = TwoNetSystem::create(tiny_cfg(TwoNetMode::locked), 3, rng);
    RngState data(32);
    for (int i = 0; i < 2; ++i) {  // move off initialization
        StreamWindow warm = rand_stream(data, 4, 3, 5);
        locked_joint_step(sys, warm.xs, warm.labels);
    }
    set_learning_rate(sys, 0.0);
    StreamWindow w = rand_stream(data, 4, 3, 5);
    TwoNetSystem pre = sys;  // probes restart from this exact state
    LockedReport rep = locked_joint_step(sys, w.xs, w.labels);

    // Each probe rewrites one parameter on a clone of the pre-step system and
    // reruns the real locked step; lr is zero so the step leaves it unchanged.
    Tensor fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.a_core.W = probe;
            return locked_joint_step(s, w.xs, w.labels).total_loss;
        },
        pre.a_core.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.a_core_dW) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.msg_head.W = probe;
            return locked_joint_step(s, w.xs, w.labels).total_loss;
        },
        pre.msg_head.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.msg_dW) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.b_core.W = probe;
            return locked_joint_step(s, w.xs, w.labels).total_loss;
        },
        pre.b_core.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.b_core_dW) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.fcn1.W = probe;
            return locked_joint_step(s, w.xs, w.labels).total_loss;
        },
        pre.fcn1.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.fcn1_dW) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.bn1.gamma = probe;
            return locked_joint_step(s, w.xs, w.labels).total_loss;
        },
        pre.bn1.gamma, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.bn1_dgamma) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.b_classifier.W = probe;
            return locked_joint_step(s, w.xs, w.labels).total_loss;
        },
        pre.b_classifier.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.b_cls_dW) < 1e-4);
}

TEST_CASE("zero message weights cut Network B's gradient into A exactly") {
    RngState rng(41);
    TwoNetSystem s1 = TwoNetSystem::create(tiny_cfg(TwoNetMode::locked), 3, rng);
    s1.msg_head.W = Tensor({s1.msg_head.W.rows(), s1.msg_head.W.cols()});
    s1.msg_head.b = Tensor({s1.msg_head.b.size()});
    set_learning_rate(s1, 0.0);
    TwoNetSystem s2 = s1;
    // Shift B's gate biases so its state is alive even on a zero message; a
    // pure weight perturbation would be invisible from the zero state.
    for (std::size_t i = 0; i < s2.b_core.b.size(); ++i) s2.b_core.b[i] += 0.3;
    for (std::size_t i = 0; i < s2.b_classifier.W.size(); ++i) s2.b_classifier.W[i] -= 0.2;

    RngState data(42);
    StreamWindow w = rand_stream(data, 4, 3, 5);
    LockedReport r1 = locked_joint_step(s1, w.xs, w.labels);
    LockedReport r2 = locked_joint_step(s2, w.xs, w.labels);
    CHECK(same_tensor(r1.grads.fcn1_dW, r2.grads.fcn1_dW));
    CHECK(same_tensor(r1.grads.fcn2_dW, r2.grads.fcn2_dW));
    CHECK(same_tensor(r1.grads.a_core_dW, r2.grads.a_core_dW));
    CHECK(same_tensor(r1.grads.a_cls_dW, r2.grads.a_cls_dW));
    CHECK(same_tensor(r1.grads.bn1_dgamma, r2.grads.bn1_dgamma));
    // B's own gradients do differ; only the path into A is cut.
    CHECK_FALSE(same_tensor(r1.grads.b_core_dW, r2.grads.b_core_dW));
}

TEST_CASE("decoupled cadence: A updates T times as often as B") {
    RngState rng(51);
    TwoNetConfig cfg = tiny_cfg(TwoNetMode::decoupled_dni);
    cfg.T = 3;
    TwoNetSystem sys = TwoNetSystem::create(cfg, 3, rng);
    RngState data(52);
    for (int call = 1; call <= 9; ++call) {
        StreamWindow w = rand_stream(data, 3, 3, 5);
        DecoupledReport rep = decoupled_step(sys, w.xs, w.labels);
        CHECK(rep.b_updated == (call % 3 == 0));
        CHECK(std::isnan(rep.threes_loss) == (call % 3 != 0));
        CHECK(std::isnan(rep.sg_loss) == (call % 3 != 0));
        CHECK(sys.staged_messages.size() == static_cast<std::size_t>(call % 3));
    }
    CHECK(sys.a_updates == 9);
    CHECK(sys.b_updates == 3);
    CHECK(sys.steps_done == 27);
    for (std::size_t r = 0; r < 3; ++r) CHECK(sys.staged_threes[r] == 0);  // reset after update
}

TEST_CASE("fresh message model: DNI and no-feedback twins run in lockstep, then split") {
    RngState r1(61), r2(61);
    TwoNetSystem dni = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_dni), 3, r1);
    TwoNetSystem nof = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_no_feedback), 3, r2);
    RngState data(62);
    std::vector<StreamWindow> ws;
    for (int i = 0; i < 4; ++i) ws.push_back(rand_stream(data, 2, 3, 5));

    DecoupledReport first = decoupled_step(dni, ws[0].xs, ws[0].labels);
    decoupled_step(nof, ws[0].xs, ws[0].labels);
    CHECK(first.feedback.abs_max() == 0.0);  // zero-init model, nothing to inject
    CHECK(same_tensor(dni.fcn1.W, nof.fcn1.W));
    CHECK(same_tensor(dni.msg_head.W, nof.msg_head.W));

    // Call 2 completes B's window: the regression moves the message model.
    DecoupledReport second_dni = decoupled_step(dni, ws[1].xs, ws[1].labels);
    DecoupledReport second_nof = decoupled_step(nof, ws[1].xs, ws[1].labels);
    REQUIRE(second_dni.b_updated);
    CHECK(second_dni.sg_loss == second_nof.sg_loss);  // same true gradients either way
    CHECK(same_tensor(dni.a_core.W, nof.a_core.W));   // feedback was still zero this call

    // Call 3 consumes a non-zero prediction in DNI mode only.
    DecoupledReport third = decoupled_step(dni, ws[2].xs, ws[2].labels);
    decoupled_step(nof, ws[2].xs, ws[2].labels);
    CHECK(third.feedback.abs_max() > 0.0);
    CHECK_FALSE(same_tensor(dni.msg_head.W, nof.msg_head.W));
    CHECK_FALSE(same_tensor(dni.a_core.W, nof.a_core.W));
}

TEST_CASE("no-feedback mode never touches the message head") {
    RngState rng(71);
    TwoNetSystem sys = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_no_feedback), 3, rng);
    const Tensor w0 = sys.msg_head.W, b0 = sys.msg_head.b;
    const Tensor fcn0 = sys.fcn1.W;
    const Tensor sg0 = sys.msg_sg.hidden[0].W;
    RngState data(72);
    bool sg_moved = false;
    for (int i = 0; i < 6; ++i) {
        StreamWindow w = rand_stream(data, 2, 3, 5);
        DecoupledReport rep = decoupled_step(sys, w.xs, w.labels);
        CHECK(rep.feedback.abs_max() == 0.0);
        if (!same_tensor(sys.msg_sg.hidden[0].W, sg0)) sg_moved = true;
    }
    CHECK(same_tensor(sys.msg_head.W, w0));
    CHECK(same_tensor(sys.msg_head.b, b0));
    CHECK_FALSE(same_tensor(sys.fcn1.W, fcn0));  // A's own loss path still trains
    CHECK(sg_moved);  // the model keeps regressing on true gradients regardless
}

TEST_CASE("decoupled A-gradients match the detached injected objective") {
    RngState rng(81);
    TwoNetSystem sys = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_dni), 3, rng);
    RngState data(82);
    for (int i = 0; i < 5; ++i) {  // get a non-trivial message model
        StreamWindow warm = rand_stream(data, 2, 3, 5);
        decoupled_step(sys, warm.xs, warm.labels);
    }
    set_learning_rate(sys, 0.0);
    set_sg_learning_rate(sys, 0.0);
    TwoNetSystem pre = sys;
    StreamWindow w = rand_stream(data, 2, 3, 5);
    DecoupledReport rep = decoupled_step(sys, w.xs, w.labels);
    REQUIRE(rep.feedback.abs_max() > 0.0);

    Tensor fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.a_core.W = probe;
            return a_window_objective(s, w, rep.feedback);
        },
        pre.a_core.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.a_core_dW) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.msg_head.W = probe;
            return a_window_objective(s, w, rep.feedback);
        },
        pre.msg_head.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.msg_dW) < 1e-4);

    fd = finite_diff_grad(
        [&](const Tensor& probe) {
            TwoNetSystem s = pre;
            s.fcn2.W = probe;
            return a_window_objective(s, w, rep.feedback);
        },
        pre.fcn2.W, 1e-5);
    CHECK(max_rel_err(fd, rep.grads.fcn2_dW) < 1e-4);
}

TEST_CASE("identical seeds give identical decoupled trajectories") {
    RngState r1(91), r2(91);
    TwoNetSystem a = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_dni), 3, r1);
    TwoNetSystem b = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_dni), 3, r2);
    RngState d1(92), d2(92);
    for (int i = 0; i < 6; ++i) {
        StreamWindow wa = rand_stream(d1, 2, 3, 5);
        StreamWindow wb = rand_stream(d2, 2, 3, 5);
        DecoupledReport ra = decoupled_step(a, wa.xs, wa.labels);
        DecoupledReport rb = decoupled_step(b, wb.xs, wb.labels);
        CHECK(ra.odd_loss == rb.odd_loss);
    }
    CHECK(same_tensor(a.fcn1.W, b.fcn1.W));
    CHECK(same_tensor(a.a_core.W, b.a_core.W));
    CHECK(same_tensor(a.b_core.W, b.b_core.W));
    CHECK(same_tensor(a.msg_sg.out.W, b.msg_sg.out.W));
}

TEST_CASE("digit sampling and update-free evaluation") {
    MnistDataset data;
    data.images = Tensor({30, 5});
    RngState pix(101);
    for (std::size_t i = 0; i < data.images.size(); ++i) data.images[i] = pix.next_double();
    data.labels.resize(30);
    for (std::size_t i = 0; i < 30; ++i) data.labels[i] = i % 10;

    RngState s1(102), s2(102);
    Tensor x1, x2;
    std::vector<std::size_t> l1, l2;
    sample_digit_step(data, 4, s1, x1, l1);
    sample_digit_step(data, 4, s2, x2, l2);
    CHECK(same_tensor(x1, x2));
    CHECK(l1 == l2);
    for (std::size_t r = 0; r < 4; ++r) {
        bool found = false;
        for (std::size_t i = 0; i < 30 && !found; ++i) {
            bool match = data.labels[i] == l1[r];
            for (std::size_t j = 0; j < 5 && match; ++j) match = data.images(i, j) == x1(r, j);
            found = match;
        }
        CHECK(found);  // every sampled row is a dataset row with its own label
    }

    RngState rng(103);
    TwoNetSystem sys = TwoNetSystem::create(tiny_cfg(TwoNetMode::decoupled_dni), 4, rng);
    const Tensor w_before = sys.fcn1.W;
    const Tensor rm_before = sys.bn1.running_mean;
    TwoNetEval e1 = evaluate_stream(sys, data, 5, RngState(104));
    TwoNetEval e2 = evaluate_stream(sys, data, 5, RngState(104));
    CHECK(e1.a_error == e2.a_error);
    CHECK(e1.b_error == e2.b_error);
    CHECK(e1.chance_b_error == e2.chance_b_error);
    CHECK(e1.a_error >= 0.0);
    CHECK(e1.a_error <= 1.0);
    CHECK(e1.b_error >= 0.0);
    CHECK(e1.b_error <= 1.0);
    CHECK(e1.chance_b_error >= 0.0);
    CHECK(e1.chance_b_error < 1.0);
    CHECK(same_tensor(sys.fcn1.W, w_before));
    CHECK(same_tensor(sys.bn1.running_mean, rm_before));
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dni/bp_lambda.hpp"
#include "dni/gradcheck.hpp"
#include "dni/layers.hpp"
#include "dni/rng.hpp"

using namespace dni;

namespace {

/// Small relu MLP used as a shared fixture: x -> L0 -> relu -> L1 -> relu ->
/// L2 -> squared-error loss against a fixed target.
struct Chain {
    std::vector<LinearLayer> layers;
    Tensor target;

    static Chain create(RngState& rng, std::size_t width, std::size_t depth, std::size_t batch) {
        Chain c;
        for (std::size_t i = 0; i < depth; ++i)
            c.layers.push_back(LinearLayer::create(width, width, rng, AdamConfig{}));
        c.target = Tensor({batch, width});
        rng.fill_gaussian(c.target, 1.0);
        return c;
    }
};

struct ChainRun {
    std::vector<LinearCache> lin;
    std::vector<ReluCache> relu;
    std::vector<Tensor> acts;  // acts[i] = activation entering layer i; back() = output
    Tensor dloss;
    double loss = 0.0;
};

ChainRun chain_forward(Chain& c, const Tensor& x) {
    ChainRun run;
    run.lin.resize(c.layers.size());
    run.relu.resize(c.layers.size() - 1);
    run.acts.push_back(x);
    Tensor a = x;
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        a = linear_forward(c.layers[i], a, run.lin[i]);
        if (i + 1 < c.layers.size()) a = relu_forward(a, run.relu[i]);
        run.acts.push_back(a);
    }
    run.loss = l2_loss(a, c.target, run.dloss);
    return run;
}

/// Exact backprop: returns dL/d(acts[i]) for every interface i.
std::vector<Tensor> chain_true_grads(Chain& c, const ChainRun& run) {
    std::vector<Tensor> d(run.acts.size());
    d.back() = run.dloss;
    for (std::size_t i = c.layers.size(); i-- > 0;) {
        Tensor da = d[i + 1];
        if (i + 1 < c.layers.size()) da = relu_backward(run.relu[i], da);
        d[i] = linear_backward(c.layers[i], run.lin[i], da).dx;
    }
    return d;
}

JvpBack chain_jvp(Chain& c, const ChainRun& run, std::size_t i) {
    return [&c, &run, i](const Tensor& dy) {
        Tensor da = dy;
        if (i + 1 < c.layers.size()) da = relu_backward(run.relu[i], da);
        return linear_backward(c.layers[i], run.lin[i], da).dx;
    };
}

}  // namespace

TEST_CASE("mix step endpoints are bitwise") {
    RngState rng(1);
    Tensor g({2, 3}), synth({2, 3});
    rng.fill_gaussian(g, 1.0);
    rng.fill_gaussian(synth, 1.0);
    const JvpBack jvp = [](const Tensor& t) { return scale(t, 2.0); };
    CHECK(max_abs_err(mix_step(g, jvp, synth, 1.0), scale(g, 2.0)) == 0.0);
    CHECK(max_abs_err(mix_step(g, jvp, synth, 0.0), synth) == 0.0);
    CHECK_THROWS_AS(mix_step(g, jvp, synth, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(mix_step(g, jvp, synth, -0.1), std::invalid_argument);
}

TEST_CASE("full lambda=1 fold equals exact backprop bitwise") {
    RngState rng(2);
    Chain c = Chain::create(rng, 5, 4, 3);
    Tensor x({3, 5});
    rng.fill_gaussian(x, 1.0);
    ChainRun run = chain_forward(c, x);
    const std::vector<Tensor> truth = chain_true_grads(c, run);

    Tensor g = run.dloss;
    for (std::size_t i = c.layers.size(); i-- > 0;) {
        const Tensor synth = Tensor::zeros({3, 5});
        g = mix_step(g, chain_jvp(c, run, i), synth, 1.0);
        CHECK(max_abs_err(g, truth[i]) == 0.0);
    }
}

TEST_CASE("scalar 3-interface chain matches hand expansion") {
    // h2 = 2*h1, h3 = 3*h2, top gradient 4. Synthetic gradients g1=10, g2=20.
    // With lambda = (0.5, 1):  g_2 = 1*(4*3) = 12,  g_1 = 0.5*(12*2) + 0.5*10 = 17.
    const Tensor top = Tensor::of({{4.0}});
    const JvpBack through3 = [](const Tensor& t) { return scale(t, 3.0); };
    const JvpBack through2 = [](const Tensor& t) { return scale(t, 2.0); };
    const Tensor g2 = mix_step(top, through3, Tensor::of({{20.0}}), 1.0);
    CHECK(g2(0, 0) == 12.0);
    const Tensor g1 = mix_step(g2, through2, Tensor::of({{10.0}}), 0.5);
    CHECK(g1(0, 0) == 17.0);
}

TEST_CASE("unrolled target endpoints") {
    const JvpBack jvp = [](const Tensor& t) { return scale(t, 5.0); };
    CHECK(unrolled_target(Tensor::zeros({1, 2}), jvp).abs_max() == 0.0);
    const Tensor z = unrolled_target(Tensor::of({{2.0, -1.0}}), jvp);
    CHECK(z(0, 0) == 10.0);
    CHECK(z(0, 1) == -5.0);
}

TEST_CASE("unrolled target on a lambda=1 chain is the true gradient") {
    RngState rng(3);
    Chain c = Chain::create(rng, 4, 3, 2);
    Tensor x({2, 4});
    rng.fill_gaussian(x, 1.0);
    ChainRun run = chain_forward(c, x);
    const std::vector<Tensor> truth = chain_true_grads(c, run);
    Tensor g = run.dloss;
    for (std::size_t i = c.layers.size(); i-- > 0;) {
        const Tensor z = unrolled_target(g, chain_jvp(c, run, i));
        CHECK(max_abs_err(z, truth[i]) == 0.0);
        g = z;
    }
}

TEST_CASE("recurrent mix with zero per-step loss reduces to mix step") {
    RngState rng(4);
    Tensor g({2, 3}), synth({2, 3});
    rng.fill_gaussian(g, 1.0);
    rng.fill_gaussian(synth, 1.0);
    const JvpBack jvp = [](const Tensor& t) { return scale(t, -1.5); };
    const Tensor a = recurrent_mix_step(Tensor::zeros({2, 3}), g, jvp, synth, 0.7);
    const Tensor b = mix_step(g, jvp, synth, 0.7);
    CHECK(max_abs_err(a, b) == 0.0);
}

TEST_CASE("two-step scalar recurrence matches hand expansion") {
    // Steps k=1,2 with h_{k+1} = 0.5*h_k, per-step loss gradients dl=(3, 7),
    // synthetic g=(11, 13), lambda=(0.25, 0). Fold from the far end:
    //   g_2 = 7 + (1-0)*13 = 20
    //   g_1 = 3 + 0.25*(20*0.5) + 0.75*11 = 3 + 2.5 + 8.25 = 13.75
    const JvpBack half = [](const Tensor& t) { return scale(t, 0.5); };
    const Tensor g2 = recurrent_mix_step(Tensor::of({{7.0}}), Tensor::of({{0.0}}), half,
                                         Tensor::of({{13.0}}), 0.0);
    CHECK(g2(0, 0) == 20.0);
    const Tensor g1 =
        recurrent_mix_step(Tensor::of({{3.0}}), g2, half, Tensor::of({{11.0}}), 0.25);
    CHECK(g1(0, 0) == doctest::Approx(13.75).epsilon(1e-15));
}

TEST_CASE("geometric weights hit the documented cases") {
    {
        const auto w = geometric_weights({1.0, 1.0});
        CHECK(w[0] == 0.0);
        CHECK(w[1] == 0.0);
        CHECK(w[2] == 1.0);
    }
    {
        const auto w = geometric_weights({0.0, 0.0});
        CHECK(w[0] == 1.0);
        CHECK(w[1] == 0.0);
        CHECK(w[2] == 0.0);
    }
    {
        const auto w = geometric_weights({0.5, 0.5});
        CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(w[2] == doctest::Approx(0.25).epsilon(1e-15));
    }
    CHECK(geometric_weights({}).size() == 1);
    CHECK(geometric_weights({})[0] == 1.0);
}

TEST_CASE("geometric weights form a simplex for 1000 random schedules") {
    RngState rng(5);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t k = 1 + rng.next_below(7);
        std::vector<double> lambdas(k);
        for (auto& v : lambdas) v = rng.next_double();
        const auto w = geometric_weights(lambdas);
        double sum = 0.0;
        for (double wi : w) {
            CHECK(wi >= 0.0);
            CHECK(wi <= 1.0);
            sum += wi;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("oracle synthetic gradients make the mixture exact for any schedule") {
    RngState rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        Chain c = Chain::create(rng, 4, 4, 2);
        Tensor x({2, 4});
        rng.fill_gaussian(x, 1.0);
        ChainRun run = chain_forward(c, x);
        const std::vector<Tensor> truth = chain_true_grads(c, run);
        std::vector<double> lambdas(c.layers.size());
        for (auto& v : lambdas) v = rng.next_double();

        Tensor g = run.dloss;
        for (std::size_t i = c.layers.size(); i-- > 0;) {
            g = mix_step(g, chain_jvp(c, run, i), truth[i], lambdas[i]);
            CHECK(max_rel_err(g, truth[i]) < 1e-12);
        }
    }
}

TEST_CASE("lambda=1 training trajectory is bitwise identical to backprop for 100 steps") {
    RngState rng_a(7), rng_b(7);
    Chain ref = Chain::create(rng_a, 4, 3, 4);
    Chain mixed = Chain::create(rng_b, 4, 3, 4);
    RngState data(8);

    for (int step = 0; step < 100; ++step) {
        Tensor x({4, 4});
        data.fill_gaussian(x, 1.0);

        {  // reference: plain backprop with Adam
            ChainRun run = chain_forward(ref, x);
            Tensor d = run.dloss;
            std::vector<LinearGrads> grads(ref.layers.size());
            for (std::size_t i = ref.layers.size(); i-- > 0;) {
                Tensor da = d;
                if (i + 1 < ref.layers.size()) da = relu_backward(run.relu[i], da);
                grads[i] = linear_backward(ref.layers[i], run.lin[i], da);
                d = grads[i].dx;
            }
            for (std::size_t i = 0; i < ref.layers.size(); ++i) linear_apply(ref.layers[i], grads[i]);
        }
        {  // mixed estimator with lambda = 1 everywhere
            ChainRun run = chain_forward(mixed, x);
            Tensor g = run.dloss;
            std::vector<LinearGrads> grads(mixed.layers.size());
            for (std::size_t i = mixed.layers.size(); i-- > 0;) {
                Tensor da = g;
                if (i + 1 < mixed.layers.size()) da = relu_backward(run.relu[i], da);
                grads[i] = linear_backward(mixed.layers[i], run.lin[i], da);
                g = mix_step(g, chain_jvp(mixed, run, i), Tensor::zeros(grads[i].dx.shape()), 1.0);
                CHECK(max_abs_err(g, grads[i].dx) == 0.0);
            }
            for (std::size_t i = 0; i < mixed.layers.size(); ++i)
                linear_apply(mixed.layers[i], grads[i]);
        }
        for (std::size_t i = 0; i < ref.layers.size(); ++i) {
            CHECK(max_abs_err(ref.layers[i].W, mixed.layers[i].W) < 1e-12);
            CHECK(max_abs_err(ref.layers[i].b, mixed.layers[i].b) < 1e-12);
        }
    }
}

TEST_CASE("truncation rule schedule zeroes every period-th position") {
    const LambdaSchedule s = LambdaSchedule::truncation_rule(3, 7);
    const std::vector<double> expect{0, 1, 1, 0, 1, 1, 0};
    for (std::size_t k = 0; k < 7; ++k) CHECK(s.at(k) == expect[k]);
    CHECK_THROWS_AS(LambdaSchedule::constant(2.0, 3), std::invalid_argument);
}

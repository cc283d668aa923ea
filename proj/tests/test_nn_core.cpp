#include "doctest.h"

#include "trait/errors.hpp"
#include "trait/nn.hpp"

#include "support/generators.hpp"
#include "support/reference.hpp"

#include <cmath>

using namespace trait;
using namespace trait::nn;

namespace {

// Runs autodiff vs the 64-bit central-difference oracle on every parameter and
// input coordinate; returns the worst normalized error.
double gradient_check(const testgen::Problem& prob) {
    GradientBundle bundle = gradients(prob.spec, prob.params, prob.x, prob.target, Wrt::Both);

    refimpl::FdProblem fd;
    fd.spec = prob.spec;
    fd.params = refimpl::to_double(prob.params);
    fd.x.assign(prob.x.values().begin(), prob.x.values().end());
    fd.target = prob.target;

    const double h = 1e-3;
    double worst = 0.0;
    for (std::size_t ti = 0; ti < bundle.param_grads.size(); ++ti) {
        const Tensor& g = bundle.param_grads.entries()[ti].tensor;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double ref = refimpl::fd_param(fd, ti, i, h);
            worst = std::max(worst, refimpl::grad_rel_err(static_cast<double>(g[i]), ref));
        }
    }
    REQUIRE(bundle.input_grad.has_value());
    for (std::size_t i = 0; i < bundle.input_grad->size(); ++i) {
        double ref = refimpl::fd_input(fd, i, h);
        worst = std::max(worst,
                         refimpl::grad_rel_err(static_cast<double>((*bundle.input_grad)[i]), ref));
    }
    return worst;
}

} // namespace

TEST_CASE("forward: identity dense layer reproduces input") {
    ModelSpec spec;
    spec.input_shape = {2};
    spec.layers = {{LayerKind::Dense, 2, 2}};
    ParamSet params;
    params.add("layer0.w", Tensor({2, 2}, {1, 0, 0, 1}));
    params.add("layer0.b", Tensor::zeros({2}));
    Tensor out = forward(spec, params, Tensor::vec({1, 2}));
    CHECK(out[0] == 1.0f);
    CHECK(out[1] == 2.0f);
}

TEST_CASE("forward: zero-weight network gives zero logits") {
    ModelSpec spec;
    spec.input_shape = {3};
    spec.layers = {{LayerKind::Dense, 3, 4}};
    ParamSet params;
    params.add("layer0.w", Tensor::zeros({3, 4}));
    params.add("layer0.b", Tensor::zeros({4}));
    Tensor out = forward(spec, params, Tensor::vec({0.3f, -0.7f, 2.0f}));
    for (float v : out.values()) CHECK(v == 0.0f);
}

TEST_CASE("forward: 2-layer MLP matches hand-evaluated affine chain") {
    // x=[1,2]; W1=[[1,0],[2,1]] b1=[0.5,-0.5]; relu; W2=[[1,-1],[1,1]] b2=[0.25,0.75]
    // h = relu([5.5, 1.5]) = [5.5, 1.5]; out = [7.25, -3.25]
    ModelSpec spec;
    spec.input_shape = {2};
    spec.layers = {{LayerKind::Dense, 2, 2}, {LayerKind::Relu}, {LayerKind::Dense, 2, 2}};
    ParamSet params;
    params.add("layer0.w", Tensor({2, 2}, {1, 0, 2, 1}));
    params.add("layer0.b", Tensor::vec({0.5f, -0.5f}));
    params.add("layer2.w", Tensor({2, 2}, {1, -1, 1, 1}));
    params.add("layer2.b", Tensor::vec({0.25f, 0.75f}));
    Tensor out = forward(spec, params, Tensor::vec({1, 2}));
    CHECK(out[0] == doctest::Approx(7.25).epsilon(1e-6));
    CHECK(out[1] == doctest::Approx(-3.25).epsilon(1e-6));
}

TEST_CASE("forward: shape mismatch names the offending layer") {
    ModelSpec spec;
    spec.input_shape = {2};
    spec.layers = {{LayerKind::Dense, 2, 2}};
    ParamSet params = init_params(spec, 1);
    CHECK_THROWS_AS(forward(spec, params, Tensor::vec({1, 2, 3})), ShapeError);
}

TEST_CASE("softmax: symmetry, stabilization, high-precision values") {
    Tensor s = softmax(Tensor::vec({0, 0, 0}));
    for (float v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-7));

    Tensor big = softmax(Tensor::vec({1000, 0}));
    CHECK(big[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(big[1] == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(big.all_finite());

    // direct 64-bit evaluation of exp/sum for [1,2,3]
    Tensor p = softmax(Tensor::vec({1, 2, 3}));
    CHECK(p[0] == doctest::Approx(0.09003057317038046).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.24472847105479767).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(0.6652409557748219).epsilon(1e-6));

    CHECK_THROWS_AS(softmax(Tensor()), ShapeError);
}

TEST_CASE("softmax properties: positivity, sum, shift invariance") {
    Rng rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t n = 2 + rng.uniform_index(8);
        Tensor logits = testgen::random_input(rng, {n}, -5.0, 5.0);
        Tensor s = softmax(logits);
        double sum = 0.0;
        for (float v : s.values()) {
            CHECK(v > 0.0f);
            sum += static_cast<double>(v);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

        float shift = static_cast<float>(rng.uniform(-3.0, 3.0));
        Tensor shifted = logits;
        for (float& v : shifted.values()) v += shift;
        Tensor s2 = softmax(shifted);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(s[i] == doctest::Approx(s2[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("cross_entropy_soft: trivial and derived values") {
    Tensor onehot = Tensor::vec({0, 1, 0});
    CHECK(cross_entropy_soft(onehot, onehot) == doctest::Approx(0.0));

    Tensor half = Tensor::vec({0.5f, 0.5f});
    CHECK(cross_entropy_soft(half, half) == doctest::Approx(std::log(2.0)).epsilon(1e-7));

    // -0.5*(ln 0.9 + ln 0.1) = 1.2039728043259361
    CHECK(cross_entropy_soft(half, Tensor::vec({0.9f, 0.1f})) ==
          doctest::Approx(1.2039728043259361).epsilon(1e-6));

    CHECK_THROWS_AS(cross_entropy_soft(half, onehot), ShapeError);
}

TEST_CASE("cross_entropy_soft: Gibbs inequality on random probability pairs") {
    Rng rng(1234);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t n = 2 + rng.uniform_index(6);
        auto draw = [&]() {
            Tensor p({n});
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double v = rng.uniform(1e-6, 1.0);
                p[i] = static_cast<float>(v);
                sum += v;
            }
            for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<float>(p[i] / sum);
            return p;
        };
        Tensor p = draw(), q = draw();
        CHECK(cross_entropy_soft(p, q) >= cross_entropy_soft(p, p) - 1e-9);
    }
}

TEST_CASE("mse_loss: trivial and elementwise oracle") {
    Tensor a = Tensor::vec({1, 2, 3});
    CHECK(mse_loss(a, a) == 0.0);
    CHECK(mse_loss(Tensor::vec({0}), Tensor::vec({2})) == doctest::Approx(4.0));

    Rng rng(5);
    Tensor u = testgen::random_input(rng, {17});
    Tensor v = testgen::random_input(rng, {17});
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
        acc += d * d;
    }
    CHECK(mse_loss(u, v) == doctest::Approx(acc / 17.0).epsilon(1e-6));

    CHECK_THROWS_AS(mse_loss(u, Tensor::vec({1, 2})), ShapeError);
}

TEST_CASE("gradients: loss constant in x gives zero input gradient") {
    ModelSpec spec;
    spec.input_shape = {3};
    spec.layers = {{LayerKind::Dense, 3, 4}, {LayerKind::Relu}, {LayerKind::Dense, 4, 2}};
    ParamSet params = init_params(spec, 3);
    // zero-weight final layer cuts every path from x to the loss
    params.at("layer2.w") = Tensor::zeros({4, 2});
    GradientBundle b = gradients(spec, params, Tensor::vec({0.1f, 0.2f, 0.3f}),
                                 LossTarget::hard({1}), Wrt::Input);
    REQUIRE(b.input_grad.has_value());
    for (float v : b.input_grad->values()) CHECK(v == 0.0f);
}

TEST_CASE("gradients: scalar model matches hand differentiation") {
    // f(x) = w*x, MSE vs target 0: L = (w*x)^2, dL/dw = 2*w*x^2, dL/dx = 2*w^2*x
    ModelSpec spec;
    spec.task = TaskKind::Regression;
    spec.input_shape = {1};
    spec.layers = {{LayerKind::Dense, 1, 1}};
    ParamSet params;
    float w = 0.8f, x = 1.7f;
    params.add("layer0.w", Tensor({1, 1}, {w}));
    params.add("layer0.b", Tensor::zeros({1}));
    GradientBundle b = gradients(spec, params, Tensor::vec({x}),
                                 LossTarget::mse(Tensor::vec({0})), Wrt::Both);
    CHECK(b.param_grads.at("layer0.w")[0] ==
          doctest::Approx(2.0 * w * x * x).epsilon(1e-5));
    CHECK((*b.input_grad)[0] == doctest::Approx(2.0 * w * w * x).epsilon(1e-5));
}

TEST_CASE("gradients: random models match finite differences per layer kind") {
    Rng rng(4242);
    for (const std::string& kind : testgen::layer_kinds()) {
        for (int rep = 0; rep < 10; ++rep) {
            testgen::Problem prob = testgen::random_smooth_problem(rng, kind);
            double worst = gradient_check(prob);
            INFO("kind ", kind, " rep ", rep);
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("forward determinism: identical inputs give bitwise-identical outputs") {
    Rng rng(77);
    testgen::Problem prob = testgen::random_problem(rng, "lstm");
    Tensor a = forward(prob.spec, prob.params, prob.x);
    Tensor b = forward(prob.spec, prob.params, prob.x);
    CHECK(a == b);
}

TEST_CASE("optimizer: sgd arithmetic and no-op on zero gradient") {
    ModelSpec spec;
    spec.input_shape = {1};
    spec.layers = {{LayerKind::Dense, 1, 1}};
    ParamSet params;
    params.add("layer0.w", Tensor({1, 1}, {1.0f}));
    params.add("layer0.b", Tensor::zeros({1}));

    ParamSet zero_g;
    zero_g.add("layer0.w", Tensor::zeros({1, 1}));
    zero_g.add("layer0.b", Tensor::zeros({1}));
    Optimizer opt({.method = OptMethod::Sgd, .lr = 0.1});
    ParamSet before = params;
    opt.step(params, zero_g);
    CHECK(params == before);

    ParamSet g;
    g.add("layer0.w", Tensor({1, 1}, {1.0f}));
    g.add("layer0.b", Tensor::zeros({1}));
    opt.step(params, g);
    CHECK(params.at("layer0.w")[0] == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("optimizer: adam first step magnitude is ~lr regardless of gradient scale") {
    for (float gscale : {1.0f, 100.0f, 0.01f}) {
        ParamSet params;
        params.add("p", Tensor::vec({0.5f}));
        ParamSet g;
        g.add("p", Tensor::vec({gscale}));
        Optimizer opt({.method = OptMethod::Adam, .lr = 0.001});
        opt.step(params, g);
        double update = 0.5 - static_cast<double>(params.at("p")[0]);
        CHECK(update == doctest::Approx(0.001).epsilon(1e-3));
    }
}

TEST_CASE("optimizer: non-finite update is rejected") {
    ParamSet params;
    params.add("p", Tensor::vec({1.0f}));
    ParamSet g;
    g.add("p", Tensor::vec({std::numeric_limits<float>::infinity()}));
    Optimizer opt({.method = OptMethod::Sgd, .lr = 0.1});
    CHECK_THROWS_AS(opt.step(params, g), NumericError);
}

#pragma once

// Random small-model generators shared by the unit and acceptance suites.

#include "trait/model.hpp"
#include "trait/nn.hpp"
#include "trait/rng.hpp"

#include "reference.hpp"

#include <string>
#include <vector>

namespace testgen {

using trait::Rng;
using trait::Tensor;
using namespace trait::nn;

struct Problem {
    ModelSpec spec;
    ParamSet params;
    Tensor x;
    LossTarget target;
};

inline Tensor random_input(Rng& rng, const std::vector<std::size_t>& shape, double lo = -1.0,
                           double hi = 1.0) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

inline LossTarget random_target(Rng& rng, const ModelSpec& spec, std::size_t out_dim) {
    double pick = rng.uniform();
    if (spec.task == TaskKind::Classification) {
        if (pick < 0.5) {
            return LossTarget::hard({static_cast<int>(rng.uniform_index(out_dim))});
        }
        // random probability vector
        Tensor p({out_dim});
        double sum = 0.0;
        for (std::size_t i = 0; i < out_dim; ++i) {
            double v = rng.uniform(0.05, 1.0);
            p[i] = static_cast<float>(v);
            sum += v;
        }
        for (std::size_t i = 0; i < out_dim; ++i) p[i] = static_cast<float>(p[i] / sum);
        return LossTarget::soft(std::move(p));
    }
    return LossTarget::mse(random_input(rng, {out_dim}));
}

// One random problem per layer kind; every model ends in a dense head so the
// loss is well-defined.
inline Problem random_problem(Rng& rng, const std::string& kind) {
    ModelSpec spec;
    if (kind == "dense") {
        std::size_t in = 2 + rng.uniform_index(6);
        std::size_t hid = 2 + rng.uniform_index(10);
        std::size_t out = 2 + rng.uniform_index(4);
        spec.task = rng.uniform() < 0.7 ? TaskKind::Classification : TaskKind::Regression;
        spec.input_shape = {in};
        spec.layers = {{LayerKind::Dense, in, hid}, {LayerKind::Dense, hid, out}};
    } else if (kind == "relu") {
        std::size_t in = 2 + rng.uniform_index(6);
        std::size_t hid = 2 + rng.uniform_index(10);
        std::size_t out = 2 + rng.uniform_index(4);
        spec.task = TaskKind::Classification;
        spec.input_shape = {in};
        spec.layers = {{LayerKind::Dense, in, hid}, {LayerKind::Relu}, {LayerKind::Dense, hid, out}};
    } else if (kind == "conv2d") {
        std::size_t ch = 1 + rng.uniform_index(2);
        std::size_t oc = 1 + rng.uniform_index(3);
        std::size_t hw = 5 + rng.uniform_index(3);
        std::size_t k = 2 + rng.uniform_index(2);
        std::size_t flat = oc * (hw - k + 1) * (hw - k + 1);
        std::size_t out = 2 + rng.uniform_index(3);
        spec.task = TaskKind::Classification;
        spec.input_shape = {ch, hw, hw};
        spec.layers = {{LayerKind::Conv2d, ch, oc, k},
                       {LayerKind::Relu},
                       {LayerKind::Flatten},
                       {LayerKind::Dense, flat, out}};
    } else if (kind == "lstm") {
        std::size_t T = 2 + rng.uniform_index(4);
        std::size_t D = 1 + rng.uniform_index(3);
        std::size_t h = 2 + rng.uniform_index(6);
        spec.task = rng.uniform() < 0.5 ? TaskKind::Classification : TaskKind::Regression;
        spec.input_shape = {T, D};
        std::size_t out = spec.task == TaskKind::Classification ? 2 + rng.uniform_index(3) : 1;
        spec.layers = {{LayerKind::Lstm, D, h}, {LayerKind::Dense, h, out}};
    } else { // flatten
        std::size_t r = 2 + rng.uniform_index(3);
        std::size_t c = 2 + rng.uniform_index(3);
        std::size_t out = 2 + rng.uniform_index(3);
        spec.task = TaskKind::Classification;
        spec.input_shape = {1, r, c};
        spec.layers = {{LayerKind::Flatten}, {LayerKind::Dense, r * c, out}};
    }

    Problem p;
    p.spec = spec;
    p.params = init_params(spec, rng.next_u64());
    p.x = random_input(rng, spec.input_shape);
    p.target = random_target(rng, spec, spec.output_dim());
    return p;
}

// A central difference with step h is meaningless across a relu kink, so
// problems whose pre-activations sit within reach of the perturbation are
// resampled. 0.02 covers step 1e-3 times the worst activation sensitivity of
// these small nets with an order of magnitude to spare.
inline Problem random_smooth_problem(Rng& rng, const std::string& kind,
                                     double margin = 0.02, int max_tries = 200) {
    for (int t = 0; t < max_tries; ++t) {
        Problem p = random_problem(rng, kind);
        double m = 0.0;
        std::vector<double> x64(p.x.values().begin(), p.x.values().end());
        refimpl::forward64(p.spec, refimpl::to_double(p.params), x64, &m);
        if (m >= margin) return p;
    }
    throw std::runtime_error("could not sample a kink-free problem for kind " + kind);
}

inline const std::vector<std::string>& layer_kinds() {
    static const std::vector<std::string> kinds{"dense", "relu", "conv2d", "lstm", "flatten"};
    return kinds;
}

} // namespace testgen

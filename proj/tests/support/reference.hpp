#pragma once

// Test-only reference implementations, all in 64-bit, written independently of
// the library's graph/FFT code paths. These are the oracles the unit and
// acceptance suites compare against.

#include "trait/model.hpp"
#include "trait/nn.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace refimpl {

// ---------- 64-bit forward pass over a ModelSpec (plain loops, no tape) ----------

struct Params64 {
    std::vector<std::vector<double>> tensors; // ParamSet order
};

inline Params64 to_double(const trait::nn::ParamSet& params) {
    Params64 out;
    for (const auto& e : params.entries()) {
        std::vector<double> t(e.tensor.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(e.tensor[i]);
        out.tensors.push_back(std::move(t));
    }
    return out;
}

// min_relu_margin, when non-null, receives the smallest |pre-activation| seen
// at any relu layer; finite differences are only trustworthy away from kinks.
inline std::vector<double> forward64(const trait::nn::ModelSpec& spec, const Params64& params,
                                     const std::vector<double>& x,
                                     double* min_relu_margin = nullptr) {
    using trait::nn::LayerKind;
    if (min_relu_margin) *min_relu_margin = 1e300;
    std::vector<double> cur = x;
    std::vector<std::size_t> shape = spec.input_shape;
    std::size_t pi = 0;
    for (const auto& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::Dense: {
                const std::vector<double>& w = params.tensors[pi++];
                const std::vector<double>& b = params.tensors[pi++];
                std::vector<double> out(l.b, 0.0);
                for (std::size_t j = 0; j < l.b; ++j) {
                    double acc = b[j];
                    for (std::size_t i = 0; i < l.a; ++i) acc += cur[i] * w[i * l.b + j];
                    out[j] = acc;
                }
                cur = std::move(out);
                shape = {l.b};
                break;
            }
            case LayerKind::Conv2d: {
                const std::vector<double>& w = params.tensors[pi++];
                const std::vector<double>& b = params.tensors[pi++];
                std::size_t Cin = shape[0], H = shape[1], W = shape[2];
                std::size_t Ho = H - l.k + 1, Wo = W - l.k + 1;
                std::vector<double> out(l.b * Ho * Wo, 0.0);
                for (std::size_t o = 0; o < l.b; ++o) {
                    for (std::size_t i = 0; i < Ho; ++i) {
                        for (std::size_t j = 0; j < Wo; ++j) {
                            double acc = b[o];
                            for (std::size_t c = 0; c < Cin; ++c) {
                                for (std::size_t u = 0; u < l.k; ++u) {
                                    for (std::size_t v = 0; v < l.k; ++v) {
                                        acc += cur[(c * H + i + u) * W + j + v] *
                                               w[((o * Cin + c) * l.k + u) * l.k + v];
                                    }
                                }
                            }
                            out[(o * Ho + i) * Wo + j] = acc;
                        }
                    }
                }
                cur = std::move(out);
                shape = {l.b, Ho, Wo};
                break;
            }
            case LayerKind::Lstm: {
                const std::vector<double>& wx = params.tensors[pi++];
                const std::vector<double>& wh = params.tensors[pi++];
                const std::vector<double>& b = params.tensors[pi++];
                std::size_t T = shape[0], D = shape[1], h = l.b;
                std::vector<double> hh(h, 0.0), cc(h, 0.0);
                auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
                for (std::size_t t = 0; t < T; ++t) {
                    std::vector<double> z(4 * h, 0.0);
                    for (std::size_t j = 0; j < 4 * h; ++j) {
                        double acc = b[j];
                        for (std::size_t i = 0; i < D; ++i) acc += cur[t * D + i] * wx[i * 4 * h + j];
                        for (std::size_t i = 0; i < h; ++i) acc += hh[i] * wh[i * 4 * h + j];
                        z[j] = acc;
                    }
                    for (std::size_t j = 0; j < h; ++j) {
                        double gi = sg(z[j]);
                        double gf = sg(z[h + j]);
                        double gc = std::tanh(z[2 * h + j]);
                        double go = sg(z[3 * h + j]);
                        cc[j] = gf * cc[j] + gi * gc;
                        hh[j] = go * std::tanh(cc[j]);
                    }
                }
                cur = hh;
                shape = {h};
                break;
            }
            case LayerKind::Relu:
                for (double& v : cur) {
                    if (min_relu_margin) *min_relu_margin = std::min(*min_relu_margin, std::fabs(v));
                    v = v > 0.0 ? v : 0.0;
                }
                break;
            case LayerKind::Flatten:
                shape = {trait::shape_product(shape)};
                break;
        }
    }
    return cur;
}

inline std::vector<double> softmax64(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - mx);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - mx) / denom;
    return out;
}

inline double ce64(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc -= p[i] * std::log(std::max(q[i], 1e-12));
    }
    return acc;
}

inline double mse64(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

// Loss of one example under the reference forward.
inline double loss64(const trait::nn::ModelSpec& spec, const Params64& params,
                     const std::vector<double>& x, const trait::nn::LossTarget& target) {
    using trait::nn::LossKind;
    std::vector<double> out = forward64(spec, params, x);
    switch (target.kind) {
        case LossKind::CrossEntropyHard: {
            std::vector<double> q = softmax64(out);
            std::vector<double> p(q.size(), 0.0);
            p[static_cast<std::size_t>(target.labels[0])] = 1.0;
            return ce64(p, q);
        }
        case LossKind::CrossEntropySoft: {
            std::vector<double> q = softmax64(out);
            std::vector<double> p(target.values.size());
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(target.values[i]);
            return ce64(p, q);
        }
        case LossKind::Mse: {
            std::vector<double> t(target.values.size());
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(target.values[i]);
            return mse64(t, out);
        }
    }
    return 0.0;
}

// Central finite difference d loss / d theta_i with step h, evaluated through
// the 64-bit path. `theta` indexes the flattened (params ++ input) vector.
struct FdProblem {
    trait::nn::ModelSpec spec;
    Params64 params;
    std::vector<double> x;
    trait::nn::LossTarget target;
};

inline double fd_param(const FdProblem& prob, std::size_t tensor_idx, std::size_t elem_idx, double h) {
    FdProblem p = prob;
    p.params.tensors[tensor_idx][elem_idx] = prob.params.tensors[tensor_idx][elem_idx] + h;
    double up = loss64(p.spec, p.params, p.x, p.target);
    p.params.tensors[tensor_idx][elem_idx] = prob.params.tensors[tensor_idx][elem_idx] - h;
    double dn = loss64(p.spec, p.params, p.x, p.target);
    return (up - dn) / (2.0 * h);
}

inline double fd_input(const FdProblem& prob, std::size_t elem_idx, double h) {
    FdProblem p = prob;
    p.x[elem_idx] = prob.x[elem_idx] + h;
    double up = loss64(p.spec, p.params, p.x, p.target);
    p.x[elem_idx] = prob.x[elem_idx] - h;
    double dn = loss64(p.spec, p.params, p.x, p.target);
    return (up - dn) / (2.0 * h);
}

// ---------- naive O(n^2) DFT oracle ----------

inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            double ang = -2.0 * std::numbers::pi * static_cast<double>(j) * static_cast<double>(t) /
                         static_cast<double>(n);
            acc += v[t] * std::complex<double>{std::cos(ang), std::sin(ang)};
        }
        out[j] = acc;
    }
    return out;
}

// Normalized gradient-check error: |a-b| / max(1, |a|, |b|).
inline double grad_rel_err(double a, double b) {
    double denom = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) / denom;
}

} // namespace refimpl

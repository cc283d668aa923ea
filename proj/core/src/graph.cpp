#include "trait/graph.hpp"

#include "trait/errors.hpp"

#include <cmath>

namespace trait::nn {

Graph::Id Graph::emit(Tensor value, bool requires_grad, std::function<void()> backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) {
        n.grad.assign(n.value.size(), 0.0);
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

std::vector<double>& Graph::grad_buf(Id id) { return nodes_[static_cast<std::size_t>(id)].grad; }

Graph::Id Graph::constant(Tensor t) { return emit(std::move(t), false, nullptr); }

Graph::Id Graph::variable(Tensor t) { return emit(std::move(t), true, nullptr); }

Graph::Id Graph::matmul(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.extent(1) != B.extent(0)) {
        throw ShapeError("matmul: incompatible shapes " + A.shape_str() + " x " + B.shape_str());
    }
    std::size_t M = A.extent(0), K = A.extent(1), N = B.extent(1);
    Tensor C({M, N});
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                acc += static_cast<double>(A[i * K + k]) * static_cast<double>(B[k * N + j]);
            }
            C[i * N + j] = static_cast<float>(acc);
        }
    }
    Id out = emit(std::move(C), rg(a) || rg(b), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, b, out, M, K, N]() {
            const std::vector<double>& dC = grad_buf(out);
            const Tensor& A2 = val(a);
            const Tensor& B2 = val(b);
            if (rg(a)) {
                std::vector<double>& dA = grad_buf(a);
                for (std::size_t i = 0; i < M; ++i) {
                    for (std::size_t k = 0; k < K; ++k) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < N; ++j) {
                            acc += dC[i * N + j] * static_cast<double>(B2[k * N + j]);
                        }
                        dA[i * K + k] += acc;
                    }
                }
            }
            if (rg(b)) {
                std::vector<double>& dB = grad_buf(b);
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t j = 0; j < N; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < M; ++i) {
                            acc += static_cast<double>(A2[i * K + k]) * dC[i * N + j];
                        }
                        dB[k * N + j] += acc;
                    }
                }
            }
        };
    }
    return out;
}

Graph::Id Graph::add(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) {
        throw ShapeError("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = static_cast<float>(static_cast<double>(A[i]) + static_cast<double>(B[i]));
    }
    Id out = emit(std::move(C), rg(a) || rg(b), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, b, out]() {
            const std::vector<double>& d = grad_buf(out);
            if (rg(a)) {
                std::vector<double>& da = grad_buf(a);
                for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
            }
            if (rg(b)) {
                std::vector<double>& db = grad_buf(b);
                for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i];
            }
        };
    }
    return out;
}

Graph::Id Graph::sub(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) {
        throw ShapeError("sub: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = static_cast<float>(static_cast<double>(A[i]) - static_cast<double>(B[i]));
    }
    Id out = emit(std::move(C), rg(a) || rg(b), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, b, out]() {
            const std::vector<double>& d = grad_buf(out);
            if (rg(a)) {
                std::vector<double>& da = grad_buf(a);
                for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
            }
            if (rg(b)) {
                std::vector<double>& db = grad_buf(b);
                for (std::size_t i = 0; i < d.size(); ++i) db[i] -= d[i];
            }
        };
    }
    return out;
}

Graph::Id Graph::mul(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) {
        throw ShapeError("mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = static_cast<float>(static_cast<double>(A[i]) * static_cast<double>(B[i]));
    }
    Id out = emit(std::move(C), rg(a) || rg(b), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, b, out]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& A2 = val(a);
            const Tensor& B2 = val(b);
            if (rg(a)) {
                std::vector<double>& da = grad_buf(a);
                for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * static_cast<double>(B2[i]);
            }
            if (rg(b)) {
                std::vector<double>& db = grad_buf(b);
                for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i] * static_cast<double>(A2[i]);
            }
        };
    }
    return out;
}

Graph::Id Graph::add_rowwise(Id a, Id bias) {
    const Tensor& A = val(a);
    const Tensor& B = val(bias);
    if (A.rank() != 2 || B.rank() != 1 || A.extent(1) != B.extent(0)) {
        throw ShapeError("add_rowwise: shapes " + A.shape_str() + " + " + B.shape_str());
    }
    std::size_t R = A.extent(0), C = A.extent(1);
    Tensor out_t(A.shape());
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            out_t[i * C + j] =
                static_cast<float>(static_cast<double>(A[i * C + j]) + static_cast<double>(B[j]));
        }
    }
    Id out = emit(std::move(out_t), rg(a) || rg(bias), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, bias, out, R, C]() {
            const std::vector<double>& d = grad_buf(out);
            if (rg(a)) {
                std::vector<double>& da = grad_buf(a);
                for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
            }
            if (rg(bias)) {
                std::vector<double>& db = grad_buf(bias);
                for (std::size_t j = 0; j < C; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < R; ++i) acc += d[i * C + j];
                    db[j] += acc;
                }
            }
        };
    }
    return out;
}

Graph::Id Graph::scale(Id a, double s) {
    const Tensor& A = val(a);
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = static_cast<float>(static_cast<double>(A[i]) * s);
    }
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out, s]() {
            const std::vector<double>& d = grad_buf(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * s;
        };
    }
    return out;
}

Graph::Id Graph::relu(Id a) {
    const Tensor& A = val(a);
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] > 0.0f ? A[i] : 0.0f;
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& A2 = val(a);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (A2[i] > 0.0f) da[i] += d[i];
            }
        };
    }
    return out;
}

Graph::Id Graph::sigmoid(Id a) {
    const Tensor& A = val(a);
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(A[i]))));
    }
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& Y = val(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) {
                double y = static_cast<double>(Y[i]);
                da[i] += d[i] * y * (1.0 - y);
            }
        };
    }
    return out;
}

Graph::Id Graph::tanh_op(Id a) {
    const Tensor& A = val(a);
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        C[i] = static_cast<float>(std::tanh(static_cast<double>(A[i])));
    }
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& Y = val(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) {
                double y = static_cast<double>(Y[i]);
                da[i] += d[i] * (1.0 - y * y);
            }
        };
    }
    return out;
}

Graph::Id Graph::softmax_rows(Id a) {
    const Tensor& A = val(a);
    if (A.rank() != 1 && A.rank() != 2) {
        throw ShapeError("softmax: expected rank-1 or rank-2, got " + A.shape_str());
    }
    std::size_t rows = A.rank() == 2 ? A.extent(0) : 1;
    std::size_t cols = A.rank() == 2 ? A.extent(1) : A.extent(0);
    Tensor C(A.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = A.data() + r * cols;
        float* out_p = C.data() + r * cols;
        float mx = in[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            denom += std::exp(static_cast<double>(in[j]) - static_cast<double>(mx));
        }
        for (std::size_t j = 0; j < cols; ++j) {
            out_p[j] = static_cast<float>(
                std::exp(static_cast<double>(in[j]) - static_cast<double>(mx)) / denom);
        }
    }
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out, rows, cols]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& Y = val(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    dot += d[r * cols + j] * static_cast<double>(Y[r * cols + j]);
                }
                for (std::size_t j = 0; j < cols; ++j) {
                    double y = static_cast<double>(Y[r * cols + j]);
                    da[r * cols + j] += y * (d[r * cols + j] - dot);
                }
            }
        };
    }
    return out;
}

Graph::Id Graph::log_clamped(Id a, double floor_value) {
    const Tensor& A = val(a);
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) {
        double x = static_cast<double>(A[i]);
        C[i] = static_cast<float>(std::log(x < floor_value ? floor_value : x));
    }
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out, floor_value]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& A2 = val(a);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) {
                double x = static_cast<double>(A2[i]);
                if (x >= floor_value) da[i] += d[i] / x;
            }
        };
    }
    return out;
}

Graph::Id Graph::sum_all(Id a) {
    const Tensor& A = val(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += static_cast<double>(A[i]);
    Id out = emit(Tensor::scalar(static_cast<float>(acc)), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out]() {
            double d = grad_buf(out)[0];
            std::vector<double>& da = grad_buf(a);
            for (double& g : da) g += d;
        };
    }
    return out;
}

Graph::Id Graph::mean_all(Id a) {
    const Tensor& A = val(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += static_cast<double>(A[i]);
    double n = static_cast<double>(A.size());
    Id out = emit(Tensor::scalar(static_cast<float>(acc / n)), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out, n]() {
            double d = grad_buf(out)[0] / n;
            std::vector<double>& da = grad_buf(a);
            for (double& g : da) g += d;
        };
    }
    return out;
}

Graph::Id Graph::slice_cols(Id a, std::size_t c0, std::size_t c1) {
    const Tensor& A = val(a);
    if (A.rank() != 2 || c0 >= c1 || c1 > A.extent(1)) {
        throw ShapeError("slice_cols: bad window [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") on " + A.shape_str());
    }
    std::size_t R = A.extent(0), C = A.extent(1), W = c1 - c0;
    Tensor out_t({R, W});
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < W; ++j) out_t[i * W + j] = A[i * C + c0 + j];
    }
    Id out = emit(std::move(out_t), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out, R, C, W, c0]() {
            const std::vector<double>& d = grad_buf(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < R; ++i) {
                for (std::size_t j = 0; j < W; ++j) da[i * C + c0 + j] += d[i * W + j];
            }
        };
    }
    return out;
}

Graph::Id Graph::concat_cols(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.extent(0) != B.extent(0)) {
        throw ShapeError("concat_cols: shapes " + A.shape_str() + " ++ " + B.shape_str());
    }
    std::size_t R = A.extent(0), Ca = A.extent(1), Cb = B.extent(1);
    Tensor out_t({R, Ca + Cb});
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < Ca; ++j) out_t[i * (Ca + Cb) + j] = A[i * Ca + j];
        for (std::size_t j = 0; j < Cb; ++j) out_t[i * (Ca + Cb) + Ca + j] = B[i * Cb + j];
    }
    Id out = emit(std::move(out_t), rg(a) || rg(b), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, b, out, R, Ca, Cb]() {
            const std::vector<double>& d = grad_buf(out);
            if (rg(a)) {
                std::vector<double>& da = grad_buf(a);
                for (std::size_t i = 0; i < R; ++i) {
                    for (std::size_t j = 0; j < Ca; ++j) da[i * Ca + j] += d[i * (Ca + Cb) + j];
                }
            }
            if (rg(b)) {
                std::vector<double>& db = grad_buf(b);
                for (std::size_t i = 0; i < R; ++i) {
                    for (std::size_t j = 0; j < Cb; ++j) db[i * Cb + j] += d[i * (Ca + Cb) + Ca + j];
                }
            }
        };
    }
    return out;
}

Graph::Id Graph::reshape(Id a, std::vector<std::size_t> shape) {
    const Tensor& A = val(a);
    if (shape_product(shape) != A.size()) {
        throw ShapeError("reshape: " + A.shape_str() + " -> " + shape_to_string(shape));
    }
    Tensor out_t(std::move(shape), A.values());
    Id out = emit(std::move(out_t), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out]() {
            const std::vector<double>& d = grad_buf(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
        };
    }
    return out;
}

Graph::Id Graph::conv2d(Id x, Id w, Id bias) {
    const Tensor& X = val(x);
    const Tensor& W = val(w);
    const Tensor& Bv = val(bias);
    if (X.rank() != 4 || W.rank() != 4 || Bv.rank() != 1) {
        throw ShapeError("conv2d: expected x(B,C,H,W), w(O,C,k,k), b(O)");
    }
    std::size_t B = X.extent(0), Cin = X.extent(1), H = X.extent(2), Wd = X.extent(3);
    std::size_t Cout = W.extent(0), k = W.extent(2);
    if (W.extent(1) != Cin || W.extent(3) != k || Bv.extent(0) != Cout || H < k || Wd < k) {
        throw ShapeError("conv2d: incompatible shapes x" + X.shape_str() + " w" + W.shape_str());
    }
    std::size_t Ho = H - k + 1, Wo = Wd - k + 1;
    Tensor out_t({B, Cout, Ho, Wo});
    auto xi = [Cin, H, Wd](std::size_t b, std::size_t c, std::size_t i, std::size_t j) {
        return ((b * Cin + c) * H + i) * Wd + j;
    };
    auto wi = [Cin, k](std::size_t o, std::size_t c, std::size_t i, std::size_t j) {
        return ((o * Cin + c) * k + i) * k + j;
    };
    auto oi = [Cout, Ho, Wo](std::size_t b, std::size_t o, std::size_t i, std::size_t j) {
        return ((b * Cout + o) * Ho + i) * Wo + j;
    };
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < Cout; ++o) {
            for (std::size_t i = 0; i < Ho; ++i) {
                for (std::size_t j = 0; j < Wo; ++j) {
                    double acc = static_cast<double>(Bv[o]);
                    for (std::size_t c = 0; c < Cin; ++c) {
                        for (std::size_t u = 0; u < k; ++u) {
                            for (std::size_t v = 0; v < k; ++v) {
                                acc += static_cast<double>(X[xi(b, c, i + u, j + v)]) *
                                       static_cast<double>(W[wi(o, c, u, v)]);
                            }
                        }
                    }
                    out_t[oi(b, o, i, j)] = static_cast<float>(acc);
                }
            }
        }
    }
    Id out = emit(std::move(out_t), rg(x) || rg(w) || rg(bias), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, x, w, bias, out, B, Cin, H, Wd, Cout, k, Ho, Wo, xi, wi, oi]() {
            const std::vector<double>& d = grad_buf(out);
            const Tensor& X2 = val(x);
            const Tensor& W2 = val(w);
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t o = 0; o < Cout; ++o) {
                    for (std::size_t i = 0; i < Ho; ++i) {
                        for (std::size_t j = 0; j < Wo; ++j) {
                            double g = d[oi(b, o, i, j)];
                            if (g == 0.0) continue;
                            if (rg(bias)) grad_buf(bias)[o] += g;
                            for (std::size_t c = 0; c < Cin; ++c) {
                                for (std::size_t u = 0; u < k; ++u) {
                                    for (std::size_t v = 0; v < k; ++v) {
                                        if (rg(x)) {
                                            grad_buf(x)[xi(b, c, i + u, j + v)] +=
                                                g * static_cast<double>(W2[wi(o, c, u, v)]);
                                        }
                                        if (rg(w)) {
                                            grad_buf(w)[wi(o, c, u, v)] +=
                                                g * static_cast<double>(X2[xi(b, c, i + u, j + v)]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return out;
}

Graph::Id Graph::dropout_mask(Id a, std::vector<float> mask) {
    const Tensor& A = val(a);
    if (mask.size() != A.size()) throw ShapeError("dropout: mask length mismatch");
    Tensor C(A.shape());
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] * mask[i];
    Id out = emit(std::move(C), rg(a), nullptr);
    if (rg(out)) {
        nodes_.back().backward = [this, a, out, mask = std::move(mask)]() {
            const std::vector<double>& d = grad_buf(out);
            std::vector<double>& da = grad_buf(a);
            for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * static_cast<double>(mask[i]);
        };
    }
    return out;
}

double Graph::scalar(Id id) const {
    const Tensor& t = val(id);
    if (t.size() != 1) throw ShapeError("scalar(): node has shape " + t.shape_str());
    return static_cast<double>(t[0]);
}

void Graph::backward(Id root) {
    Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.value.size() != 1) throw ShapeError("backward: root must be scalar");
    if (!r.requires_grad) return;
    r.grad[0] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(root) + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward) n.backward();
    }
}

const std::vector<double>& Graph::grad(Id id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) throw Error("grad(): node does not require gradients");
    return n.grad;
}

Tensor Graph::grad_tensor(Id id) const {
    const std::vector<double>& g = grad(id);
    Tensor t(val(id).shape());
    for (std::size_t i = 0; i < g.size(); ++i) t[i] = static_cast<float>(g[i]);
    return t;
}

} // namespace trait::nn

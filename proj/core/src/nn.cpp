#include "trait/nn.hpp"

#include "trait/errors.hpp"

#include <cmath>

namespace trait::nn {

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 1 || logits.size() == 0) {
        throw ShapeError("softmax: expected non-empty rank-1 logits, got " + logits.shape_str());
    }
    logits.require_finite("softmax input");
    float mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        denom += std::exp(static_cast<double>(logits[i]) - static_cast<double>(mx));
    }
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - static_cast<double>(mx)) /
                                    denom);
    }
    return out;
}

double cross_entropy_soft(const Tensor& target_probs, const Tensor& predicted_probs) {
    if (target_probs.size() != predicted_probs.size() || target_probs.size() == 0) {
        throw ShapeError("cross_entropy_soft: length mismatch " + target_probs.shape_str() + " vs " +
                         predicted_probs.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < target_probs.size(); ++i) {
        double q = static_cast<double>(predicted_probs[i]);
        if (q < kLogFloor) q = kLogFloor;
        acc -= static_cast<double>(target_probs[i]) * std::log(q);
    }
    return acc;
}

double mse_loss(const Tensor& target, const Tensor& predicted) {
    if (!target.same_shape(predicted)) {
        throw ShapeError("mse_loss: shape mismatch " + target.shape_str() + " vs " +
                         predicted.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        double d = static_cast<double>(target[i]) - static_cast<double>(predicted[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(target.size());
}

double entropy(const Tensor& probs) { return cross_entropy_soft(probs, probs); }

LossTarget LossTarget::hard(std::vector<int> labels) {
    LossTarget t;
    t.kind = LossKind::CrossEntropyHard;
    t.labels = std::move(labels);
    return t;
}

LossTarget LossTarget::soft(Tensor probs) {
    LossTarget t;
    t.kind = LossKind::CrossEntropySoft;
    t.values = std::move(probs);
    return t;
}

LossTarget LossTarget::mse(Tensor targets) {
    LossTarget t;
    t.kind = LossKind::Mse;
    t.values = std::move(targets);
    return t;
}

namespace {

std::vector<std::size_t> batch_shape(const ModelSpec& spec, std::size_t batch) {
    std::vector<std::size_t> s{batch};
    s.insert(s.end(), spec.input_shape.begin(), spec.input_shape.end());
    return s;
}

} // namespace

Graph::Id build_forward(Graph& g, const ModelSpec& spec, const ParamSet& params, Graph::Id input,
                        std::vector<Graph::Id>* param_ids) {
    spec.validate();
    check_params(spec, params);

    const Tensor& X = g.value(input);
    std::size_t batch = X.extent(0);
    if (X.shape() != batch_shape(spec, batch)) {
        throw ShapeError("input shape " + X.shape_str() + " does not match model input " +
                         shape_to_string(spec.input_shape));
    }

    auto param_node = [&](const std::string& name) {
        const Tensor& t = params.at(name);
        if (param_ids) {
            Graph::Id id = g.variable(t);
            param_ids->push_back(id);
            return id;
        }
        return g.constant(t);
    };

    Graph::Id cur = input;
    std::vector<std::size_t> shape = spec.input_shape; // per-example
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerDesc& l = spec.layers[li];
        std::string where = "layer " + std::to_string(li) + " (" + l.to_string() + ")";
        switch (l.kind) {
            case LayerKind::Dense: {
                Graph::Id w = param_node("layer" + std::to_string(li) + ".w");
                Graph::Id b = param_node("layer" + std::to_string(li) + ".b");
                cur = g.add_rowwise(g.matmul(cur, w), b);
                shape = {l.b};
                break;
            }
            case LayerKind::Conv2d: {
                Graph::Id w = param_node("layer" + std::to_string(li) + ".w");
                Graph::Id b = param_node("layer" + std::to_string(li) + ".b");
                cur = g.conv2d(cur, w, b);
                shape = {l.b, shape[1] - l.k + 1, shape[2] - l.k + 1};
                break;
            }
            case LayerKind::Lstm: {
                Graph::Id wx = param_node("layer" + std::to_string(li) + ".wx");
                Graph::Id wh = param_node("layer" + std::to_string(li) + ".wh");
                Graph::Id b = param_node("layer" + std::to_string(li) + ".b");
                std::size_t T = shape[0], D = shape[1], h = l.b;
                Graph::Id flat = g.reshape(cur, {batch, T * D});
                LstmState state{g.constant(Tensor::zeros({batch, h})),
                                g.constant(Tensor::zeros({batch, h}))};
                for (std::size_t t = 0; t < T; ++t) {
                    Graph::Id x_t = g.slice_cols(flat, t * D, (t + 1) * D);
                    state = lstm_cell(g, x_t, state, wx, wh, b);
                }
                cur = state.h;
                shape = {h};
                break;
            }
            case LayerKind::Relu:
                cur = g.relu(cur);
                break;
            case LayerKind::Flatten: {
                std::size_t flat = shape_product(shape);
                cur = g.reshape(cur, {batch, flat});
                shape = {flat};
                break;
            }
        }
        if (!g.value(cur).all_finite()) {
            throw NumericError("non-finite activation after " + where);
        }
    }
    return cur;
}

Graph::Id build_loss(Graph& g, Graph::Id output, const LossTarget& target) {
    const Tensor& out = g.value(output);
    if (out.rank() != 2) throw ShapeError("build_loss: output must be (B,out)");
    std::size_t B = out.extent(0), C = out.extent(1);

    switch (target.kind) {
        case LossKind::CrossEntropyHard: {
            if (target.labels.size() != B) {
                throw ShapeError("loss: label count " + std::to_string(target.labels.size()) +
                                 " != batch " + std::to_string(B));
            }
            Tensor onehot({B, C});
            for (std::size_t i = 0; i < B; ++i) {
                int y = target.labels[i];
                if (y < 0 || static_cast<std::size_t>(y) >= C) {
                    throw ShapeError("loss: label " + std::to_string(y) + " out of range for C=" +
                                     std::to_string(C));
                }
                onehot[i * C + static_cast<std::size_t>(y)] = 1.0f;
            }
            Graph::Id probs = g.softmax_rows(output);
            Graph::Id lp = g.log_clamped(probs, kLogFloor);
            Graph::Id picked = g.mul(lp, g.constant(std::move(onehot)));
            return g.scale(g.sum_all(picked), -1.0 / static_cast<double>(B));
        }
        case LossKind::CrossEntropySoft: {
            if (target.values.shape() != out.shape()) {
                throw ShapeError("loss: soft target shape " + target.values.shape_str() +
                                 " != output " + out.shape_str());
            }
            Graph::Id probs = g.softmax_rows(output);
            Graph::Id lp = g.log_clamped(probs, kLogFloor);
            Graph::Id weighted = g.mul(lp, g.constant(target.values));
            return g.scale(g.sum_all(weighted), -1.0 / static_cast<double>(B));
        }
        case LossKind::Mse: {
            if (target.values.shape() != out.shape()) {
                throw ShapeError("loss: mse target shape " + target.values.shape_str() +
                                 " != output " + out.shape_str());
            }
            Graph::Id d = g.sub(output, g.constant(target.values));
            return g.mean_all(g.mul(d, d));
        }
    }
    throw Error("unreachable loss kind");
}

LstmState lstm_cell(Graph& g, Graph::Id x_t, LstmState state, Graph::Id wx, Graph::Id wh,
                    Graph::Id bias) {
    std::size_t h = g.value(state.h).extent(1);
    Graph::Id z = g.add_rowwise(g.add(g.matmul(x_t, wx), g.matmul(state.h, wh)), bias);
    Graph::Id gi = g.sigmoid(g.slice_cols(z, 0, h));
    Graph::Id gf = g.sigmoid(g.slice_cols(z, h, 2 * h));
    Graph::Id gc = g.tanh_op(g.slice_cols(z, 2 * h, 3 * h));
    Graph::Id go = g.sigmoid(g.slice_cols(z, 3 * h, 4 * h));
    Graph::Id c_next = g.add(g.mul(gf, state.c), g.mul(gi, gc));
    Graph::Id h_next = g.mul(go, g.tanh_op(c_next));
    return {h_next, c_next};
}

Tensor forward_batch(const ModelSpec& spec, const ParamSet& params, const Tensor& X) {
    Graph g;
    Graph::Id out = build_forward(g, spec, params, g.constant(X), nullptr);
    return g.value(out);
}

Tensor forward(const ModelSpec& spec, const ParamSet& params, const Tensor& x) {
    if (x.shape() != spec.input_shape) {
        throw ShapeError("forward: input shape " + x.shape_str() + " does not match model input " +
                         shape_to_string(spec.input_shape));
    }
    std::vector<std::size_t> bshape{1};
    bshape.insert(bshape.end(), x.shape().begin(), x.shape().end());
    Tensor xb(bshape, x.values());
    Tensor out = forward_batch(spec, params, xb);
    return Tensor({out.extent(1)}, out.values());
}

GradientBundle batch_gradients(const ModelSpec& spec, const ParamSet& params, const Tensor& X,
                               const LossTarget& target, Wrt wrt, double* loss_out) {
    Graph g;
    bool need_input = wrt != Wrt::Params;
    bool need_params = wrt != Wrt::Input;

    Graph::Id input = need_input ? g.variable(X) : g.constant(X);
    std::vector<Graph::Id> param_ids;
    Graph::Id out = build_forward(g, spec, params, input, need_params ? &param_ids : nullptr);
    Graph::Id loss = build_loss(g, out, target);
    if (!std::isfinite(g.scalar(loss))) throw NumericError("non-finite loss value");
    if (loss_out) *loss_out = g.scalar(loss);
    g.backward(loss);

    GradientBundle bundle;
    if (need_params) {
        for (std::size_t i = 0; i < param_ids.size(); ++i) {
            Tensor gt = g.grad_tensor(param_ids[i]);
            gt.require_finite("gradient of " + params.entries()[i].name);
            bundle.param_grads.add(params.entries()[i].name, std::move(gt));
        }
    }
    if (need_input) {
        Tensor gi = g.grad_tensor(input);
        gi.require_finite("input gradient");
        bundle.input_grad = std::move(gi);
    }
    return bundle;
}

GradientBundle gradients(const ModelSpec& spec, const ParamSet& params, const Tensor& x,
                         const LossTarget& target, Wrt wrt, double* loss_out) {
    if (x.shape() != spec.input_shape) {
        throw ShapeError("gradients: input shape " + x.shape_str() + " does not match model input " +
                         shape_to_string(spec.input_shape));
    }
    std::vector<std::size_t> bshape{1};
    bshape.insert(bshape.end(), x.shape().begin(), x.shape().end());
    Tensor xb(bshape, x.values());

    LossTarget t = target;
    if (t.kind != LossKind::CrossEntropyHard && t.values.rank() == 1) {
        t.values = Tensor({1, t.values.size()}, t.values.values());
    }
    GradientBundle bundle = batch_gradients(spec, params, xb, t, wrt, loss_out);
    if (bundle.input_grad) {
        bundle.input_grad = Tensor(x.shape(), bundle.input_grad->values());
    }
    return bundle;
}

void Optimizer::step(ParamSet& params, const ParamSet& grads) {
    if (grads.size() != params.size()) {
        throw ShapeError("optimizer: gradient set size mismatch");
    }
    if (cfg_.method == OptMethod::Adam && t_ == 0) {
        for (const ParamSet::Entry& e : params.entries()) {
            m_.add(e.name, Tensor::zeros(e.tensor.shape()));
            v_.add(e.name, Tensor::zeros(e.tensor.shape()));
        }
    }
    ++t_;

    for (std::size_t pi = 0; pi < params.entries().size(); ++pi) {
        Tensor& p = params.entries()[pi].tensor;
        const ParamSet::Entry& ge = grads.entries()[pi];
        if (ge.name != params.entries()[pi].name || !ge.tensor.same_shape(p)) {
            throw ShapeError("optimizer: gradient '" + ge.name + "' does not mirror parameter '" +
                             params.entries()[pi].name + "'");
        }
        const Tensor& gt = ge.tensor;

        if (cfg_.method == OptMethod::Sgd) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                double g = static_cast<double>(gt[i]) + cfg_.weight_decay * static_cast<double>(p[i]);
                double np = static_cast<double>(p[i]) - cfg_.lr * g;
                if (!std::isfinite(np)) {
                    throw NumericError("non-finite update in '" + ge.name + "'");
                }
                p[i] = static_cast<float>(np);
            }
        } else {
            Tensor& m = m_.entries()[pi].tensor;
            Tensor& v = v_.entries()[pi].tensor;
            double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
            double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            for (std::size_t i = 0; i < p.size(); ++i) {
                double g = static_cast<double>(gt[i]) + cfg_.weight_decay * static_cast<double>(p[i]);
                double mn = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
                double vn = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
                m[i] = static_cast<float>(mn);
                v[i] = static_cast<float>(vn);
                double update = cfg_.lr * (mn / bc1) / (std::sqrt(vn / bc2) + cfg_.eps);
                double np = static_cast<double>(p[i]) - update;
                if (!std::isfinite(np)) {
                    throw NumericError("non-finite update in '" + ge.name + "'");
                }
                p[i] = static_cast<float>(np);
            }
        }
    }
}

} // namespace trait::nn

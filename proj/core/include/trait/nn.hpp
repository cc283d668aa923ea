#pragma once

#include "trait/graph.hpp"
#include "trait/model.hpp"
#include "trait/tensor.hpp"

#include <cstdint>
#include <vector>

namespace trait::nn {

// Clamp floor applied to probabilities before ln(); keeps losses finite
// without altering their ordering.
inline constexpr double kLogFloor = 1e-12;

// Numerically stabilized softmax of a rank-1 logits vector.
Tensor softmax(const Tensor& logits);

// -sum_c p_c ln(max(q_c, kLogFloor)), accumulated in 64-bit.
double cross_entropy_soft(const Tensor& target_probs, const Tensor& predicted_probs);

// Mean of squared element differences, accumulated in 64-bit.
double mse_loss(const Tensor& target, const Tensor& predicted);

// Entropy H(p) = CE(p, p), through the same clamped path.
double entropy(const Tensor& probs);

enum class LossKind { CrossEntropyHard, CrossEntropySoft, Mse };

// Loss target for a batch: labels for hard cross-entropy, a (B,C) probability
// matrix for soft cross-entropy, a (B,out) value matrix for MSE.
struct LossTarget {
    LossKind kind;
    std::vector<int> labels;
    Tensor values;

    static LossTarget hard(std::vector<int> labels);
    static LossTarget soft(Tensor probs);
    static LossTarget mse(Tensor targets);
};

enum class Wrt { Params, Input, Both };

// Single-example forward pass: returns logits (classification) or the raw
// regression output. Deterministic for fixed inputs.
Tensor forward(const ModelSpec& spec, const ParamSet& params, const Tensor& x);

// Batched forward over X with shape [B] + spec.input_shape; returns (B,out).
Tensor forward_batch(const ModelSpec& spec, const ParamSet& params, const Tensor& X);

// Reverse-mode gradients of the scalar loss for a single example. loss_out,
// when non-null, receives the loss value from the same pass.
GradientBundle gradients(const ModelSpec& spec, const ParamSet& params, const Tensor& x,
                         const LossTarget& target, Wrt wrt, double* loss_out = nullptr);

// Batched variant used by the trainer; loss is the batch mean.
GradientBundle batch_gradients(const ModelSpec& spec, const ParamSet& params, const Tensor& X,
                               const LossTarget& target, Wrt wrt, double* loss_out = nullptr);

// --- graph building blocks shared by the trainer and the attack crafting ---

// Adds the model's forward computation on top of an existing batch input node
// (shape [B] + input_shape). When param_ids is non-null the parameters enter
// as differentiable variables and their node ids are appended in ParamSet
// order; otherwise they enter as constants.
Graph::Id build_forward(Graph& g, const ModelSpec& spec, const ParamSet& params, Graph::Id input,
                        std::vector<Graph::Id>* param_ids = nullptr);

// Mean loss node over the batch for the given target.
Graph::Id build_loss(Graph& g, Graph::Id output, const LossTarget& target);

struct LstmState {
    Graph::Id h;
    Graph::Id c;
};

// One LSTM cell step. x_t (B,in), state tensors (B,hidden); weights
// wx (in,4h), wh (h,4h), bias (4h) with gate order input|forget|cell|output.
LstmState lstm_cell(Graph& g, Graph::Id x_t, LstmState state, Graph::Id wx, Graph::Id wh,
                    Graph::Id bias);

// --- optimizers ---

enum class OptMethod { Sgd, Adam };

struct OptimizerConfig {
    OptMethod method = OptMethod::Sgd;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Stateful optimizer. SGD: p <- p - lr*(g + wd*p). Adam: bias-corrected
// moments on g + wd*p. Updates are computed in 64-bit and stored as 32-bit.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    void step(ParamSet& params, const ParamSet& grads);

    const OptimizerConfig& config() const { return cfg_; }
    long step_count() const { return t_; }

private:
    OptimizerConfig cfg_;
    ParamSet m_;
    ParamSet v_;
    long t_ = 0;
};

} // namespace trait::nn

#pragma once

#include "trait/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace trait::nn {

// Reverse-mode autodiff tape over Tensor-granularity operations. Values are
// stored as 32-bit reals; every inner product and every gradient accumulator
// runs in 64-bit before results are narrowed. Nodes are appended in
// topological order, so the backward sweep is a reverse iteration.
//
// Batch convention: rank-2 activations are (batch, features); conv tensors
// are (batch, channels, H, W).
class Graph {
public:
    using Id = int;

    Id constant(Tensor t);
    Id variable(Tensor t);

    // (M,K) x (K,N) -> (M,N)
    Id matmul(Id a, Id b);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    // (B,N) + (N,) broadcast over rows
    Id add_rowwise(Id a, Id bias);
    Id scale(Id a, double s);

    Id relu(Id a);
    Id sigmoid(Id a);
    Id tanh_op(Id a);
    // Row-stabilized softmax over the last axis of a rank-1 or rank-2 tensor.
    Id softmax_rows(Id a);
    // ln(max(x, floor)) elementwise; gradient is cut where the clamp engages.
    Id log_clamped(Id a, double floor_value);

    Id sum_all(Id a);
    Id mean_all(Id a);

    // rank-2 column window [c0, c1)
    Id slice_cols(Id a, std::size_t c0, std::size_t c1);
    Id concat_cols(Id a, Id b);
    Id reshape(Id a, std::vector<std::size_t> shape);

    // x (B,Cin,H,W), w (Cout,Cin,k,k), bias (Cout); stride 1, valid padding.
    Id conv2d(Id x, Id w, Id bias);

    // Elementwise multiply by a fixed mask (inverted-dropout scaling baked in).
    Id dropout_mask(Id a, std::vector<float> mask);

    const Tensor& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    double scalar(Id id) const;

    // Seeds d(root) = 1 and sweeps the tape. root must be a scalar node.
    void backward(Id root);

    // 64-bit accumulated gradient of a node after backward().
    const std::vector<double>& grad(Id id) const;
    // Same gradient narrowed to a 32-bit tensor with the node's shape.
    Tensor grad_tensor(Id id) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        std::function<void()> backward;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;

    Id emit(Tensor value, bool requires_grad, std::function<void()> backward);
    std::vector<double>& grad_buf(Id id);
    bool rg(Id id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    const Tensor& val(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
};

} // namespace trait::nn

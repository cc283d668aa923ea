#pragma once

#include "trait/rng.hpp"
#include "trait/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trait::nn {

enum class TaskKind { Classification, Regression };

enum class LayerKind { Dense, Conv2d, Lstm, Relu, Flatten };

// Layer descriptor. Parameter meaning by kind:
//   dense(a=in, b=out)
//   conv2d(a=in_channels, b=out_channels, k=kernel)  stride 1, valid padding
//   lstm(a=input_size, b=hidden)                     consumes (T, a), emits final hidden (b)
//   relu, flatten                                    no parameters
struct LayerDesc {
    LayerKind kind;
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t k = 0;

    std::string to_string() const;
    bool operator==(const LayerDesc& other) const = default;
};

// Architecture + task description. Serializes to a compact one-line text form
// that is embedded into checkpoint files:
//   spec-v1;task=classification;input=2;layers=dense(2,16),relu,dense(16,4)
struct ModelSpec {
    TaskKind task = TaskKind::Classification;
    std::vector<std::size_t> input_shape;
    std::vector<LayerDesc> layers;

    // Validates adjacency of layer extents; throws ShapeError naming the first
    // offending layer. Returns the per-example output shape.
    std::vector<std::size_t> validate() const;

    std::size_t output_dim() const;
    std::size_t input_size() const { return shape_product(input_shape); }

    std::string serialize() const;
    static ModelSpec parse(const std::string& text);

    bool operator==(const ModelSpec& other) const = default;
};

// Named parameter tensors with deterministic (insertion) iteration order.
class ParamSet {
public:
    void add(std::string name, Tensor t);
    bool has(const std::string& name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t total_elements() const;

    struct Entry {
        std::string name;
        Tensor tensor;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    bool operator==(const ParamSet& other) const;

private:
    std::vector<Entry> entries_;
};

// Parameter gradients (same keys/shapes as the ParamSet they mirror) plus an
// optional gradient with respect to the input example.
struct GradientBundle {
    ParamSet param_grads;
    std::optional<Tensor> input_grad;
};

// Seeded initialization: Kaiming-uniform for layers feeding a relu, Glorot
// uniform elsewhere; biases zero.
ParamSet init_params(const ModelSpec& spec, std::uint64_t seed);

// Structural check that params carry exactly the tensors the spec requires.
void check_params(const ModelSpec& spec, const ParamSet& params);

// Canonical parameter names, in order, for a spec.
std::vector<std::string> param_names(const ModelSpec& spec);

} // namespace trait::nn

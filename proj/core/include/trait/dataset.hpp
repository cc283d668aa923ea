#pragma once

#include "trait/model.hpp"
#include "trait/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trait::data {

enum class Split { Train, Val, Test };

struct Example {
    Tensor features;
    int label = 0;   // classification
    Tensor target;   // regression
};

// Sizes and shape knobs for the synthetic dataset families. File-backed
// datasets ignore everything except the split fractions.
struct SynthConfig {
    std::size_t train_n = 2000;
    std::size_t val_n = 1000;
    std::size_t test_n = 1000;
    std::size_t dim = 2;          // blobs feature dimension
    double blob_std = 0.08;
    double noise = 0.04;          // moons/rings/sine jitter
    std::size_t window = 3;       // sine-forecast input steps
};

struct DatasetHandle {
    std::string id;
    nn::TaskKind task = nn::TaskKind::Classification;
    std::vector<std::size_t> feature_shape;
    std::size_t num_classes = 0; // classification only
    std::vector<Example> examples;
    std::vector<Split> split_tags; // parallel to examples

    std::vector<std::size_t> indices(Split split) const;
    std::size_t count(Split split) const { return indices(split).size(); }
};

// id grammar: blobs-<k> | moons | rings | sine-forecast | idx-file:<prefix> |
// csv-file:<path>. idx expects <prefix>-images.idx and <prefix>-labels.idx
// (MNIST magics 0x00000803 / 0x00000801). Feature values land in [0,1];
// splits and shuffles are functions of (id, seed) only.
DatasetHandle load_or_synthesize_dataset(const std::string& id, std::uint64_t seed,
                                         const SynthConfig& cfg = {});

// Stacks examples[idx] into a batch tensor of shape [n] + feature_shape.
Tensor stack_features(const DatasetHandle& data, const std::vector<std::size_t>& idx);

// CSV row format shared with the adversarial-example dumps:
//   label,f1,...,fd   (header optional on read, written on write)
void write_example_csv(const std::string& path, const Example& ex, nn::TaskKind task);

} // namespace trait::data

#pragma once

#include "trait/checkpoint.hpp"
#include "trait/dataset.hpp"
#include "trait/nn.hpp"

#include <cstdint>
#include <string>

namespace trait::train {

struct TrainConfig {
    std::size_t epochs = 30; // K >= 2
    std::size_t batch_size = 32;
    nn::OptimizerConfig optimizer;
    std::uint64_t seed = 42;
    std::size_t target_index = 0;   // 0 -> K
    std::string checkpoint_dir;     // empty -> keep in memory only
};

// Trains for K epochs, snapshotting parameters after the final optimizer step
// of each epoch. Fully deterministic under (config, data): fixed init, fixed
// per-epoch shuffles. Throws NumericError naming epoch/batch if the loss goes
// non-finite.
CheckpointSet train_with_checkpoints(const TrainConfig& config, const data::DatasetHandle& data,
                                     const nn::ModelSpec& spec);

// Classification: argmax accuracy. Regression: mean squared error over the split.
double evaluate_model(const nn::ModelSpec& spec, const nn::ParamSet& params,
                      const data::DatasetHandle& data, data::Split split);

} // namespace trait::train

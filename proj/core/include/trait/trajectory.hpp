#pragma once

#include "trait/checkpoint.hpp"
#include "trait/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trait::traj {

// How the per-epoch synthetic loss pairs model outputs:
//   TargetAnchored: loss(f_target(x), f_k(x)) for every non-target epoch k
//   Consecutive:    loss(f_{k+1}(x), f_k(x)) for k = 1..K-1
// Classification uses soft cross-entropy, regression uses MSE.
enum class SynthesisMode { TargetAnchored, Consecutive };

std::string to_string(SynthesisMode mode);
SynthesisMode synthesis_mode_from_string(const std::string& s);

// Epoch-ordered vector of K-1 synthetic-loss values for one example.
struct LossTrajectory {
    std::vector<float> values;
    std::string example_id;
    SynthesisMode mode = SynthesisMode::TargetAnchored;
    nn::TaskKind task = nn::TaskKind::Classification;
    std::size_t n_used = 0; // == values.size()
    float label = 0.0f;     // class index or regression target, for reports
};

// C x (K-1) matrix of per-epoch softmax vectors (column-stochastic).
struct ImprintMatrix {
    std::size_t num_classes = 0;
    std::size_t num_epochs = 0;
    std::vector<float> probs; // row-major: probs[c * num_epochs + k]
    std::string example_id;
    float label = 0.0f;
    std::size_t n_used = 0; // == num_epochs

    float at(std::size_t c, std::size_t k) const { return probs[c * num_epochs + k]; }
};

// Seeded sample of n example ids from the split, keeping only examples the
// target model classifies correctly (regression examples all qualify).
// Throws InsufficientDataError naming the deficit when fewer than n qualify.
std::vector<std::size_t> select_benign_pool(const train::CheckpointSet& checkpoints,
                                            const data::DatasetHandle& data, data::Split split,
                                            std::size_t n, std::uint64_t seed);

LossTrajectory extract_trajectory(const train::CheckpointSet& checkpoints, const Tensor& x,
                                  SynthesisMode mode, const std::string& example_id = "");

ImprintMatrix extract_softmax_imprint(const train::CheckpointSet& checkpoints, const Tensor& x,
                                      const std::string& example_id = "");

LossTrajectory truncate_epochs(const LossTrajectory& t, std::size_t first_n);
ImprintMatrix truncate_epochs(const ImprintMatrix& m, std::size_t first_n);

// Extracts trajectories for inputs[i] (order preserved); results are bitwise
// identical to sequential extraction for any parallelism level.
std::vector<LossTrajectory> batch_extract(const train::CheckpointSet& checkpoints,
                                          const std::vector<Tensor>& inputs, SynthesisMode mode,
                                          std::size_t parallelism,
                                          const std::vector<std::string>& ids = {},
                                          const std::vector<float>& labels = {});

// CSV: header example_id,label,mode,n_used,l_001..l_NNN; 9 significant digits.
void write_trajectories_csv(const std::string& path, const std::vector<LossTrajectory>& ts);
std::vector<LossTrajectory> read_trajectories_csv(const std::string& path);

// CSV: header example_id,label,mode,n_used,c{c}_e{k}... (epoch-major groups).
void write_imprints_csv(const std::string& path, const std::vector<ImprintMatrix>& ms);

} // namespace trait::traj

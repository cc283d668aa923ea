#pragma once

#include "trait/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trait::train {

// TRCK tensor container, little-endian:
//   magic "TRCK" | u32 version | u32 descriptor length + UTF-8 descriptor |
//   u32 epoch index | u32 tensor count |
//   per tensor: u32 name length + UTF-8, u32 rank, u32 extents[rank], f32 data.
inline constexpr std::uint32_t kTrckVersion = 1;

struct TrckMeta {
    std::string descriptor;
    std::uint32_t epoch = 0;
};

void save_trck(const std::string& path, const std::string& descriptor, std::uint32_t epoch,
               const nn::ParamSet& tensors);
std::pair<nn::ParamSet, TrckMeta> load_trck(const std::string& path);

// Ordered sequence of per-epoch parameter snapshots plus training metadata.
// Epoch indices are 1..K, gap-free; the target model defaults to epoch K.
struct CheckpointSet {
    nn::ModelSpec spec;
    std::vector<nn::ParamSet> epochs; // epochs[k-1] is the epoch-k snapshot
    std::vector<double> train_loss;   // per epoch
    std::vector<double> val_metric;   // per epoch (accuracy or MSE)
    std::size_t target_index = 0;     // 1-based; 0 means K
    std::uint64_t seed = 0;
    std::string dataset_id;

    std::size_t K() const { return epochs.size(); }
    std::size_t resolved_target() const { return target_index == 0 ? K() : target_index; }
    const nn::ParamSet& at_epoch(std::size_t k) const; // 1-based
    const nn::ParamSet& target() const { return at_epoch(resolved_target()); }

    void validate() const;
};

// Directory layout: ckpt_0001.trck .. ckpt_KKKK.trck + manifest.json
void save_checkpoint_set(const std::string& dir, const CheckpointSet& set);
CheckpointSet load_checkpoint_set(const std::string& dir);

} // namespace trait::train

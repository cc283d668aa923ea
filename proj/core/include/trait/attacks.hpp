#pragma once

#include "trait/checkpoint.hpp"
#include "trait/dataset.hpp"
#include "trait/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trait::attack {

enum class Method { Fgsm, Bim, Pgd, Boundary, Adaptive };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct AttackSpec {
    Method method = Method::Fgsm;
    double epsilon = 8.0 / 255.0; // L-inf budget in feature scale
    double alpha = 0.0;           // step size; 0 picks epsilon/4
    std::size_t steps = 10;
    bool targeted = false;
    int target_label = 0;
    double target_value = 0.0;     // targeted regression
    std::uint64_t seed = 0;
    double regression_band = 0.04; // success: prediction displaced beyond this band
    std::size_t probe_budget = 500; // boundary start search
    bool record_iterates = false;   // fill AttackResult::iterates (tests/analysis)

    double resolved_alpha() const { return alpha > 0.0 ? alpha : epsilon / 4.0; }
};

struct AdaptiveConfig {
    double lambda = 1.0;
    double tau = 0.5; // raw trajectory-distance acceptance threshold
    enum class ImSource { Defender, Surrogate };
    ImSource im_source = ImSource::Defender;
    std::size_t inner_iterations = 0; // 0 -> AttackSpec.steps
    traj::SynthesisMode mode = traj::SynthesisMode::TargetAnchored;
};

struct AttackResult {
    Tensor x_adv;
    bool success = false;
    double linf = 0.0;
    double l2 = 0.0;
    double objective = 0.0;           // final combined objective (white-box)
    double trajectory_dist_raw = -1.0;  // adaptive: raw distance to benign trajectory
    double trajectory_dist_norm = -1.0; // adaptive: min-max normalized (probe-pass stats)
    std::size_t queries = 0;            // boundary: label queries spent
    std::vector<Tensor> iterates;       // post-step iterates when record_iterates is set
};

// --- white-box attacks against a single model ---

// One signed-gradient step: clip_[0,1](x + eps * sign(grad_x L(x,y))).
Tensor fgsm(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x, int y,
            double epsilon);

// Iterated signed-gradient with projection onto the eps-ball intersected with
// [0,1]^d; the returned point is the iterate with the best adversarial loss.
// method Bim disables the random start, Pgd enables it.
AttackResult pgd_attack(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x,
                        int y, const AttackSpec& spec_a);

// Regression variants: y is the benign prediction (untargeted, displaced away)
// or AttackSpec.target_value (targeted).
AttackResult pgd_attack_regression(const nn::ModelSpec& spec, const nn::ParamSet& params,
                                   const Tensor& x, const AttackSpec& spec_a);

// --- decision-based boundary attack (label queries only) ---

AttackResult boundary_attack(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x,
                             int y, std::size_t steps, std::uint64_t seed,
                             std::size_t probe_budget = 500);

// --- trajectory distances (Eq: sum of squared per-epoch differences) ---

double trajectory_distance_raw(const traj::LossTrajectory& a, const traj::LossTrajectory& b);

// Min-max normalization over a batch of raw distances; all outputs in [0,1].
// Throws DegenerateNormalizationError when max == min.
std::vector<double> minmax_normalize(const std::vector<double>& raw);

// --- adaptive attack: PGD on adv-loss + lambda * normalized trajectory distance ---
//
// lambda == 0 degenerates to pgd_attack bit-for-bit. With lambda > 0 a probe
// pass (the lambda=0 iterates) supplies the min/max statistics that scale the
// distance term, then the main pass minimizes the combined objective with
// gradients flowing through every intermediate model. An iterate is kept only
// if the combined objective decreases; success requires misclassification and
// raw trajectory distance <= tau.
AttackResult adaptive_attack(const train::CheckpointSet& checkpoints, const Tensor& x, int y,
                             const AttackSpec& spec_a, const AdaptiveConfig& cfg);

// --- batch persistence: adv_manifest.json + per-example CSV feature files ---

struct CraftedExample {
    std::string id;
    Tensor x_adv;
    bool success = false;
    int true_label = 0;
    int adv_pred = 0;
    float reg_target = 0.0f;
    float reg_pred = 0.0f;
    double linf = 0.0;
    double l2 = 0.0;
    double trajectory_dist_raw = -1.0;
    double trajectory_dist_norm = -1.0;
};

void save_attack_batch(const std::string& dir, const AttackSpec& spec_a,
                       const std::vector<CraftedExample>& crafted, nn::TaskKind task);

struct AttackBatch {
    AttackSpec spec;
    nn::TaskKind task = nn::TaskKind::Classification;
    std::vector<CraftedExample> crafted;
};
AttackBatch load_attack_batch(const std::string& dir);

} // namespace trait::attack

#include "trait/attacks.hpp"

#include "trait/errors.hpp"
#include "trait/nn.hpp"
#include "trait/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace trait::attack {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Graph;

std::string to_string(Method m) {
    switch (m) {
        case Method::Fgsm: return "fgsm";
        case Method::Bim: return "bim";
        case Method::Pgd: return "pgd";
        case Method::Boundary: return "boundary";
        case Method::Adaptive: return "adaptive";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "fgsm") return Method::Fgsm;
    if (s == "bim") return Method::Bim;
    if (s == "pgd") return Method::Pgd;
    if (s == "boundary") return Method::Boundary;
    if (s == "adaptive") return Method::Adaptive;
    throw ConfigError("unknown attack method '" + s + "'");
}

namespace {

// Scalar objective the iterative driver MINIMIZES. The adversarial part is
// sign * loss(target model); the optional trajectory part is
// lambda * dist_scale * sum_k (L_k(x') - benign_k)^2 + offset.
struct Objective {
    const nn::ModelSpec* spec = nullptr;
    const nn::ParamSet* target_params = nullptr;
    nn::LossTarget adv_target{nn::LossKind::CrossEntropyHard, {0}, Tensor()};
    double sign = -1.0;

    double lambda = 0.0;
    const train::CheckpointSet* cks = nullptr;
    traj::SynthesisMode mode = traj::SynthesisMode::TargetAnchored;
    std::vector<float> benign_traj;
    double dist_scale = 1.0;
    double offset = 0.0;
};

Tensor to_batch1(const Tensor& x) {
    std::vector<std::size_t> shape{1};
    shape.insert(shape.end(), x.shape().begin(), x.shape().end());
    return Tensor(shape, x.values());
}

// Builds J at x; returns its value and optionally d J / d x.
double eval_objective(const Objective& o, const Tensor& x, Tensor* grad_out) {
    Graph g;
    Tensor xb = to_batch1(x);
    Graph::Id input = grad_out ? g.variable(xb) : g.constant(xb);

    Graph::Id out_target = nn::build_forward(g, *o.spec, *o.target_params, input);
    Graph::Id j = g.scale(nn::build_loss(g, out_target, o.adv_target), o.sign);

    if (o.lambda > 0.0) {
        const train::CheckpointSet& cks = *o.cks;
        bool classification = cks.spec.task == nn::TaskKind::Classification;

        // per-epoch output (softmax for classification) nodes, built once each
        std::vector<Graph::Id> probs(cks.K() + 1, -1);
        auto epoch_output = [&](std::size_t k) {
            if (probs[k] < 0) {
                Graph::Id out_k = nn::build_forward(g, cks.spec, cks.at_epoch(k), input);
                probs[k] = classification ? g.softmax_rows(out_k) : out_k;
            }
            return probs[k];
        };

        std::size_t tgt = cks.resolved_target();
        std::vector<std::size_t> ks;
        if (o.mode == traj::SynthesisMode::TargetAnchored) {
            for (std::size_t k = 1; k <= cks.K(); ++k) {
                if (k != tgt) ks.push_back(k);
            }
        } else {
            for (std::size_t k = 1; k < cks.K(); ++k) ks.push_back(k);
        }
        if (ks.size() != o.benign_traj.size()) {
            throw ShapeError("adaptive: benign trajectory length " +
                             std::to_string(o.benign_traj.size()) + " != " +
                             std::to_string(ks.size()));
        }

        Graph::Id dist = -1;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            std::size_t k = ks[i];
            std::size_t anchor = o.mode == traj::SynthesisMode::TargetAnchored ? tgt : k + 1;
            Graph::Id lk;
            if (classification) {
                Graph::Id weighted =
                    g.mul(epoch_output(anchor), g.log_clamped(epoch_output(k), nn::kLogFloor));
                lk = g.scale(g.sum_all(weighted), -1.0);
            } else {
                Graph::Id d = g.sub(epoch_output(anchor), epoch_output(k));
                lk = g.mean_all(g.mul(d, d));
            }
            Graph::Id dk = g.sub(lk, g.constant(Tensor::scalar(o.benign_traj[i])));
            Graph::Id term = g.mul(dk, dk);
            dist = dist < 0 ? term : g.add(dist, term);
        }
        j = g.add(j, g.scale(dist, o.lambda * o.dist_scale));
    }

    double value = g.scalar(j) + o.offset;
    if (!std::isfinite(value)) throw NumericError("non-finite attack objective");
    if (grad_out) {
        g.backward(j);
        Tensor gt = g.grad_tensor(input);
        gt.require_finite("attack objective gradient");
        *grad_out = Tensor(x.shape(), gt.values());
    }
    return value;
}

double sign_of(float g) { return g > 0.0f ? 1.0 : (g < 0.0f ? -1.0 : 0.0); }

struct DriverOutcome {
    Tensor best_x;
    double best_j = 0.0;
    std::vector<Tensor> candidates; // post-step iterates, in order
};

// Shared PGD-style loop. Each post-step iterate is projected into the
// eps-ball around x0 intersected with [0,1]^d; the kept ("accepted") result
// is the candidate with the lowest objective so far, so the accepted-objective
// sequence is non-increasing by construction.
DriverOutcome run_driver(const Objective& o, const Tensor& x0, const AttackSpec& sp,
                         std::size_t steps, bool random_start, bool keep_candidates) {
    const double eps = sp.epsilon;
    const double alpha = sp.resolved_alpha();
    if (eps < 0.0) throw ConfigError("attack: epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack: iterative methods need steps >= 1");

    auto project = [&](double v, std::size_t i) {
        double lo = std::max(0.0, static_cast<double>(x0[i]) - eps);
        double hi = std::min(1.0, static_cast<double>(x0[i]) + eps);
        return static_cast<float>(std::min(hi, std::max(lo, v)));
    };

    Tensor cur = x0;
    if (random_start) {
        Rng rng(derive_seed(sp.seed, "pgd-start"));
        for (std::size_t i = 0; i < cur.size(); ++i) {
            cur[i] = project(static_cast<double>(x0[i]) + rng.uniform(-eps, eps), i);
        }
    }

    DriverOutcome out;
    double best_j = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor grad;
        eval_objective(o, cur, &grad);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            cur[i] = project(static_cast<double>(cur[i]) - alpha * sign_of(grad[i]), i);
        }
        double j = eval_objective(o, cur, nullptr);
        if (j < best_j) {
            best_j = j;
            out.best_x = cur;
        }
        if (keep_candidates) out.candidates.push_back(cur);
    }
    out.best_j = best_j;
    return out;
}

Objective classification_objective(const nn::ModelSpec& spec, const nn::ParamSet& params, int y,
                                   const AttackSpec& sp) {
    Objective o;
    o.spec = &spec;
    o.target_params = &params;
    if (sp.targeted) {
        o.adv_target = nn::LossTarget::hard({sp.target_label});
        o.sign = 1.0; // descend toward the target label
    } else {
        o.adv_target = nn::LossTarget::hard({y});
        o.sign = -1.0; // ascend the true-label loss
    }
    return o;
}

int predict_class(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x) {
    Tensor out = nn::forward(spec, params, x);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < out.size(); ++j) {
        if (out[j] > out[arg]) arg = j;
    }
    return static_cast<int>(arg);
}

void fill_norms(AttackResult& r, const Tensor& x) {
    double linf = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = static_cast<double>(r.x_adv[i]) - static_cast<double>(x[i]);
        linf = std::max(linf, std::fabs(d));
        l2 += d * d;
    }
    r.linf = linf;
    r.l2 = std::sqrt(l2);
}

} // namespace

Tensor fgsm(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x, int y,
            double epsilon) {
    AttackSpec sp;
    sp.method = Method::Fgsm;
    sp.epsilon = epsilon;
    sp.alpha = epsilon;
    sp.steps = 1;
    Objective o = classification_objective(spec, params, y, sp);
    return run_driver(o, x, sp, 1, false, false).best_x;
}

AttackResult pgd_attack(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x,
                        int y, const AttackSpec& sp) {
    Objective o = classification_objective(spec, params, y, sp);
    bool random_start = sp.method == Method::Pgd;
    DriverOutcome d = run_driver(o, x, sp, sp.steps, random_start, sp.record_iterates);

    AttackResult r;
    r.x_adv = std::move(d.best_x);
    r.objective = d.best_j;
    r.iterates = std::move(d.candidates);
    int pred = predict_class(spec, params, r.x_adv);
    r.success = sp.targeted ? pred == sp.target_label : pred != y;
    fill_norms(r, x);
    return r;
}

AttackResult pgd_attack_regression(const nn::ModelSpec& spec, const nn::ParamSet& params,
                                   const Tensor& x, const AttackSpec& sp) {
    if (spec.task != nn::TaskKind::Regression) {
        throw ConfigError("pgd_attack_regression requires a regression model");
    }
    Tensor benign_pred = nn::forward(spec, params, x);
    Objective o;
    o.spec = &spec;
    o.target_params = &params;
    if (sp.targeted) {
        Tensor tv(benign_pred.shape());
        for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = static_cast<float>(sp.target_value);
        o.adv_target = nn::LossTarget::mse(std::move(tv));
        o.sign = 1.0;
    } else {
        o.adv_target = nn::LossTarget::mse(benign_pred);
        o.sign = -1.0; // push the prediction away from the benign one
    }

    bool random_start = sp.method == Method::Pgd;
    DriverOutcome d = run_driver(o, x, sp, sp.steps, random_start, sp.record_iterates);

    AttackResult r;
    r.x_adv = std::move(d.best_x);
    r.objective = d.best_j;
    r.iterates = std::move(d.candidates);
    Tensor pred = nn::forward(spec, params, r.x_adv);
    double disp = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double delta = sp.targeted
                           ? static_cast<double>(pred[i]) - sp.target_value
                           : static_cast<double>(pred[i]) - static_cast<double>(benign_pred[i]);
        disp += delta * delta;
    }
    disp = std::sqrt(disp);
    r.success = sp.targeted ? disp <= sp.regression_band : disp > sp.regression_band;
    fill_norms(r, x);
    return r;
}

AttackResult boundary_attack(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x,
                             int y, std::size_t steps, std::uint64_t seed,
                             std::size_t probe_budget) {
    Rng rng(derive_seed(seed, "boundary"));
    AttackResult r;
    r.x_adv = x;

    auto is_adversarial = [&](const Tensor& z) {
        ++r.queries;
        return predict_class(spec, params, z) != y;
    };

    // random probes for a misclassified starting point
    Tensor cur(x.shape());
    bool found = false;
    for (std::size_t p = 0; p < probe_budget; ++p) {
        for (std::size_t i = 0; i < cur.size(); ++i) {
            cur[i] = static_cast<float>(rng.uniform());
        }
        if (is_adversarial(cur)) {
            found = true;
            break;
        }
    }
    if (!found) {
        r.success = false; // explicit failure result: no adversarial start inside the budget
        return r;
    }

    auto dist_to = [&](const Tensor& z) {
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            double d = static_cast<double>(z[i]) - static_cast<double>(x[i]);
            acc += d * d;
        }
        return std::sqrt(acc);
    };

    double orth_step = 0.1;
    double source_step = 0.1;
    double cur_dist = dist_to(cur);
    std::size_t reject_streak = 0;
    std::size_t accept_streak = 0;

    for (std::size_t t = 0; t < steps; ++t) {
        // orthogonal perturbation on the sphere around x, then a step toward x
        std::size_t n = cur.size();
        std::vector<double> dir(n);
        std::vector<double> radial(n);
        double rnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            radial[i] = static_cast<double>(cur[i]) - static_cast<double>(x[i]);
            rnorm += radial[i] * radial[i];
            dir[i] = rng.normal();
        }
        rnorm = std::sqrt(std::max(rnorm, 1e-30));
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += dir[i] * radial[i];
        double dnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dir[i] -= dot * radial[i] / (rnorm * rnorm);
            dnorm += dir[i] * dir[i];
        }
        dnorm = std::sqrt(std::max(dnorm, 1e-30));

        Tensor cand(cur.shape());
        for (std::size_t i = 0; i < n; ++i) {
            double v = static_cast<double>(cur[i]) + orth_step * cur_dist * dir[i] / dnorm;
            v += source_step * (static_cast<double>(x[i]) - v);
            cand[i] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
        }

        double cand_dist = dist_to(cand);
        if (cand_dist <= cur_dist && is_adversarial(cand)) {
            cur = cand;
            cur_dist = cand_dist;
            reject_streak = 0;
            if (++accept_streak >= 10) {
                orth_step = std::min(0.5, orth_step * 1.2);
                source_step = std::min(0.5, source_step * 1.2);
                accept_streak = 0;
            }
        } else {
            accept_streak = 0;
            if (++reject_streak >= 10) {
                orth_step /= 2.0;
                source_step /= 2.0;
                reject_streak = 0;
            }
        }
    }

    r.x_adv = cur;
    r.success = true;
    fill_norms(r, x);
    return r;
}

double trajectory_distance_raw(const traj::LossTrajectory& a, const traj::LossTrajectory& b) {
    if (a.values.size() != b.values.size()) {
        throw ShapeError("trajectory_distance: lengths " + std::to_string(a.values.size()) +
                         " vs " + std::to_string(b.values.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
        acc += d * d;
    }
    return acc;
}

std::vector<double> minmax_normalize(const std::vector<double>& raw) {
    if (raw.empty()) throw ConfigError("minmax_normalize: empty batch");
    double lo = raw[0], hi = raw[0];
    for (double v : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) {
        throw DegenerateNormalizationError("minmax_normalize: max == min (" + std::to_string(hi) +
                                           ")");
    }
    std::vector<double> out;
    out.reserve(raw.size());
    for (double v : raw) out.push_back((v - lo) / (hi - lo));
    return out;
}

AttackResult adaptive_attack(const train::CheckpointSet& checkpoints, const Tensor& x, int y,
                             const AttackSpec& sp, const AdaptiveConfig& cfg) {
    if (cfg.lambda < 0.0) throw ConfigError("adaptive: lambda must be >= 0");
    if (cfg.tau <= 0.0) throw ConfigError("adaptive: tau must be > 0");
    checkpoints.validate();
    const nn::ModelSpec& spec = checkpoints.spec;
    const nn::ParamSet& target = checkpoints.target();
    std::size_t steps = cfg.inner_iterations > 0 ? cfg.inner_iterations : sp.steps;

    traj::LossTrajectory benign = traj::extract_trajectory(checkpoints, x, cfg.mode);

    Objective o = classification_objective(spec, target, y, sp);
    bool random_start = sp.method != Method::Bim; // mirrors pgd unless BIM-style requested

    double dmin = 0.0, dmax = 0.0;
    bool have_stats = false;
    if (cfg.lambda > 0.0) {
        // probe pass: the lambda=0 iterates supply Eq-style min/max statistics
        DriverOutcome probe = run_driver(o, x, sp, steps, random_start, true);
        std::vector<double> dists;
        dists.reserve(probe.candidates.size());
        for (const Tensor& cand : probe.candidates) {
            traj::LossTrajectory t = traj::extract_trajectory(checkpoints, cand, cfg.mode);
            dists.push_back(trajectory_distance_raw(t, benign));
        }
        dmin = *std::min_element(dists.begin(), dists.end());
        dmax = *std::max_element(dists.begin(), dists.end());
        have_stats = dmax > dmin;

        o.lambda = cfg.lambda;
        o.cks = &checkpoints;
        o.mode = cfg.mode;
        o.benign_traj = benign.values;
        o.dist_scale = have_stats ? 1.0 / (dmax - dmin) : 1.0;
        o.offset = have_stats ? -cfg.lambda * dmin / (dmax - dmin) : 0.0;
    }

    DriverOutcome d = run_driver(o, x, sp, steps, random_start, sp.record_iterates);

    AttackResult r;
    r.x_adv = std::move(d.best_x);
    r.objective = d.best_j;
    r.iterates = std::move(d.candidates);
    traj::LossTrajectory adv_traj = traj::extract_trajectory(checkpoints, r.x_adv, cfg.mode);
    r.trajectory_dist_raw = trajectory_distance_raw(adv_traj, benign);
    r.trajectory_dist_norm =
        have_stats ? (r.trajectory_dist_raw - dmin) / (dmax - dmin) : -1.0;

    int pred = predict_class(spec, target, r.x_adv);
    bool misclassified = sp.targeted ? pred == sp.target_label : pred != y;
    r.success = misclassified && r.trajectory_dist_raw <= cfg.tau;
    fill_norms(r, x);
    return r;
}

void save_attack_batch(const std::string& dir, const AttackSpec& sp,
                       const std::vector<CraftedExample>& crafted, nn::TaskKind task) {
    fs::create_directories(dir);
    json manifest;
    manifest["schema"] = "trait-adv-v1";
    manifest["task"] = task == nn::TaskKind::Classification ? "classification" : "regression";
    manifest["attack"] = {
        {"method", to_string(sp.method)},   {"epsilon", sp.epsilon},
        {"alpha", sp.resolved_alpha()},     {"steps", sp.steps},
        {"targeted", sp.targeted},          {"target_label", sp.target_label},
        {"target_value", sp.target_value},  {"seed", sp.seed},
        {"regression_band", sp.regression_band},
    };
    json rows = json::array();
    for (const CraftedExample& c : crafted) {
        std::string file = "adv_" + c.id + ".csv";
        data::Example ex;
        ex.features = c.x_adv;
        ex.label = c.true_label;
        ex.target = Tensor::scalar(c.reg_target);
        data::write_example_csv((fs::path(dir) / file).string(), ex, task);
        rows.push_back({{"id", c.id},
                        {"file", file},
                        {"success", c.success},
                        {"true_label", c.true_label},
                        {"adv_pred", c.adv_pred},
                        {"reg_target", c.reg_target},
                        {"reg_pred", c.reg_pred},
                        {"linf", c.linf},
                        {"l2", c.l2},
                        {"trajectory_dist_raw", c.trajectory_dist_raw},
                        {"trajectory_dist_norm", c.trajectory_dist_norm}});
    }
    manifest["examples"] = std::move(rows);
    std::ofstream out(fs::path(dir) / "adv_manifest.json");
    if (!out) throw IoError("cannot write adv_manifest.json in " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("write failure on adv_manifest.json in " + dir);
}

AttackBatch load_attack_batch(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "adv_manifest.json");
    if (!in) throw IoError("cannot open adv_manifest.json in " + dir);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw FormatError("bad adv_manifest.json in " + dir + ": " + e.what());
    }

    AttackBatch batch;
    try {
        if (manifest.at("schema").get<std::string>() != "trait-adv-v1") {
            throw FormatError("unexpected adversarial manifest schema in " + dir);
        }
        batch.task = manifest.at("task").get<std::string>() == "regression"
                         ? nn::TaskKind::Regression
                         : nn::TaskKind::Classification;
        const json& a = manifest.at("attack");
        batch.spec.method = method_from_string(a.at("method").get<std::string>());
        batch.spec.epsilon = a.at("epsilon").get<double>();
        batch.spec.alpha = a.at("alpha").get<double>();
        batch.spec.steps = a.at("steps").get<std::size_t>();
        batch.spec.targeted = a.at("targeted").get<bool>();
        batch.spec.target_label = a.at("target_label").get<int>();
        batch.spec.target_value = a.at("target_value").get<double>();
        batch.spec.seed = a.at("seed").get<std::uint64_t>();
        batch.spec.regression_band = a.at("regression_band").get<double>();

        for (const json& row : manifest.at("examples")) {
            CraftedExample c;
            c.id = row.at("id").get<std::string>();
            c.success = row.at("success").get<bool>();
            c.true_label = row.at("true_label").get<int>();
            c.adv_pred = row.at("adv_pred").get<int>();
            c.reg_target = row.at("reg_target").get<float>();
            c.reg_pred = row.at("reg_pred").get<float>();
            c.linf = row.at("linf").get<double>();
            c.l2 = row.at("l2").get<double>();
            c.trajectory_dist_raw = row.at("trajectory_dist_raw").get<double>();
            c.trajectory_dist_norm = row.at("trajectory_dist_norm").get<double>();

            std::ifstream f(fs::path(dir) / row.at("file").get<std::string>());
            if (!f) throw IoError("cannot open adversarial feature file for id " + c.id);
            std::string header, line;
            std::getline(f, header);
            if (!std::getline(f, line)) {
                throw TruncationError("empty adversarial feature file for id " + c.id);
            }
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ','); // label column, already in the manifest
            std::vector<float> feats;
            while (std::getline(ss, cell, ',')) feats.push_back(std::stof(cell));
            c.x_adv = Tensor::vec(std::move(feats));
            batch.crafted.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw FormatError("bad adv_manifest.json in " + dir + ": " + e.what());
    }
    return batch;
}

} // namespace trait::attack

#include "trait/trajectory.hpp"

#include "trait/errors.hpp"
#include "trait/nn.hpp"
#include "trait/parallel.hpp"
#include "trait/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace trait::traj {

std::string to_string(SynthesisMode mode) {
    return mode == SynthesisMode::TargetAnchored ? "target-anchored" : "consecutive";
}

SynthesisMode synthesis_mode_from_string(const std::string& s) {
    if (s == "target-anchored") return SynthesisMode::TargetAnchored;
    if (s == "consecutive") return SynthesisMode::Consecutive;
    throw ConfigError("unknown trajectory mode '" + s + "'");
}

namespace {

// Softmax rows (classification) or raw outputs (regression) of one model on a
// stacked batch. Rows are independent, which is what makes batched extraction
// bitwise-equal to per-example extraction.
std::vector<Tensor> model_outputs(const train::CheckpointSet& cks, std::size_t epoch,
                                  const Tensor& X) {
    const nn::ModelSpec& spec = cks.spec;
    Tensor out = nn::forward_batch(spec, cks.at_epoch(epoch), X);
    std::size_t B = out.extent(0), C = out.extent(1);
    std::vector<Tensor> rows;
    rows.reserve(B);
    for (std::size_t i = 0; i < B; ++i) {
        Tensor row({C});
        for (std::size_t j = 0; j < C; ++j) row[j] = out[i * C + j];
        if (spec.task == nn::TaskKind::Classification) row = nn::softmax(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

double synth_loss(nn::TaskKind task, const Tensor& anchor, const Tensor& probe) {
    if (task == nn::TaskKind::Classification) return nn::cross_entropy_soft(anchor, probe);
    return nn::mse_loss(anchor, probe);
}

// Epoch indices contributing trajectory elements, in epoch order.
std::vector<std::size_t> element_epochs(const train::CheckpointSet& cks, SynthesisMode mode) {
    std::vector<std::size_t> ks;
    if (mode == SynthesisMode::TargetAnchored) {
        std::size_t tgt = cks.resolved_target();
        for (std::size_t k = 1; k <= cks.K(); ++k) {
            if (k != tgt) ks.push_back(k);
        }
    } else {
        for (std::size_t k = 1; k < cks.K(); ++k) ks.push_back(k);
    }
    return ks;
}

Tensor stack_rows(const std::vector<Tensor>& xs, const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> shape{idx.size()};
    shape.insert(shape.end(), xs[idx[0]].shape().begin(), xs[idx[0]].shape().end());
    Tensor out(shape);
    std::size_t stride = shape_product(xs[idx[0]].shape());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy(xs[idx[i]].values().begin(), xs[idx[i]].values().end(),
                  out.values().begin() + i * stride);
    }
    return out;
}

std::vector<LossTrajectory> extract_chunk(const train::CheckpointSet& cks,
                                          const std::vector<Tensor>& inputs,
                                          const std::vector<std::size_t>& idx, SynthesisMode mode) {
    Tensor X = stack_rows(inputs, idx);
    std::vector<std::size_t> ks = element_epochs(cks, mode);

    // outputs[k] holds per-example outputs of epoch k on this chunk
    std::vector<std::vector<Tensor>> outputs(cks.K() + 1);
    for (std::size_t k = 1; k <= cks.K(); ++k) {
        outputs[k] = model_outputs(cks, k, X);
    }

    std::size_t tgt = cks.resolved_target();
    std::vector<LossTrajectory> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        LossTrajectory t;
        t.mode = mode;
        t.task = cks.spec.task;
        t.values.reserve(ks.size());
        for (std::size_t k : ks) {
            const Tensor& anchor =
                mode == SynthesisMode::TargetAnchored ? outputs[tgt][i] : outputs[k + 1][i];
            double v = synth_loss(cks.spec.task, anchor, outputs[k][i]);
            t.values.push_back(static_cast<float>(v));
        }
        t.n_used = t.values.size();
        out[i] = std::move(t);
    }
    return out;
}

} // namespace

std::vector<std::size_t> select_benign_pool(const train::CheckpointSet& checkpoints,
                                            const data::DatasetHandle& data, data::Split split,
                                            std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx = data.indices(split);
    std::vector<std::size_t> qualified;

    if (data.task == nn::TaskKind::Classification) {
        const std::size_t chunk = 256;
        std::size_t C = checkpoints.spec.output_dim();
        for (std::size_t start = 0; start < idx.size(); start += chunk) {
            std::size_t stop = std::min(idx.size(), start + chunk);
            std::vector<std::size_t> batch(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                           idx.begin() + static_cast<std::ptrdiff_t>(stop));
            Tensor out = nn::forward_batch(checkpoints.spec, checkpoints.target(),
                                           data::stack_features(data, batch));
            for (std::size_t i = 0; i < batch.size(); ++i) {
                std::size_t arg = 0;
                for (std::size_t j = 1; j < C; ++j) {
                    if (out[i * C + j] > out[i * C + arg]) arg = j;
                }
                if (static_cast<int>(arg) == data.examples[batch[i]].label) {
                    qualified.push_back(batch[i]);
                }
            }
        }
    } else {
        qualified = idx; // no misclassification notion for regression
    }

    if (qualified.size() < n) {
        throw InsufficientDataError("benign pool needs " + std::to_string(n) +
                                    " correctly-classified examples, found " +
                                    std::to_string(qualified.size()) + " (deficit " +
                                    std::to_string(n - qualified.size()) + ")");
    }
    Rng rng(derive_seed(seed, "benign-pool"));
    std::vector<std::size_t> draw = rng.sample_without_replacement(qualified.size(), n);
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t d : draw) out.push_back(qualified[d]);
    return out;
}

LossTrajectory extract_trajectory(const train::CheckpointSet& checkpoints, const Tensor& x,
                                  SynthesisMode mode, const std::string& example_id) {
    std::vector<LossTrajectory> one = extract_chunk(checkpoints, {x}, {0}, mode);
    one[0].example_id = example_id;
    return std::move(one[0]);
}

ImprintMatrix extract_softmax_imprint(const train::CheckpointSet& checkpoints, const Tensor& x,
                                      const std::string& example_id) {
    if (checkpoints.spec.task != nn::TaskKind::Classification) {
        throw ConfigError("softmax imprint requires a classification model");
    }
    std::vector<std::size_t> ks = element_epochs(checkpoints, SynthesisMode::TargetAnchored);
    ImprintMatrix m;
    m.num_classes = checkpoints.spec.output_dim();
    m.num_epochs = ks.size();
    m.n_used = ks.size();
    m.example_id = example_id;
    m.probs.assign(m.num_classes * m.num_epochs, 0.0f);
    for (std::size_t col = 0; col < ks.size(); ++col) {
        Tensor probs = nn::softmax(nn::forward(checkpoints.spec, checkpoints.at_epoch(ks[col]), x));
        for (std::size_t c = 0; c < m.num_classes; ++c) {
            m.probs[c * m.num_epochs + col] = probs[c];
        }
    }
    return m;
}

LossTrajectory truncate_epochs(const LossTrajectory& t, std::size_t first_n) {
    if (first_n < 1 || first_n > t.values.size()) {
        throw ConfigError("truncate: first_n=" + std::to_string(first_n) + " outside 1.." +
                          std::to_string(t.values.size()));
    }
    LossTrajectory out = t;
    out.values.resize(first_n);
    out.n_used = first_n;
    return out;
}

ImprintMatrix truncate_epochs(const ImprintMatrix& m, std::size_t first_n) {
    if (first_n < 1 || first_n > m.num_epochs) {
        throw ConfigError("truncate: first_n=" + std::to_string(first_n) + " outside 1.." +
                          std::to_string(m.num_epochs));
    }
    ImprintMatrix out;
    out.num_classes = m.num_classes;
    out.num_epochs = first_n;
    out.n_used = first_n;
    out.example_id = m.example_id;
    out.label = m.label;
    out.probs.assign(m.num_classes * first_n, 0.0f);
    for (std::size_t c = 0; c < m.num_classes; ++c) {
        for (std::size_t k = 0; k < first_n; ++k) {
            out.probs[c * first_n + k] = m.at(c, k);
        }
    }
    return out;
}

std::vector<LossTrajectory> batch_extract(const train::CheckpointSet& checkpoints,
                                          const std::vector<Tensor>& inputs, SynthesisMode mode,
                                          std::size_t parallelism,
                                          const std::vector<std::string>& ids,
                                          const std::vector<float>& labels) {
    if (inputs.empty()) return {};
    checkpoints.validate();

    const std::size_t chunk = 64;
    std::size_t n_chunks = (inputs.size() + chunk - 1) / chunk;
    std::vector<LossTrajectory> results(inputs.size());

    parallel_for(n_chunks, parallelism, [&](std::size_t ci) {
        std::size_t start = ci * chunk;
        std::size_t stop = std::min(inputs.size(), start + chunk);
        std::vector<std::size_t> idx;
        idx.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
        std::vector<LossTrajectory> part;
        try {
            part = extract_chunk(checkpoints, inputs, idx, mode);
        } catch (const Error& e) {
            throw Error("batch_extract: example " + std::to_string(start) + ": " + e.what());
        }
        for (std::size_t i = 0; i < idx.size(); ++i) {
            results[idx[i]] = std::move(part[i]);
        }
    });

    for (std::size_t i = 0; i < results.size(); ++i) {
        if (i < ids.size()) results[i].example_id = ids[i];
        if (i < labels.size()) results[i].label = labels[i];
    }
    return results;
}

void write_trajectories_csv(const std::string& path, const std::vector<LossTrajectory>& ts) {
    if (ts.empty()) throw ConfigError("write_trajectories_csv: empty set");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);

    out << "example_id,label,mode,n_used";
    char buf[32];
    for (std::size_t i = 1; i <= ts[0].values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "l_%03zu", i);
        out << "," << buf;
    }
    out << "\n";
    for (const LossTrajectory& t : ts) {
        if (t.values.size() != ts[0].values.size()) {
            throw ShapeError("write_trajectories_csv: ragged trajectory lengths");
        }
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(t.label));
        out << t.example_id << "," << buf << "," << to_string(t.mode) << "," << t.n_used;
        for (float v : t.values) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

std::vector<LossTrajectory> read_trajectories_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("example_id,label,mode,n_used", 0) != 0) {
        throw FormatError("bad trajectory CSV header in " + path);
    }
    std::vector<LossTrajectory> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        LossTrajectory t;
        std::getline(ss, t.example_id, ',');
        std::getline(ss, cell, ',');
        t.label = std::stof(cell);
        std::getline(ss, cell, ',');
        t.mode = synthesis_mode_from_string(cell);
        std::getline(ss, cell, ',');
        t.n_used = std::stoul(cell);
        while (std::getline(ss, cell, ',')) t.values.push_back(std::stof(cell));
        if (t.values.size() != t.n_used) {
            throw FormatError("trajectory row n_used mismatch in " + path);
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_imprints_csv(const std::string& path, const std::vector<ImprintMatrix>& ms) {
    if (ms.empty()) throw ConfigError("write_imprints_csv: empty set");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);

    std::size_t C = ms[0].num_classes, E = ms[0].num_epochs;
    out << "example_id,label,mode,n_used";
    for (std::size_t k = 1; k <= E; ++k) {
        for (std::size_t c = 0; c < C; ++c) out << ",c" << c << "_e" << k;
    }
    out << "\n";
    char buf[32];
    for (const ImprintMatrix& m : ms) {
        if (m.num_classes != C || m.num_epochs != E) {
            throw ShapeError("write_imprints_csv: ragged imprint shapes");
        }
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(m.label));
        out << m.example_id << "," << buf << ",softmax-imprint," << m.n_used;
        for (std::size_t k = 0; k < E; ++k) {
            for (std::size_t c = 0; c < C; ++c) {
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(m.at(c, k)));
                out << "," << buf;
            }
        }
        out << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

} // namespace trait::traj

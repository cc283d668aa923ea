#include "trait/trainer.hpp"

#include "trait/errors.hpp"
#include "trait/rng.hpp"

#include <algorithm>
#include <cmath>

namespace trait::train {

namespace {

nn::LossTarget batch_target(const data::DatasetHandle& data, const std::vector<std::size_t>& idx,
                            std::size_t out_dim) {
    if (data.task == nn::TaskKind::Classification) {
        std::vector<int> labels;
        labels.reserve(idx.size());
        for (std::size_t i : idx) labels.push_back(data.examples[i].label);
        return nn::LossTarget::hard(std::move(labels));
    }
    Tensor targets({idx.size(), out_dim});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Tensor& t = data.examples[idx[i]].target;
        if (t.size() != out_dim) {
            throw ShapeError("regression target size " + std::to_string(t.size()) +
                             " != model output " + std::to_string(out_dim));
        }
        for (std::size_t j = 0; j < out_dim; ++j) targets[i * out_dim + j] = t[j];
    }
    return nn::LossTarget::mse(std::move(targets));
}

} // namespace

CheckpointSet train_with_checkpoints(const TrainConfig& config, const data::DatasetHandle& data,
                                     const nn::ModelSpec& spec) {
    if (config.epochs < 2) throw ConfigError("train: epochs must be >= 2");
    if (config.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (data.examples.empty()) throw ConfigError("train: empty dataset");
    if (data.task != spec.task) throw ConfigError("train: dataset/model task mismatch");
    std::size_t out_dim = spec.output_dim();
    if (data.task == nn::TaskKind::Classification && data.num_classes != out_dim) {
        throw ConfigError("train: model emits " + std::to_string(out_dim) + " classes, dataset has " +
                          std::to_string(data.num_classes));
    }

    std::vector<std::size_t> train_idx = data.indices(data::Split::Train);
    if (train_idx.empty()) throw ConfigError("train: empty train split");

    nn::ParamSet params = nn::init_params(spec, derive_seed(config.seed, "init"));
    nn::Optimizer opt(config.optimizer);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));

    CheckpointSet set;
    set.spec = spec;
    set.seed = config.seed;
    set.dataset_id = data.id;
    set.target_index = config.target_index;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<std::size_t> order = shuffle_rng.permutation(train_idx.size());
        double loss_sum = 0.0;
        std::size_t seen = 0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::vector<std::size_t> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_idx[order[i]]);

            Tensor X = data::stack_features(data, batch);
            nn::LossTarget target = batch_target(data, batch, out_dim);

            nn::GradientBundle grads;
            double batch_loss = 0.0;
            try {
                grads = nn::batch_gradients(spec, params, X, target, nn::Wrt::Params, &batch_loss);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(start / config.batch_size) + ": " + e.what());
            }
            loss_sum += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();

            opt.step(params, grads.param_grads);
        }

        set.epochs.push_back(params); // copy: snapshot after the epoch's last step
        set.train_loss.push_back(loss_sum / static_cast<double>(seen));
        set.val_metric.push_back(evaluate_model(spec, params, data, data::Split::Val));
    }

    if (!config.checkpoint_dir.empty()) {
        save_checkpoint_set(config.checkpoint_dir, set);
    }
    return set;
}

double evaluate_model(const nn::ModelSpec& spec, const nn::ParamSet& params,
                      const data::DatasetHandle& data, data::Split split) {
    if (data.task != spec.task) throw ConfigError("evaluate: dataset/model task mismatch");
    std::vector<std::size_t> idx = data.indices(split);
    if (idx.empty()) throw ConfigError("evaluate: empty split");

    std::size_t out_dim = spec.output_dim();
    const std::size_t chunk = 256;
    std::size_t correct = 0;
    double sq_err = 0.0;
    std::size_t sq_n = 0;

    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        std::size_t stop = std::min(idx.size(), start + chunk);
        std::vector<std::size_t> batch(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                       idx.begin() + static_cast<std::ptrdiff_t>(stop));
        Tensor out = nn::forward_batch(spec, params, data::stack_features(data, batch));
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (data.task == nn::TaskKind::Classification) {
                std::size_t argmax = 0;
                for (std::size_t j = 1; j < out_dim; ++j) {
                    if (out[i * out_dim + j] > out[i * out_dim + argmax]) argmax = j;
                }
                if (static_cast<int>(argmax) == data.examples[batch[i]].label) ++correct;
            } else {
                const Tensor& t = data.examples[batch[i]].target;
                for (std::size_t j = 0; j < out_dim; ++j) {
                    double d = static_cast<double>(out[i * out_dim + j]) - static_cast<double>(t[j]);
                    sq_err += d * d;
                    ++sq_n;
                }
            }
        }
    }
    if (data.task == nn::TaskKind::Classification) {
        return static_cast<double>(correct) / static_cast<double>(idx.size());
    }
    return sq_err / static_cast<double>(sq_n);
}

} // namespace trait::train

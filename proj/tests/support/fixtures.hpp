#pragma once

// Shared trained fixtures, built once per test binary.

#include "trait/dataset.hpp"
#include "trait/trainer.hpp"

namespace fixtures {

struct Toy {
    trait::data::DatasetHandle data;
    trait::train::CheckpointSet cks;
};

// blobs-3 in 2-D, small MLP, K=8. Spread out enough that the model is good
// but not perfect.
inline const Toy& toy_blobs() {
    static const Toy fixture = [] {
        Toy t;
        trait::data::SynthConfig cfg;
        cfg.train_n = 300;
        cfg.val_n = 150;
        cfg.test_n = 150;
        cfg.blob_std = 0.07;
        t.data = trait::data::load_or_synthesize_dataset("blobs-3", 1234, cfg);

        trait::nn::ModelSpec spec;
        spec.task = trait::nn::TaskKind::Classification;
        spec.input_shape = {2};
        spec.layers = {{trait::nn::LayerKind::Dense, 2, 16},
                       {trait::nn::LayerKind::Relu},
                       {trait::nn::LayerKind::Dense, 16, 3}};

        trait::train::TrainConfig tc;
        tc.epochs = 8;
        tc.seed = 1234;
        tc.optimizer.lr = 0.1;
        t.cks = trait::train::train_with_checkpoints(tc, t.data, spec);
        return t;
    }();
    return fixture;
}

// sine-forecast with a small recurrent regressor, K=6.
inline const Toy& toy_sine() {
    static const Toy fixture = [] {
        Toy t;
        trait::data::SynthConfig cfg;
        cfg.train_n = 300;
        cfg.val_n = 100;
        cfg.test_n = 100;
        t.data = trait::data::load_or_synthesize_dataset("sine-forecast", 77, cfg);

        trait::nn::ModelSpec spec;
        spec.task = trait::nn::TaskKind::Regression;
        spec.input_shape = {3, 1};
        spec.layers = {{trait::nn::LayerKind::Lstm, 1, 8}, {trait::nn::LayerKind::Dense, 8, 1}};

        trait::train::TrainConfig tc;
        tc.epochs = 6;
        tc.seed = 77;
        tc.optimizer.method = trait::nn::OptMethod::Adam;
        tc.optimizer.lr = 0.02;
        t.cks = trait::train::train_with_checkpoints(tc, t.data, spec);
        return t;
    }();
    return fixture;
}

} // namespace fixtures

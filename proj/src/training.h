#pragma once

// Training harness: seeded 8:1:1 splitting, per-dimension feature
// standardization, plain SGD with L1 loss, early stopping on validation
// MSE, and per-epoch history capture.

#include "dataset.h"
#include "metrics.h"
#include "model.h"

#include <cstdint>
#include <string>
#include <vector>

namespace salf {

struct train_config {
    double learning_rate = 1e-4;
    int batch_size = 4;
    int max_epochs = 1000;
    int patience = 20; // epochs without validation-MSE improvement
    uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    bool standardize = true;
};

void validate_train_config(const train_config & cfg);

struct split_indices {
    std::vector<size_t> train;
    std::vector<size_t> val;
    std::vector<size_t> test;
};

// deterministic shuffle by seed, then floor(0.8n) / floor(0.1n) / rest;
// needs n >= 10
split_indices split_dataset(size_t n, uint64_t seed);

struct standardizer {
    std::vector<double> mean;
    std::vector<double> stddev; // biased, floored at 1e-8
};

standardizer fit_standardizer(const std::vector<std::vector<double>> & features);

struct epoch_stats {
    double train_l1 = 0.0;
    double val_mse = 0.0;
    double val_lcc = 0.0;  // NaN when undefined
    double val_srcc = 0.0;
    double val_ktau = 0.0;
};

struct train_history {
    std::vector<epoch_stats> epochs;
    size_t best_epoch = 0; // index of the minimum validation MSE
};

// epoch,train_l1,val_mse,val_lcc,val_srcc,val_ktau
void write_history_csv(const train_history & history, const std::string & path);

struct train_result {
    mos_model model; // parameters of the best epoch, standardizer embedded
    train_history history;
};

// Core loop over raw (unpadded) feature rows and labels with explicit
// splits; cfg.input_dim == 0 derives the padded dimension from the data.
train_result train_on_features(const std::vector<std::vector<double>> & features,
                               const std::vector<double> & labels, const split_indices & splits,
                               model_config model_cfg, const train_config & cfg,
                               feature_kind kind);

// Full pipeline on a manifest: resolve features, split 8:1:1 by seed, train.
train_result train(const manifest & m, feature_kind kind, const model_config & model_cfg,
                   const train_config & cfg, const cepstral_config & cepstral = {});

} // namespace salf

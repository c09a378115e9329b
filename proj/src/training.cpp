#include "training.h"

#include "error.h"
#include "log.h"
#include "rng.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace salf {

void validate_train_config(const train_config & cfg) {
    check(cfg.learning_rate > 0.0 || cfg.learning_rate == 0.0, errc::invalid_argument,
          "learning rate must be >= 0");
    check(std::isfinite(cfg.learning_rate), errc::invalid_argument, "learning rate must be finite");
    check(cfg.batch_size >= 1, errc::invalid_argument, "batch size must be >= 1");
    check(cfg.patience >= 1, errc::invalid_argument, "patience must be >= 1");
    check(cfg.max_epochs >= 1, errc::invalid_argument, "max epochs must be >= 1");
}

split_indices split_dataset(size_t n, uint64_t seed) {
    if (n < 10) {
        fail(errc::too_few_utterances,
             "need at least 10 utterances to split 8:1:1, got " + std::to_string(n));
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{ 0 });
    rng r(mix_seed(seed, 0x73706c6974ull));
    r.shuffle(order);

    const size_t n_train = n * 8 / 10;
    const size_t n_val = n / 10;
    split_indices s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    s.test.assign(order.begin() + n_train + n_val, order.end());
    return s;
}

standardizer fit_standardizer(const std::vector<std::vector<double>> & features) {
    if (features.size() < 2) {
        fail(errc::too_few_samples, "standardizer needs at least 2 training utterances");
    }
    const size_t dims = features.front().size();
    standardizer s;
    s.mean.assign(dims, 0.0);
    s.stddev.assign(dims, 0.0);
    for (const auto & row : features) {
        check(row.size() == dims, errc::feature_dim_mismatch, "standardizer: inconsistent dims");
        for (size_t d = 0; d < dims; ++d) {
            s.mean[d] += row[d];
        }
    }
    const double n = static_cast<double>(features.size());
    for (auto & v : s.mean) {
        v /= n;
    }
    for (const auto & row : features) {
        for (size_t d = 0; d < dims; ++d) {
            const double diff = row[d] - s.mean[d];
            s.stddev[d] += diff * diff;
        }
    }
    for (auto & v : s.stddev) {
        v = std::max(std::sqrt(v / n), 1e-8); // biased, floored
    }
    return s;
}

void write_history_csv(const train_history & history, const std::string & path) {
    std::FILE * f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) {
        fail(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    std::fprintf(f, "epoch,train_l1,val_mse,val_lcc,val_srcc,val_ktau\n");
    for (size_t e = 0; e < history.epochs.size(); ++e) {
        const auto & s = history.epochs[e];
        std::fprintf(f, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", e, s.train_l1, s.val_mse, s.val_lcc,
                     s.val_srcc, s.val_ktau);
    }
    if (std::fclose(f) != 0) {
        fail(errc::io_failure, "write error on '" + path + "'");
    }
}

namespace {

struct param_snapshot {
    std::vector<std::vector<double>> data;
    std::vector<ad::bn_state> bn;
};

param_snapshot snapshot(const mos_model & m) {
    param_snapshot s;
    for (const auto & p : m.parameters()) {
        s.data.push_back(p->data);
    }
    for (const auto & blk : m.blocks) {
        s.bn.push_back(blk.first.bn);
        s.bn.push_back(blk.second.bn);
    }
    return s;
}

void restore(mos_model & m, const param_snapshot & s) {
    auto params = m.parameters();
    for (size_t i = 0; i < params.size(); ++i) {
        params[i]->data = s.data[i];
    }
    size_t bi = 0;
    for (auto & blk : m.blocks) {
        blk.first.bn = s.bn[bi++];
        blk.second.bn = s.bn[bi++];
    }
}

} // namespace

train_result train_on_features(const std::vector<std::vector<double>> & features,
                               const std::vector<double> & labels, const split_indices & splits,
                               model_config model_cfg, const train_config & cfg,
                               feature_kind kind) {
    validate_train_config(cfg);
    check(features.size() == labels.size(), errc::length_mismatch,
          "feature/label counts differ");
    check(!splits.train.empty(), errc::empty_split, "training split is empty");
    check(!splits.val.empty(), errc::empty_split, "validation split is empty");

    const size_t raw_dim = features.front().size();
    for (const auto & row : features) {
        check(row.size() == raw_dim, errc::feature_dim_mismatch, "inconsistent feature dims");
    }
    if (model_cfg.input_dim == 0) {
        model_cfg.input_dim = padded_dim(static_cast<int64_t>(raw_dim), model_cfg.depth);
    }
    validate_config(model_cfg);
    check(static_cast<int64_t>(raw_dim) <= model_cfg.input_dim, errc::shape_mismatch,
          "feature dim " + std::to_string(raw_dim) + " exceeds input_dim " +
              std::to_string(model_cfg.input_dim));

    // zero-pad up front so the standardizer covers the padded tail too
    const auto dim = static_cast<size_t>(model_cfg.input_dim);
    std::vector<std::vector<double>> padded(features.size(), std::vector<double>(dim, 0.0));
    for (size_t i = 0; i < features.size(); ++i) {
        std::copy(features[i].begin(), features[i].end(), padded[i].begin());
    }

    mos_model model = build_model(model_cfg, cfg.seed, kind);
    if (cfg.standardize) {
        std::vector<std::vector<double>> train_rows;
        train_rows.reserve(splits.train.size());
        for (size_t i : splits.train) {
            train_rows.push_back(padded[i]);
        }
        const auto s = fit_standardizer(train_rows);
        model.feat_mean = s.mean;
        model.feat_std = s.stddev;
    }
    SALF_LOG_INFO("training: %zu train / %zu val utterances, input_dim %lld, depth %d, "
                  "standardize %d",
                  splits.train.size(), splits.val.size(),
                  static_cast<long long>(model_cfg.input_dim), model_cfg.depth,
                  cfg.standardize ? 1 : 0);

    auto standardized = [&](size_t i) {
        std::vector<double> row(dim);
        for (size_t d = 0; d < dim; ++d) {
            row[d] = (padded[i][d] - model.feat_mean[d]) / model.feat_std[d];
        }
        return row;
    };

    std::vector<std::vector<double>> val_rows;
    std::vector<double> val_labels;
    for (size_t i : splits.val) {
        val_rows.push_back(padded[i]); // predict_batch standardizes internally
        val_labels.push_back(labels[i]);
    }

    auto params = model.parameters();
    train_history history;
    double best_mse = std::numeric_limits<double>::infinity();
    param_snapshot best;
    size_t epochs_since_best = 0;

    std::vector<size_t> order(splits.train.begin(), splits.train.end());

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.shuffle_each_epoch) {
            rng r(mix_seed(cfg.seed, 0x65706f6368ull + static_cast<uint64_t>(epoch)));
            r.shuffle(order);
        }

        double epoch_abs_err = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::vector<double>> batch_rows;
            std::vector<double> batch_labels;
            for (size_t k = start; k < end; ++k) {
                batch_rows.push_back(standardized(order[k]));
                batch_labels.push_back(labels[order[k]]);
            }
            for (auto & p : params) {
                p->zero_grad();
            }
            ad::tape tape;
            auto pred = forward_batch(model, batch_rows, true, tape);
            const auto batch_n = static_cast<int64_t>(batch_labels.size());
            auto target = ad::tensor::from({ batch_n, 1 }, std::move(batch_labels));
            auto loss = tape.l1_loss(pred, target);
            tape.backward(loss);
            for (auto & p : params) {
                for (size_t i = 0; i < p->data.size(); ++i) {
                    p->data[i] -= cfg.learning_rate * p->grad[i];
                }
            }
            epoch_abs_err += loss->data[0] * static_cast<double>(end - start);
        }

        epoch_stats stats;
        stats.train_l1 = epoch_abs_err / static_cast<double>(order.size());

        // unclamped: clamp saturation would flatline the selection metric
        // while a fresh model climbs from 0 into the [1, 5] band
        const auto val_pred = predict_batch(model, val_rows, false);
        stats.val_mse = mse(val_labels, val_pred);
        {
            // correlations may be undefined early on (e.g. clamped constant output)
            auto rep = make_report(std::vector<std::string>(val_labels.size()), val_labels, val_pred);
            stats.val_lcc = rep.lcc;
            stats.val_srcc = rep.srcc;
            stats.val_ktau = rep.ktau;
        }
        history.epochs.push_back(stats);

        if (stats.val_mse < best_mse) {
            best_mse = stats.val_mse;
            best = snapshot(model);
            history.best_epoch = static_cast<size_t>(epoch);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        SALF_LOG_DEBUG("epoch %d: train_l1 %.6f val_mse %.6f (best %.6f @ %zu)", epoch,
                       stats.train_l1, stats.val_mse, best_mse, history.best_epoch);
        if (epochs_since_best >= static_cast<size_t>(cfg.patience)) {
            SALF_LOG_INFO("early stop at epoch %d (no improvement for %d epochs)", epoch,
                          cfg.patience);
            break;
        }
    }

    restore(model, best);
    return { std::move(model), std::move(history) };
}

train_result train(const manifest & m, feature_kind kind, const model_config & model_cfg,
                   const train_config & cfg, const cepstral_config & cepstral) {
    const auto features = resolve_all_features(m, kind, cepstral);
    std::vector<double> labels;
    labels.reserve(m.utterances.size());
    for (const auto & u : m.utterances) {
        labels.push_back(u.mos);
    }
    const auto splits = split_dataset(m.utterances.size(), cfg.seed);
    return train_on_features(features, labels, splits, model_cfg, cfg, kind);
}

} // namespace salf

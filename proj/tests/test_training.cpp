#include "error.h"
#include "rng.h"
#include "test_util.h"
#include "training.h"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

using namespace salf;

namespace {

// small random regression instance over raw feature rows
struct toy_problem {
    std::vector<std::vector<double>> features;
    std::vector<double> labels;
    split_indices splits;
};

toy_problem make_toy(size_t n, size_t dims, uint64_t seed, bool val_is_train = false) {
    rng r(seed);
    toy_problem p;
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> row(dims);
        for (auto & v : row) {
            v = r.uniform(-1.0, 1.0);
        }
        p.features.push_back(std::move(row));
        p.labels.push_back(1.0 + 4.0 * r.uniform());
        p.splits.train.push_back(i);
    }
    if (val_is_train) {
        p.splits.val = p.splits.train;
        p.splits.test = p.splits.train;
    } else {
        p.splits.val.push_back(0);
        p.splits.test.push_back(1);
    }
    return p;
}

std::vector<std::vector<double>> param_data(const mos_model & m) {
    std::vector<std::vector<double>> out;
    for (const auto & p : m.parameters()) {
        out.push_back(p->data);
    }
    return out;
}

} // namespace

TEST_CASE("split_dataset sizes follow 8:1:1") {
    const auto s100 = split_dataset(100, 1);
    CHECK(s100.train.size() == 80);
    CHECK(s100.val.size() == 10);
    CHECK(s100.test.size() == 10);

    const auto s10 = split_dataset(10, 1);
    CHECK(s10.train.size() == 8);
    CHECK(s10.val.size() == 1);
    CHECK(s10.test.size() == 1);

    try {
        split_dataset(9, 1);
        FAIL("expected TooFewUtterances");
    } catch (const error & e) {
        CHECK(e.code() == errc::too_few_utterances);
    }
}

TEST_CASE("split_dataset is deterministic per seed") {
    const auto a = split_dataset(57, 1234);
    const auto b = split_dataset(57, 1234);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    const auto c = split_dataset(57, 1235);
    CHECK(a.train != c.train);
}

TEST_CASE("splits are disjoint and exhaustive for 1000 random sizes") {
    rng r(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 10 + r.below(500);
        const auto s = split_dataset(n, r.next_u64());
        std::set<size_t> seen;
        for (const auto * part : { &s.train, &s.val, &s.test }) {
            for (size_t i : *part) {
                REQUIRE(i < n);
                REQUIRE(seen.insert(i).second); // no overlap
            }
        }
        REQUIRE(seen.size() == n);
        REQUIRE(s.train.size() == n * 8 / 10);
        REQUIRE(s.val.size() == n / 10);
    }
}

TEST_CASE("fit_standardizer uses the biased std with a floor") {
    const std::vector<std::vector<double>> feats = { { 0.0, 7.0 }, { 2.0, 7.0 } };
    const auto s = fit_standardizer(feats);
    CHECK(s.mean[0] == doctest::Approx(1.0));
    CHECK(s.stddev[0] == doctest::Approx(1.0)); // biased over {0, 2}
    CHECK(s.mean[1] == doctest::Approx(7.0));
    CHECK(s.stddev[1] == doctest::Approx(1e-8)); // constant dimension floors

    try {
        fit_standardizer({ { 1.0 } });
        FAIL("expected TooFewSamples");
    } catch (const error & e) {
        CHECK(e.code() == errc::too_few_samples);
    }
}

TEST_CASE("standardized training data has near-zero per-dimension mean") {
    rng r(77);
    std::vector<std::vector<double>> feats(25, std::vector<double>(12));
    for (auto & row : feats) {
        for (auto & v : row) {
            v = r.uniform(-5.0, 9.0);
        }
    }
    const auto s = fit_standardizer(feats);
    for (size_t d = 0; d < 12; ++d) {
        double mean = 0.0;
        for (const auto & row : feats) {
            mean += (row[d] - s.mean[d]) / s.stddev[d];
        }
        mean /= static_cast<double>(feats.size());
        REQUIRE(std::abs(mean) < 1e-9);
    }
}

TEST_CASE("lr = 0 leaves the parameters at their initialization") {
    auto p = make_toy(12, 16, 5);
    model_config mcfg;
    mcfg.depth = 2;
    mcfg.input_dim = 16;
    train_config tcfg;
    tcfg.learning_rate = 0.0;
    tcfg.max_epochs = 5;
    tcfg.seed = 5;

    auto init = build_model(mcfg, tcfg.seed, feature_kind::raw);
    const auto result = train_on_features(p.features, p.labels, p.splits, mcfg, tcfg, feature_kind::raw);
    const auto trained = param_data(result.model);
    const auto fresh = param_data(init);
    REQUIRE(trained == fresh);
}

TEST_CASE("a single SGD step at tiny lr decreases the batch loss") {
    // flat relu regions may flatline a step; allow one failure in 20 trials
    int failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
        rng r(4000 + trial);
        model_config mcfg;
        mcfg.depth = 2;
        mcfg.input_dim = 8;
        auto m = build_model(mcfg, 4000 + trial, feature_kind::raw);
        std::vector<std::vector<double>> rows(4, std::vector<double>(8));
        std::vector<double> labels(4);
        for (auto & row : rows) {
            for (auto & v : row) {
                v = r.uniform(-1.0, 1.0);
            }
        }
        for (auto & l : labels) {
            l = r.uniform(1.0, 5.0);
        }

        auto batch_loss = [&](bool update) {
            auto params = m.parameters();
            for (auto & pp : params) {
                pp->zero_grad();
            }
            ad::tape tape;
            auto pred = forward_batch(m, rows, true, tape);
            auto target = ad::tensor::from({ 4, 1 }, labels);
            auto loss = tape.l1_loss(pred, target);
            if (update) {
                tape.backward(loss);
                for (auto & pp : params) {
                    for (size_t i = 0; i < pp->data.size(); ++i) {
                        pp->data[i] -= 1e-6 * pp->grad[i];
                    }
                }
            }
            return loss->data[0];
        };
        auto bn_backup = m.blocks; // restore running stats so both passes see the same state
        const double before = batch_loss(true);
        for (size_t b = 0; b < m.blocks.size(); ++b) {
            m.blocks[b].first.bn = bn_backup[b].first.bn;
            m.blocks[b].second.bn = bn_backup[b].second.bn;
        }
        const double after = batch_loss(false);
        if (!(after < before + 1e-15)) {
            ++failures;
        }
    }
    CHECK(failures <= 1);
}

TEST_CASE("early stopping returns the minimum-validation-MSE model") {
    auto p = make_toy(30, 16, 9);
    p.splits = split_dataset(30, 9);
    model_config mcfg;
    mcfg.depth = 2;
    mcfg.input_dim = 16;
    train_config tcfg;
    tcfg.learning_rate = 1e-2;
    tcfg.max_epochs = 60;
    tcfg.patience = 10;
    tcfg.seed = 9;

    const auto result = train_on_features(p.features, p.labels, p.splits, mcfg, tcfg, feature_kind::raw);
    REQUIRE(!result.history.epochs.empty());
    const double best = result.history.epochs[result.history.best_epoch].val_mse;
    for (const auto & e : result.history.epochs) {
        REQUIRE(best <= e.val_mse);
    }

    // the returned model reproduces the best epoch's validation MSE exactly
    std::vector<std::vector<double>> val_rows;
    std::vector<double> val_labels;
    for (size_t i : p.splits.val) {
        val_rows.push_back(p.features[i]);
        val_labels.push_back(p.labels[i]);
    }
    // pad rows the way training did
    for (auto & row : val_rows) {
        row.resize(static_cast<size_t>(result.model.cfg.input_dim), 0.0);
    }
    const auto pred = predict_batch(result.model, val_rows, false); // selection is unclamped
    CHECK(mse(val_labels, pred) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("identical seeds give bit-identical checkpoints and histories") {
    testutil::temp_dir dir("det");
    const auto manifest_path = testutil::make_feature_corpus(dir, 24, 3, 32, feature_kind::wav2vec, 11);
    const auto m = load_manifest(manifest_path);

    model_config mcfg;
    mcfg.depth = 3;
    mcfg.input_dim = 0; // derive (32)
    train_config tcfg;
    tcfg.seed = 123;
    tcfg.max_epochs = 15;
    tcfg.learning_rate = 1e-3;

    const auto r1 = train(m, feature_kind::wav2vec, mcfg, tcfg);
    const auto r2 = train(m, feature_kind::wav2vec, mcfg, tcfg);
    REQUIRE(serialize_checkpoint(r1.model) == serialize_checkpoint(r2.model));
    REQUIRE(r1.history.best_epoch == r2.history.best_epoch);
    REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
    for (size_t e = 0; e < r1.history.epochs.size(); ++e) {
        REQUIRE(r1.history.epochs[e].train_l1 == r2.history.epochs[e].train_l1);
        REQUIRE(r1.history.epochs[e].val_mse == r2.history.epochs[e].val_mse);
    }

    const auto h1 = dir.file("h1.csv"), h2 = dir.file("h2.csv");
    write_history_csv(r1.history, h1);
    write_history_csv(r2.history, h2);
    std::ifstream f1(h1), f2(h2);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    REQUIRE(!s1.empty());
    REQUIRE(s1 == s2);
    CHECK(s1.starts_with("epoch,train_l1,val_mse,val_lcc,val_srcc,val_ktau\n"));
}

TEST_CASE("training embeds the standardizer and derived input_dim") {
    testutil::temp_dir dir("std");
    const auto manifest_path = testutil::make_feature_corpus(dir, 20, 2, 20, feature_kind::wav2vec, 3);
    const auto m = load_manifest(manifest_path);
    model_config mcfg;
    mcfg.input_dim = 0; // derive: depth 4 pads dim 20 up to 24
    train_config tcfg;
    tcfg.max_epochs = 3;
    const auto result = train(m, feature_kind::wav2vec, mcfg, tcfg);
    CHECK(result.model.cfg.input_dim == 24);
    CHECK(result.model.kind == feature_kind::wav2vec);
    // padded tail dims are constant zero, so their std floors at 1e-8
    CHECK(result.model.feat_std[23] == doctest::Approx(1e-8));
    CHECK(result.model.feat_std[0] > 1e-3);
}

TEST_CASE("early stopping sees unclamped validation scores") {
    // a fresh model emits raw scores near 0; clamped they would all read 1.0
    // and the selection metric would flatline until patience kills the run
    auto p = make_toy(20, 16, 31);
    p.splits = split_dataset(20, 31);
    model_config mcfg;
    mcfg.depth = 2;
    mcfg.input_dim = 16;
    train_config tcfg;
    tcfg.learning_rate = 1e-3;
    tcfg.max_epochs = 30;
    tcfg.seed = 31;

    const auto result = train_on_features(p.features, p.labels, p.splits, mcfg, tcfg, feature_kind::raw);
    REQUIRE(result.history.epochs.size() >= 2);
    // the metric moves from the very first update instead of sticking at
    // the clamp-floor constant
    CHECK(result.history.epochs[0].val_mse != result.history.epochs[1].val_mse);
    double first = result.history.epochs.front().val_mse;
    double best = result.history.epochs[result.history.best_epoch].val_mse;
    CHECK(best < first);
}

TEST_CASE("training rejects empty splits") {
    auto p = make_toy(12, 8, 5);
    p.splits.val.clear();
    model_config mcfg;
    mcfg.depth = 1;
    mcfg.input_dim = 8;
    try {
        train_on_features(p.features, p.labels, p.splits, mcfg, {}, feature_kind::raw);
        FAIL("expected EmptySplit");
    } catch (const error & e) {
        CHECK(e.code() == errc::empty_split);
    }
}

// salf: command line front end for the MOS prediction library. Links the C
// API only; everything here is argument plumbing, table printing and the
// HTTP endpoint.

#include <salf/salf.h>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

int fail_with(salf_status status, const std::string & what) {
    std::fprintf(stderr, "salf: %s: %s (%s)\n", what.c_str(), salf_last_error(),
                 salf_status_name(status));
    return 1;
}

struct manifest_deleter {
    void operator()(salf_manifest * m) const { salf_manifest_free(m); }
};
struct model_deleter {
    void operator()(salf_model * m) const { salf_model_free(m); }
};
struct report_deleter {
    void operator()(salf_report * r) const { salf_report_free(r); }
};
using manifest_handle = std::unique_ptr<salf_manifest, manifest_deleter>;
using model_handle = std::unique_ptr<salf_model, model_deleter>;
using report_handle = std::unique_ptr<salf_report, report_deleter>;

manifest_handle open_manifest(const std::string & path, int & rc) {
    salf_manifest * m = nullptr;
    const auto st = salf_manifest_open(path.c_str(), &m);
    if (st != SALF_OK) {
        rc = fail_with(st, "loading manifest " + path);
        return nullptr;
    }
    return manifest_handle(m);
}

model_handle open_model(const std::string & path, int & rc) {
    salf_model * m = nullptr;
    const auto st = salf_model_open(path.c_str(), &m);
    if (st != SALF_OK) {
        rc = fail_with(st, "loading checkpoint " + path);
        return nullptr;
    }
    return model_handle(m);
}

const char * kind_name(salf_feature_kind kind) {
    switch (kind) {
        case SALF_FEATURE_MFCC:    return "mfcc";
        case SALF_FEATURE_LFCC:    return "lfcc";
        case SALF_FEATURE_WAV2VEC: return "wav2vec";
        case SALF_FEATURE_XVECTOR: return "xvector";
        case SALF_FEATURE_RAW:     return "raw";
    }
    return "unknown";
}

bool kind_from_name(const std::string & name, salf_feature_kind & out) {
    for (auto kind : { SALF_FEATURE_MFCC, SALF_FEATURE_LFCC, SALF_FEATURE_WAV2VEC,
                       SALF_FEATURE_XVECTOR, SALF_FEATURE_RAW }) {
        if (name == kind_name(kind)) {
            out = kind;
            return true;
        }
    }
    return false;
}

std::string metric_cell(double v) {
    if (std::isnan(v)) {
        return "undefined";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void print_report(const salf_report * r) {
    std::printf("  %-12s %zu\n", "utterances", salf_report_size(r));
    std::printf("  %-12s %s\n", "mse", metric_cell(salf_report_mse(r)).c_str());
    std::printf("  %-12s %s\n", "lcc", metric_cell(salf_report_lcc(r)).c_str());
    std::printf("  %-12s %s\n", "srcc", metric_cell(salf_report_srcc(r)).c_str());
    std::printf("  %-12s %s\n", "ktau", metric_cell(salf_report_ktau(r)).c_str());
    std::printf("  %-12s %s\n", "ktau_b", metric_cell(salf_report_ktau_b(r)).c_str());
}

struct train_flags {
    std::string manifest;
    std::string kind = "wav2vec";
    std::string out = "model.slc1";
    std::string history;
    salf_model_params model{};
    salf_train_params train{};
    bool no_standardize = false;
    std::string pool = "max";
};

void add_hyper_flags(CLI::App * cmd, train_flags & f) {
    salf_model_params_default(&f.model);
    salf_train_params_default(&f.train);
    cmd->add_option("--depth", f.model.depth, "double-convolution stages")->capture_default_str();
    cmd->add_option("--input-dim", f.model.input_dim,
                    "padded feature length (0 = derive from the features)")
        ->capture_default_str();
    cmd->add_option("--channels", f.model.channels, "conv channel width")->capture_default_str();
    cmd->add_option("--lfe-dim", f.model.lfe_dim, "latent size per stage")->capture_default_str();
    cmd->add_option("--pool", f.pool, "downsampling operator")
        ->check(CLI::IsMember({ "max", "avg" }))
        ->capture_default_str();
    cmd->add_option("--lr", f.train.learning_rate, "SGD learning rate")->capture_default_str();
    cmd->add_option("--batch-size", f.train.batch_size, "SGD batch size")->capture_default_str();
    cmd->add_option("--patience", f.train.patience, "early-stopping patience (epochs)")
        ->capture_default_str();
    cmd->add_option("--max-epochs", f.train.max_epochs, "epoch cap")->capture_default_str();
    cmd->add_option("--seed", f.train.seed, "seed for split/init/shuffling")->capture_default_str();
    cmd->add_flag("--no-standardize", f.no_standardize, "skip feature standardization");
}

int run_train_once(const salf_manifest * manifest, salf_feature_kind kind, train_flags & f,
                   const std::string & checkpoint, const std::string & history,
                   report_handle * test_report, uint64_t seed) {
    f.model.avg_pool = f.pool == "avg" ? 1 : 0;
    f.train.standardize = f.no_standardize ? 0 : 1;
    f.train.seed = seed;

    salf_model * model = nullptr;
    salf_report * val_report = nullptr;
    const auto st = salf_train(manifest, kind, &f.model, &f.train,
                               checkpoint.empty() ? nullptr : checkpoint.c_str(),
                               history.empty() ? nullptr : history.c_str(),
                               test_report != nullptr ? &model : nullptr,
                               test_report == nullptr ? &val_report : nullptr);
    if (st != SALF_OK) {
        return fail_with(st, "training");
    }
    if (test_report != nullptr) {
        model_handle owned(model);
        salf_report * rep = nullptr;
        const auto est = salf_evaluate(owned.get(), manifest, SALF_SPLIT_TEST, seed, &rep);
        if (est != SALF_OK) {
            return fail_with(est, "evaluating the test split");
        }
        test_report->reset(rep);
    } else {
        report_handle owned(val_report);
        std::printf("validation metrics at the best epoch:\n");
        print_report(owned.get());
    }
    return 0;
}

int cmd_features(const std::string & manifest_path, const std::string & kind_name_str,
                 const std::string & out_dir) {
    salf_feature_kind kind;
    if (!kind_from_name(kind_name_str, kind)) {
        std::fprintf(stderr, "salf: unknown feature kind '%s'\n", kind_name_str.c_str());
        return 1;
    }
    int rc = 0;
    auto manifest = open_manifest(manifest_path, rc);
    if (!manifest) {
        return rc;
    }
    const std::string manifest_out = out_dir + "/manifest.csv";
    const auto st = salf_extract_features(manifest.get(), kind, out_dir.c_str(), manifest_out.c_str());
    if (st != SALF_OK) {
        return fail_with(st, "extracting features");
    }
    std::printf("wrote %zu feature files and %s\n", salf_manifest_size(manifest.get()),
                manifest_out.c_str());
    return 0;
}

int cmd_evaluate(const std::string & checkpoint, const std::string & manifest_path,
                 const std::string & split_name, uint64_t seed, const std::string & out_csv) {
    int rc = 0;
    auto model = open_model(checkpoint, rc);
    if (!model) {
        return rc;
    }
    auto manifest = open_manifest(manifest_path, rc);
    if (!manifest) {
        return rc;
    }
    salf_split split = SALF_SPLIT_TEST;
    if (split_name == "all") {
        split = SALF_SPLIT_ALL;
    } else if (split_name == "train") {
        split = SALF_SPLIT_TRAIN;
    } else if (split_name == "val") {
        split = SALF_SPLIT_VAL;
    } else if (split_name != "test") {
        std::fprintf(stderr, "salf: unknown split '%s'\n", split_name.c_str());
        return 1;
    }
    salf_report * rep = nullptr;
    const auto st = salf_evaluate(model.get(), manifest.get(), split, seed, &rep);
    if (st != SALF_OK) {
        return fail_with(st, "evaluating");
    }
    report_handle owned(rep);
    std::printf("%s split of %s:\n", split_name.c_str(), manifest_path.c_str());
    print_report(owned.get());
    const auto wst = salf_report_write_csv(owned.get(), out_csv.c_str());
    if (wst != SALF_OK) {
        return fail_with(wst, "writing " + out_csv);
    }
    std::printf("per-utterance rows written to %s\n", out_csv.c_str());
    return 0;
}

int cmd_predict(const std::string & checkpoint, const std::string & input) {
    int rc = 0;
    auto model = open_model(checkpoint, rc);
    if (!model) {
        return rc;
    }
    double mos = 0.0;
    const auto st = salf_predict_path(model.get(), input.c_str(), &mos);
    if (st != SALF_OK) {
        return fail_with(st, "predicting " + input);
    }
    std::printf("%.4f\n", mos);
    return 0;
}

int cmd_ablate(const std::string & manifest_path, const std::string & axis,
               const std::string & values_csv, train_flags & f, const std::string & out_csv,
               uint64_t seed) {
    int rc = 0;
    auto manifest = open_manifest(manifest_path, rc);
    if (!manifest) {
        return rc;
    }
    std::vector<std::string> values;
    {
        std::stringstream ss(values_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) {
                values.push_back(tok);
            }
        }
    }
    if (values.empty()) {
        std::fprintf(stderr, "salf: --values is empty\n");
        return 1;
    }

    std::ofstream csv(out_csv);
    if (!csv) {
        std::fprintf(stderr, "salf: cannot open %s\n", out_csv.c_str());
        return 1;
    }
    csv << "value,mse,lcc,srcc,ktau\n";
    std::printf("%-10s %-10s %-10s %-10s %-10s\n", "value", "mse", "lcc", "srcc", "ktau");

    for (const auto & value : values) {
        salf_feature_kind kind;
        if (!kind_from_name(f.kind, kind)) {
            std::fprintf(stderr, "salf: unknown feature kind '%s'\n", f.kind.c_str());
            return 1;
        }
        if (axis == "depth") {
            try {
                f.model.depth = std::stoi(value);
            } catch (const std::exception &) {
                std::fprintf(stderr, "salf: bad depth value '%s'\n", value.c_str());
                return 1;
            }
        } else if (axis == "feature") {
            if (!kind_from_name(value, kind)) {
                std::fprintf(stderr, "salf: unknown feature kind '%s'\n", value.c_str());
                return 1;
            }
        } else {
            std::fprintf(stderr, "salf: unknown axis '%s' (use feature|depth)\n", axis.c_str());
            return 1;
        }
        report_handle report;
        // one shared seed: every run sees the same split, so rows are paired
        const int run_rc = run_train_once(manifest.get(), kind, f, "", "", &report, seed);
        if (run_rc != 0) {
            return run_rc;
        }
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%.10g,%.10g,%.10g,%.10g", value.c_str(),
                      salf_report_mse(report.get()), salf_report_lcc(report.get()),
                      salf_report_srcc(report.get()), salf_report_ktau(report.get()));
        csv << line << "\n";
        std::printf("%-10s %-10s %-10s %-10s %-10s\n", value.c_str(),
                    metric_cell(salf_report_mse(report.get())).c_str(),
                    metric_cell(salf_report_lcc(report.get())).c_str(),
                    metric_cell(salf_report_srcc(report.get())).c_str(),
                    metric_cell(salf_report_ktau(report.get())).c_str());
    }
    std::printf("rows written to %s\n", out_csv.c_str());
    return 0;
}

httplib::Server * g_server = nullptr;

void stop_server(int) {
    if (g_server != nullptr) {
        g_server->stop();
    }
}

int status_to_http(salf_status st) {
    switch (st) {
        case SALF_ERR_KIND_MISMATCH:
            return 422;
        case SALF_ERR_MALFORMED_HEADER:
        case SALF_ERR_UNSUPPORTED_ENCODING:
        case SALF_ERR_EMPTY_AUDIO:
        case SALF_ERR_TOO_SHORT:
        case SALF_ERR_BAD_MAGIC:
        case SALF_ERR_DIM_MISMATCH:
        case SALF_ERR_SHAPE_MISMATCH:
        case SALF_ERR_PARSE:
        case SALF_ERR_INVALID_ARGUMENT:
            return 400;
        default:
            return 500;
    }
}

int cmd_serve(const std::string & checkpoint, const std::string & bind) {
    int rc = 0;
    auto model = open_model(checkpoint, rc);
    if (!model) {
        return rc;
    }
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
        std::fprintf(stderr, "salf: --bind expects host:port\n");
        return 1;
    }
    const std::string host = bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception &) {
        std::fprintf(stderr, "salf: bad port in '%s'\n", bind.c_str());
        return 1;
    }

    httplib::Server server;
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);

    const salf_model * m = model.get();
    server.Get("/health", [m](const httplib::Request &, httplib::Response & res) {
        json body = {
            { "status", "ok" },
            { "depth", salf_model_depth(m) },
            { "input_dim", salf_model_input_dim(m) },
            { "feature_kind", kind_name(salf_model_kind(m)) },
            { "trainable_params", salf_model_trainable_params(m) },
        };
        res.set_content(body.dump(), "application/json");
    });
    server.Post("/predict", [m](const httplib::Request & req, httplib::Response & res) {
        const auto content_type = req.get_header_value("Content-Type");
        double mos = 0.0;
        salf_status st;
        if (content_type == "audio/wav" || content_type == "audio/x-wav") {
            st = salf_predict_wav(m, req.body.data(), req.body.size(), &mos);
        } else if (content_type == "application/octet-stream") {
            st = salf_predict_features(m, req.body.data(), req.body.size(), &mos);
        } else {
            res.status = 400;
            res.set_content(json{ { "error", "content-type must be audio/wav or "
                                             "application/octet-stream" } }
                                .dump(),
                            "application/json");
            return;
        }
        if (st != SALF_OK) {
            res.status = status_to_http(st);
            res.set_content(
                json{ { "error", salf_last_error() }, { "status", salf_status_name(st) } }.dump(),
                "application/json");
            return;
        }
        res.set_content(json{ { "mos", mos } }.dump(), "application/json");
    });

    int actual_port = port;
    if (port == 0) {
        actual_port = server.bind_to_any_port(host);
        if (actual_port <= 0) {
            std::fprintf(stderr, "salf: cannot bind %s\n", bind.c_str());
            return 1;
        }
    } else if (!server.bind_to_port(host, port)) {
        std::fprintf(stderr, "salf: cannot bind %s\n", bind.c_str());
        return 1;
    }
    std::printf("listening on %s:%d\n", host.c_str(), actual_port);
    std::fflush(stdout);
    server.listen_after_bind();
    return 0;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{ "speech MOS prediction toolkit" };
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(salf_version()));

    // features
    std::string f_manifest, f_kind = "mfcc", f_out = "features";
    auto * features = app.add_subcommand("features", "extract cepstral features into SALF-F1 files");
    features->add_option("--manifest", f_manifest, "input manifest CSV")->required();
    features->add_option("--feature-kind", f_kind, "mfcc|lfcc")
        ->check(CLI::IsMember({ "mfcc", "lfcc" }));
    features->add_option("--out", f_out, "output directory")->capture_default_str();

    // train
    train_flags t;
    auto * train = app.add_subcommand("train", "train a model on a manifest");
    train->add_option("--manifest", t.manifest, "input manifest CSV")->required();
    train->add_option("--feature-kind", t.kind, "mfcc|lfcc|wav2vec|xvector")
        ->check(CLI::IsMember({ "mfcc", "lfcc", "wav2vec", "xvector", "raw" }))
        ->capture_default_str();
    train->add_option("--out", t.out, "checkpoint output path")->capture_default_str();
    train->add_option("--history", t.history, "history CSV path (default <out>.history.csv)");
    add_hyper_flags(train, t);

    // evaluate
    std::string e_checkpoint, e_manifest, e_split = "test", e_out = "eval_report.csv";
    uint64_t e_seed = 0;
    auto * evaluate = app.add_subcommand("evaluate", "report MSE/LCC/SRCC/KTAU on a split");
    evaluate->add_option("--checkpoint", e_checkpoint, "trained model")->required();
    evaluate->add_option("--manifest", e_manifest, "manifest CSV")->required();
    evaluate->add_option("--split", e_split, "all|train|val|test")
        ->check(CLI::IsMember({ "all", "train", "val", "test" }))
        ->capture_default_str();
    evaluate->add_option("--seed", e_seed, "split seed (match the training run)")
        ->capture_default_str();
    evaluate->add_option("--out", e_out, "per-utterance CSV path")->capture_default_str();

    // predict
    std::string p_checkpoint, p_input;
    auto * predict = app.add_subcommand("predict", "predict MOS for one WAV or SALF-F1 file");
    predict->add_option("--checkpoint", p_checkpoint, "trained model")->required();
    predict->add_option("input", p_input, "WAV or SALF-F1 file")->required();

    // ablate
    train_flags a;
    std::string a_axis = "depth", a_values = "1,2,3,4,5,6,7,8", a_out = "ablate.csv";
    auto * ablate = app.add_subcommand("ablate", "sweep depth or feature kind, one row per value");
    ablate->add_option("--manifest", a.manifest, "manifest CSV")->required();
    ablate->add_option("--axis", a_axis, "feature|depth")
        ->check(CLI::IsMember({ "feature", "depth" }))
        ->capture_default_str();
    ablate->add_option("--values", a_values, "comma-separated sweep values")->capture_default_str();
    ablate->add_option("--feature-kind", a.kind, "kind for the depth axis")->capture_default_str();
    ablate->add_option("--out", a_out, "results CSV")->capture_default_str();
    add_hyper_flags(ablate, a);

    // serve
    std::string s_checkpoint, s_bind = "127.0.0.1:8080";
    auto * serve = app.add_subcommand("serve", "HTTP inference endpoint");
    serve->add_option("--checkpoint", s_checkpoint, "trained model")->required();
    serve->add_option("--bind", s_bind, "host:port (port 0 picks one)")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (features->parsed()) {
        return cmd_features(f_manifest, f_kind, f_out);
    }
    if (train->parsed()) {
        salf_feature_kind kind;
        if (!kind_from_name(t.kind, kind)) {
            std::fprintf(stderr, "salf: unknown feature kind '%s'\n", t.kind.c_str());
            return 1;
        }
        int rc = 0;
        auto manifest = open_manifest(t.manifest, rc);
        if (!manifest) {
            return rc;
        }
        const std::string history = t.history.empty() ? t.out + ".history.csv" : t.history;
        const int run_rc = run_train_once(manifest.get(), kind, t, t.out, history, nullptr, t.train.seed);
        if (run_rc == 0) {
            std::printf("checkpoint written to %s, history to %s\n", t.out.c_str(), history.c_str());
        }
        return run_rc;
    }
    if (evaluate->parsed()) {
        return cmd_evaluate(e_checkpoint, e_manifest, e_split, e_seed, e_out);
    }
    if (predict->parsed()) {
        return cmd_predict(p_checkpoint, p_input);
    }
    if (ablate->parsed()) {
        return cmd_ablate(a.manifest, a_axis, a_values, a, a_out, a.train.seed);
    }
    if (serve->parsed()) {
        return cmd_serve(s_checkpoint, s_bind);
    }
    return 1;
}

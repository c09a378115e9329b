#include "salf/salf.h"

#include "audio_io.h"
#include "dataset.h"
#include "dsp_features.h"
#include "error.h"
#include "io_util.h"
#include "metrics.h"
#include "model.h"
#include "training.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <vector>

// opaque handles
struct salf_manifest {
    salf::manifest m;
};
struct salf_model {
    salf::mos_model m;
};
struct salf_report {
    salf::eval_report r;
};

namespace {

thread_local std::string t_last_error;

salf_status status_from_errc(salf::errc code) {
    using salf::errc;
    switch (code) {
        case errc::io_failure:           return SALF_ERR_IO;
        case errc::malformed_header:     return SALF_ERR_MALFORMED_HEADER;
        case errc::unsupported_encoding: return SALF_ERR_UNSUPPORTED_ENCODING;
        case errc::empty_audio:          return SALF_ERR_EMPTY_AUDIO;
        case errc::too_short:            return SALF_ERR_TOO_SHORT;
        case errc::bad_magic:            return SALF_ERR_BAD_MAGIC;
        case errc::dim_mismatch:         return SALF_ERR_DIM_MISMATCH;
        case errc::shape_mismatch:       return SALF_ERR_SHAPE_MISMATCH;
        case errc::degenerate_batch:     return SALF_ERR_DEGENERATE_BATCH;
        case errc::odd_length:           return SALF_ERR_ODD_LENGTH;
        case errc::not_scalar:           return SALF_ERR_NOT_SCALAR;
        case errc::bad_config:           return SALF_ERR_BAD_CONFIG;
        case errc::version_unsupported:  return SALF_ERR_VERSION_UNSUPPORTED;
        case errc::config_mismatch:      return SALF_ERR_CONFIG_MISMATCH;
        case errc::too_few_utterances:   return SALF_ERR_TOO_FEW_UTTERANCES;
        case errc::too_few_samples:      return SALF_ERR_TOO_FEW_SAMPLES;
        case errc::feature_dim_mismatch: return SALF_ERR_FEATURE_DIM_MISMATCH;
        case errc::empty_split:          return SALF_ERR_EMPTY_SPLIT;
        case errc::length_mismatch:      return SALF_ERR_LENGTH_MISMATCH;
        case errc::constant_input:       return SALF_ERR_CONSTANT_INPUT;
        case errc::all_tied:             return SALF_ERR_ALL_TIED;
        case errc::duplicate_id:         return SALF_ERR_DUPLICATE_ID;
        case errc::mos_out_of_range:     return SALF_ERR_MOS_OUT_OF_RANGE;
        case errc::missing_path:         return SALF_ERR_MISSING_PATH;
        case errc::parse:                return SALF_ERR_PARSE;
        case errc::kind_mismatch:        return SALF_ERR_KIND_MISMATCH;
        case errc::invalid_argument:     return SALF_ERR_INVALID_ARGUMENT;
        case errc::internal:             return SALF_ERR_INTERNAL;
    }
    return SALF_ERR_INTERNAL;
}

// run fn, converting exceptions into status codes + t_last_error
template <typename Fn>
salf_status guarded(Fn && fn) {
    try {
        fn();
        t_last_error.clear();
        return SALF_OK;
    } catch (const salf::error & e) {
        t_last_error = e.what();
        return status_from_errc(e.code());
    } catch (const std::bad_alloc &) {
        t_last_error = "out of memory";
        return SALF_ERR_INTERNAL;
    } catch (const std::exception & e) {
        t_last_error = e.what();
        return SALF_ERR_INTERNAL;
    }
}

salf_status invalid(const char * msg) {
    t_last_error = msg;
    return SALF_ERR_INVALID_ARGUMENT;
}

salf::feature_kind to_kind(salf_feature_kind kind) {
    return static_cast<salf::feature_kind>(kind);
}

} // namespace

extern "C" {

const char * salf_version(void) {
    return "0.1.0";
}

const char * salf_status_name(salf_status status) {
    switch (status) {
        case SALF_OK:                       return "Ok";
        case SALF_ERR_IO:                   return "IoFailure";
        case SALF_ERR_MALFORMED_HEADER:     return "MalformedHeader";
        case SALF_ERR_UNSUPPORTED_ENCODING: return "UnsupportedEncoding";
        case SALF_ERR_EMPTY_AUDIO:          return "EmptyAudio";
        case SALF_ERR_TOO_SHORT:            return "TooShort";
        case SALF_ERR_BAD_MAGIC:            return "BadMagic";
        case SALF_ERR_DIM_MISMATCH:         return "DimMismatch";
        case SALF_ERR_SHAPE_MISMATCH:       return "ShapeMismatch";
        case SALF_ERR_DEGENERATE_BATCH:     return "DegenerateBatch";
        case SALF_ERR_ODD_LENGTH:           return "OddLength";
        case SALF_ERR_NOT_SCALAR:           return "NotScalar";
        case SALF_ERR_BAD_CONFIG:           return "BadConfig";
        case SALF_ERR_VERSION_UNSUPPORTED:  return "VersionUnsupported";
        case SALF_ERR_CONFIG_MISMATCH:      return "ConfigMismatch";
        case SALF_ERR_TOO_FEW_UTTERANCES:   return "TooFewUtterances";
        case SALF_ERR_TOO_FEW_SAMPLES:      return "TooFewSamples";
        case SALF_ERR_FEATURE_DIM_MISMATCH: return "FeatureDimMismatch";
        case SALF_ERR_EMPTY_SPLIT:          return "EmptySplit";
        case SALF_ERR_LENGTH_MISMATCH:      return "LengthMismatch";
        case SALF_ERR_CONSTANT_INPUT:       return "ConstantInput";
        case SALF_ERR_ALL_TIED:             return "AllTied";
        case SALF_ERR_DUPLICATE_ID:         return "DuplicateId";
        case SALF_ERR_MOS_OUT_OF_RANGE:     return "MosOutOfRange";
        case SALF_ERR_MISSING_PATH:         return "MissingPath";
        case SALF_ERR_PARSE:                return "ParseError";
        case SALF_ERR_KIND_MISMATCH:        return "KindMismatch";
        case SALF_ERR_INVALID_ARGUMENT:     return "InvalidArgument";
        case SALF_ERR_INTERNAL:             return "Internal";
    }
    return "Unknown";
}

const char * salf_last_error(void) {
    return t_last_error.c_str();
}

//
// manifest
//

salf_status salf_manifest_open(const char * path, salf_manifest ** out) {
    if (path == nullptr || out == nullptr) {
        return invalid("salf_manifest_open: null argument");
    }
    return guarded([&] {
        auto handle = std::make_unique<salf_manifest>();
        handle->m = salf::load_manifest(path);
        *out = handle.release();
    });
}

void salf_manifest_free(salf_manifest * m) {
    delete m;
}

size_t salf_manifest_size(const salf_manifest * m) {
    return m == nullptr ? 0 : m->m.utterances.size();
}

const char * salf_manifest_utterance_id(const salf_manifest * m, size_t index) {
    if (m == nullptr || index >= m->m.utterances.size()) {
        return nullptr;
    }
    return m->m.utterances[index].id.c_str();
}

double salf_manifest_mos(const salf_manifest * m, size_t index) {
    if (m == nullptr || index >= m->m.utterances.size()) {
        return 0.0;
    }
    return m->m.utterances[index].mos;
}

salf_status salf_extract_features(const salf_manifest * m, salf_feature_kind kind,
                                  const char * out_dir, const char * manifest_out) {
    if (m == nullptr || out_dir == nullptr || manifest_out == nullptr) {
        return invalid("salf_extract_features: null argument");
    }
    if (kind != SALF_FEATURE_MFCC && kind != SALF_FEATURE_LFCC) {
        return invalid("salf_extract_features: only mfcc/lfcc can be computed natively");
    }
    return guarded([&] {
        std::filesystem::create_directories(out_dir);
        salf::manifest updated = m->m;
        const salf::cepstral_config cfg;
        std::string failures;
        for (auto & u : updated.utterances) {
            try {
                salf::check(!u.audio_path.empty(), salf::errc::missing_path, "no audio_path");
                auto buf = salf::read_wav_file(salf::resolve_path(updated.dir, u.audio_path));
                buf = salf::resample(buf, salf::working_sample_rate);
                const auto fm = kind == SALF_FEATURE_MFCC ? salf::mfcc(buf, cfg) : salf::lfcc(buf, cfg);
                const std::string fname = u.id + ".slf1";
                salf::write_feature_file(fm, (std::filesystem::path(out_dir) / fname).string());
                // keep the original audio path usable from the new location
                u.audio_path = salf::resolve_path(updated.dir, u.audio_path);
                u.feature_path = fname;
            } catch (const salf::error & e) {
                if (!failures.empty()) {
                    failures += "; ";
                }
                failures += u.id;
                failures += ": ";
                failures += e.what();
            }
        }
        if (!failures.empty()) {
            salf::fail(salf::errc::io_failure, "feature extraction failed for: " + failures);
        }
        updated.dir = out_dir;
        salf::save_manifest(updated, manifest_out);
    });
}

//
// training
//

void salf_model_params_default(salf_model_params * p) {
    if (p == nullptr) {
        return;
    }
    p->depth = 4;
    p->input_dim = 0; // derive from the features
    p->channels = 1;
    p->lfe_dim = 1;
    p->avg_pool = 0;
}

void salf_train_params_default(salf_train_params * p) {
    if (p == nullptr) {
        return;
    }
    salf::train_config defaults;
    p->learning_rate = defaults.learning_rate;
    p->batch_size = defaults.batch_size;
    p->max_epochs = defaults.max_epochs;
    p->patience = defaults.patience;
    p->seed = defaults.seed;
    p->standardize = defaults.standardize ? 1 : 0;
}

salf_status salf_train(const salf_manifest * m, salf_feature_kind kind,
                       const salf_model_params * model_params,
                       const salf_train_params * train_params, const char * checkpoint_out,
                       const char * history_csv_out, salf_model ** model_out,
                       salf_report ** val_report_out) {
    if (m == nullptr) {
        return invalid("salf_train: null manifest");
    }
    return guarded([&] {
        salf::model_config mcfg;
        if (model_params != nullptr) {
            mcfg.depth = model_params->depth;
            mcfg.input_dim = model_params->input_dim;
            mcfg.channels = model_params->channels;
            mcfg.lfe_dim = model_params->lfe_dim;
            mcfg.pool = model_params->avg_pool != 0 ? salf::pool_kind::avg : salf::pool_kind::max;
        } else {
            mcfg.input_dim = 0;
        }
        salf::train_config tcfg;
        if (train_params != nullptr) {
            tcfg.learning_rate = train_params->learning_rate;
            tcfg.batch_size = train_params->batch_size;
            tcfg.max_epochs = train_params->max_epochs;
            tcfg.patience = train_params->patience;
            tcfg.seed = train_params->seed;
            tcfg.standardize = train_params->standardize != 0;
        }

        auto result = salf::train(m->m, to_kind(kind), mcfg, tcfg);
        if (checkpoint_out != nullptr) {
            salf::save_checkpoint(result.model, checkpoint_out);
        }
        if (history_csv_out != nullptr) {
            salf::write_history_csv(result.history, history_csv_out);
        }
        if (val_report_out != nullptr) {
            const auto splits = salf::split_dataset(m->m.utterances.size(), tcfg.seed);
            auto report = std::make_unique<salf_report>();
            report->r = salf::evaluate(result.model, m->m, splits.val);
            *val_report_out = report.release();
        }
        if (model_out != nullptr) {
            auto handle = std::make_unique<salf_model>();
            handle->m = std::move(result.model);
            *model_out = handle.release();
        }
    });
}

//
// model
//

salf_status salf_model_open(const char * checkpoint_path, salf_model ** out) {
    if (checkpoint_path == nullptr || out == nullptr) {
        return invalid("salf_model_open: null argument");
    }
    return guarded([&] {
        auto handle = std::make_unique<salf_model>();
        handle->m = salf::load_checkpoint(checkpoint_path);
        *out = handle.release();
    });
}

salf_status salf_model_save(const salf_model * m, const char * checkpoint_path) {
    if (m == nullptr || checkpoint_path == nullptr) {
        return invalid("salf_model_save: null argument");
    }
    return guarded([&] { salf::save_checkpoint(m->m, checkpoint_path); });
}

void salf_model_free(salf_model * m) {
    delete m;
}

int salf_model_depth(const salf_model * m) {
    return m == nullptr ? 0 : m->m.cfg.depth;
}

int salf_model_input_dim(const salf_model * m) {
    return m == nullptr ? 0 : static_cast<int>(m->m.cfg.input_dim);
}

salf_feature_kind salf_model_kind(const salf_model * m) {
    return m == nullptr ? SALF_FEATURE_RAW : static_cast<salf_feature_kind>(m->m.kind);
}

size_t salf_model_trainable_params(const salf_model * m) {
    if (m == nullptr) {
        return 0;
    }
    size_t total = 0;
    for (const auto & p : m->m.parameters()) {
        total += p->data.size();
    }
    return total;
}

salf_status salf_predict_wav(const salf_model * m, const void * bytes, size_t len, double * mos_out) {
    if (m == nullptr || bytes == nullptr || mos_out == nullptr) {
        return invalid("salf_predict_wav: null argument");
    }
    return guarded([&] {
        const auto kind = m->m.kind;
        if (kind != salf::feature_kind::mfcc && kind != salf::feature_kind::lfcc) {
            salf::fail(salf::errc::kind_mismatch,
                       std::string("model expects ") + salf::feature_kind_name(kind) +
                           " features; raw audio needs an mfcc/lfcc model");
        }
        auto buf = salf::read_wav({ static_cast<const uint8_t *>(bytes), len });
        buf = salf::resample(buf, salf::working_sample_rate);
        const auto fm = kind == salf::feature_kind::mfcc ? salf::mfcc(buf) : salf::lfcc(buf);
        *mos_out = salf::predict(m->m, salf::mean_pool(fm));
    });
}

salf_status salf_predict_features(const salf_model * m, const void * bytes, size_t len,
                                  double * mos_out) {
    if (m == nullptr || bytes == nullptr || mos_out == nullptr) {
        return invalid("salf_predict_features: null argument");
    }
    return guarded([&] {
        const auto fm = salf::parse_feature_matrix({ static_cast<const uint8_t *>(bytes), len });
        if (fm.kind != m->m.kind) {
            salf::fail(salf::errc::kind_mismatch,
                       std::string("feature file holds ") + salf::feature_kind_name(fm.kind) +
                           ", model expects " + salf::feature_kind_name(m->m.kind));
        }
        *mos_out = salf::predict(m->m, salf::mean_pool(fm));
    });
}

salf_status salf_predict_path(const salf_model * m, const char * path, double * mos_out) {
    if (m == nullptr || path == nullptr || mos_out == nullptr) {
        return invalid("salf_predict_path: null argument");
    }
    std::vector<uint8_t> bytes;
    const auto st = guarded([&] { bytes = salf::read_file_bytes(path); });
    if (st != SALF_OK) {
        return st;
    }
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "RIFF", 4) == 0) {
        return salf_predict_wav(m, bytes.data(), bytes.size(), mos_out);
    }
    return salf_predict_features(m, bytes.data(), bytes.size(), mos_out);
}

//
// evaluation
//

salf_status salf_evaluate(const salf_model * m, const salf_manifest * manifest, salf_split split,
                          uint64_t seed, salf_report ** out) {
    if (m == nullptr || manifest == nullptr || out == nullptr) {
        return invalid("salf_evaluate: null argument");
    }
    return guarded([&] {
        std::vector<size_t> indices;
        if (split == SALF_SPLIT_ALL) {
            indices.resize(manifest->m.utterances.size());
            for (size_t i = 0; i < indices.size(); ++i) {
                indices[i] = i;
            }
        } else {
            const auto splits = salf::split_dataset(manifest->m.utterances.size(), seed);
            switch (split) {
                case SALF_SPLIT_TRAIN: indices = splits.train; break;
                case SALF_SPLIT_VAL:   indices = splits.val; break;
                case SALF_SPLIT_TEST:  indices = splits.test; break;
                default:               salf::fail(salf::errc::invalid_argument, "bad split");
            }
        }
        auto report = std::make_unique<salf_report>();
        report->r = salf::evaluate(m->m, manifest->m, indices);
        *out = report.release();
    });
}

void salf_report_free(salf_report * r) {
    delete r;
}

double salf_report_mse(const salf_report * r) {
    return r == nullptr ? 0.0 : r->r.mse;
}

double salf_report_lcc(const salf_report * r) {
    return r == nullptr ? 0.0 : r->r.lcc;
}

double salf_report_srcc(const salf_report * r) {
    return r == nullptr ? 0.0 : r->r.srcc;
}

double salf_report_ktau(const salf_report * r) {
    return r == nullptr ? 0.0 : r->r.ktau;
}

double salf_report_ktau_b(const salf_report * r) {
    return r == nullptr ? 0.0 : r->r.ktau_b;
}

size_t salf_report_size(const salf_report * r) {
    return r == nullptr ? 0 : r->r.actual.size();
}

const char * salf_report_utterance_id(const salf_report * r, size_t index) {
    if (r == nullptr || index >= r->r.ids.size()) {
        return nullptr;
    }
    return r->r.ids[index].c_str();
}

double salf_report_actual(const salf_report * r, size_t index) {
    return r == nullptr || index >= r->r.actual.size() ? 0.0 : r->r.actual[index];
}

double salf_report_predicted(const salf_report * r, size_t index) {
    return r == nullptr || index >= r->r.predicted.size() ? 0.0 : r->r.predicted[index];
}

salf_status salf_report_write_csv(const salf_report * r, const char * path) {
    if (r == nullptr || path == nullptr) {
        return invalid("salf_report_write_csv: null argument");
    }
    return guarded([&] { salf::write_report_csv(r->r, path); });
}

} // extern "C"

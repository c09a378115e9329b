// salf.h - C API for the SALF-MOS speech quality prediction library.
//
// The library predicts mean opinion scores (MOS, 1..5) for speech audio with
// a small 1-D convolutional network. Feature inputs are either computed
// natively (MFCC / LFCC from WAV audio) or ingested from SALF-F1 feature
// files produced by external extractors (wav2vec, x-vector).
//
// All functions return SALF_OK on success. On failure they return an error
// code and leave a human readable message in salf_last_error() (thread
// local). Handles are opaque and must be released with the matching _free
// function.

#ifndef SALF_H
#define SALF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifdef _WIN32
#    define SALF_API __declspec(dllexport)
#else
#    define SALF_API __attribute__((visibility("default")))
#endif

typedef enum salf_status {
    SALF_OK = 0,
    SALF_ERR_IO,                   // file could not be read/written
    SALF_ERR_MALFORMED_HEADER,     // not a RIFF/WAVE container
    SALF_ERR_UNSUPPORTED_ENCODING, // wav encoding other than pcm16 / float32
    SALF_ERR_EMPTY_AUDIO,          // wav with zero samples
    SALF_ERR_TOO_SHORT,            // audio shorter than one analysis frame
    SALF_ERR_BAD_MAGIC,            // wrong magic in SALF-F1 / SALF-C1 file
    SALF_ERR_DIM_MISMATCH,         // header dims disagree with payload size
    SALF_ERR_SHAPE_MISMATCH,       // tensor/input shape mismatch
    SALF_ERR_DEGENERATE_BATCH,     // batch norm fed fewer than 2 values
    SALF_ERR_ODD_LENGTH,           // pooling over an odd length
    SALF_ERR_NOT_SCALAR,           // backward from a non-scalar
    SALF_ERR_BAD_CONFIG,           // invalid model configuration
    SALF_ERR_VERSION_UNSUPPORTED,  // checkpoint format version unknown
    SALF_ERR_CONFIG_MISMATCH,      // checkpoint config inconsistent
    SALF_ERR_TOO_FEW_UTTERANCES,   // dataset too small to split 8:1:1
    SALF_ERR_TOO_FEW_SAMPLES,      // standardizer needs >= 2 utterances
    SALF_ERR_FEATURE_DIM_MISMATCH, // inconsistent feature dims in a corpus
    SALF_ERR_EMPTY_SPLIT,          // requested split has no utterances
    SALF_ERR_LENGTH_MISMATCH,      // metric input vectors differ in length
    SALF_ERR_CONSTANT_INPUT,       // correlation undefined (constant vector)
    SALF_ERR_ALL_TIED,             // kendall tau undefined (all pairs tied)
    SALF_ERR_DUPLICATE_ID,         // manifest contains a repeated id
    SALF_ERR_MOS_OUT_OF_RANGE,     // mos label outside [1, 5]
    SALF_ERR_MISSING_PATH,         // utterance lacks the required path
    SALF_ERR_PARSE,                // malformed manifest / file contents
    SALF_ERR_KIND_MISMATCH,        // feature kind differs from the requested
    SALF_ERR_INVALID_ARGUMENT,
    SALF_ERR_INTERNAL,
} salf_status;

typedef enum salf_feature_kind {
    SALF_FEATURE_MFCC    = 0,
    SALF_FEATURE_LFCC    = 1,
    SALF_FEATURE_WAV2VEC = 2,
    SALF_FEATURE_XVECTOR = 3,
    SALF_FEATURE_RAW     = 4,
} salf_feature_kind;

typedef struct salf_manifest salf_manifest; // dataset index (id, paths, mos)
typedef struct salf_model    salf_model;    // trained network + standardizer
typedef struct salf_report   salf_report;   // evaluation result

SALF_API const char * salf_version(void);
SALF_API const char * salf_status_name(salf_status status);

// Message for the most recent failure on the calling thread. Never NULL.
SALF_API const char * salf_last_error(void);

//
// manifest
//
// CSV with header `id,audio_path,feature_path,mos,ratings`; ratings are
// pipe-separated and, when present, override mos with their mean. Relative
// paths are resolved against the manifest's directory.

SALF_API salf_status salf_manifest_open(const char * path, salf_manifest ** out);
SALF_API void        salf_manifest_free(salf_manifest * m);
SALF_API size_t      salf_manifest_size(const salf_manifest * m);
SALF_API const char * salf_manifest_utterance_id(const salf_manifest * m, size_t index);
SALF_API double      salf_manifest_mos(const salf_manifest * m, size_t index);

// Extract kind features for every utterance into out_dir (one SALF-F1 file
// per utterance) and write an updated manifest with feature_path filled to
// manifest_out. Per-utterance failures are collected into salf_last_error()
// and reported as a single non-OK status.
SALF_API salf_status salf_extract_features(const salf_manifest * m,
                                           salf_feature_kind     kind,
                                           const char *          out_dir,
                                           const char *          manifest_out);

//
// training
//

typedef struct salf_model_params {
    int depth;     // number of double-convolution stages (default 4)
    int input_dim; // padded feature length; 0 = derive from the features
    int channels;  // conv width (default 1)
    int lfe_dim;   // latent feature size per stage (default 1)
    int avg_pool;  // nonzero = average pooling instead of max pooling
} salf_model_params;

typedef struct salf_train_params {
    double   learning_rate; // default 1e-4
    int      batch_size;    // default 4
    int      max_epochs;    // default 1000
    int      patience;      // early stopping patience, default 20
    uint64_t seed;          // drives split, init and batch shuffling
    int      standardize;   // nonzero = per-dimension feature standardization
} salf_train_params;

SALF_API void salf_model_params_default(salf_model_params * p);
SALF_API void salf_train_params_default(salf_train_params * p);

// Train on the manifest (split 8:1:1 by seed), write the best-epoch
// checkpoint to checkpoint_out and the per-epoch history CSV to
// history_csv_out (either may be NULL to skip). Optionally returns the
// trained model and the validation report of the returned model.
SALF_API salf_status salf_train(const salf_manifest *     m,
                                salf_feature_kind         kind,
                                const salf_model_params * model_params,
                                const salf_train_params * train_params,
                                const char *              checkpoint_out,
                                const char *              history_csv_out,
                                salf_model **             model_out,
                                salf_report **            val_report_out);

//
// model
//

SALF_API salf_status salf_model_open(const char * checkpoint_path, salf_model ** out);
SALF_API salf_status salf_model_save(const salf_model * m, const char * checkpoint_path);
SALF_API void        salf_model_free(salf_model * m);

SALF_API int               salf_model_depth(const salf_model * m);
SALF_API int               salf_model_input_dim(const salf_model * m);
SALF_API salf_feature_kind salf_model_kind(const salf_model * m);
SALF_API size_t            salf_model_trainable_params(const salf_model * m);

// Predict MOS from in-memory WAV bytes. Requires a model trained on mfcc or
// lfcc features; SSL-feature models return SALF_ERR_KIND_MISMATCH.
SALF_API salf_status salf_predict_wav(const salf_model * m, const void * bytes, size_t len, double * mos_out);

// Predict MOS from in-memory SALF-F1 bytes; the file's feature kind must
// match the model's.
SALF_API salf_status salf_predict_features(const salf_model * m, const void * bytes, size_t len, double * mos_out);

// Predict from a file path; the format is sniffed from the leading magic
// (RIFF or SLF1).
SALF_API salf_status salf_predict_path(const salf_model * m, const char * path, double * mos_out);

//
// evaluation
//

typedef enum salf_split {
    SALF_SPLIT_ALL = 0,
    SALF_SPLIT_TRAIN,
    SALF_SPLIT_VAL,
    SALF_SPLIT_TEST,
} salf_split;

// Evaluate the model on one split of the manifest (the 8:1:1 partition is
// re-derived from seed, so it matches a training run with the same seed).
SALF_API salf_status salf_evaluate(const salf_model *    m,
                                   const salf_manifest * manifest,
                                   salf_split            split,
                                   uint64_t              seed,
                                   salf_report **        out);

SALF_API void   salf_report_free(salf_report * r);
SALF_API double salf_report_mse(const salf_report * r);
// Correlations are NaN when undefined (e.g. a constant prediction vector).
SALF_API double salf_report_lcc(const salf_report * r);
SALF_API double salf_report_srcc(const salf_report * r);
SALF_API double salf_report_ktau(const salf_report * r);   // ties excluded
SALF_API double salf_report_ktau_b(const salf_report * r); // tie-corrected
SALF_API size_t salf_report_size(const salf_report * r);
SALF_API const char * salf_report_utterance_id(const salf_report * r, size_t index);
SALF_API double salf_report_actual(const salf_report * r, size_t index);
SALF_API double salf_report_predicted(const salf_report * r, size_t index);

// Write per-utterance rows (utterance_id,actual,predicted) plus a trailing
// summary line with the four metrics.
SALF_API salf_status salf_report_write_csv(const salf_report * r, const char * path);

#ifdef __cplusplus
}
#endif

#endif // SALF_H

#pragma once

// The MOS network: depth double-convolution stages over a single-channel
// feature vector, a per-stage linear latent head tapped before each
// downsampling step, the stacked latents, and a final linear head producing
// the score. Also owns the SALF-C1 checkpoint format.

#include "autodiff.h"
#include "dsp_features.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace salf {

enum class pool_kind : uint8_t { max = 0, avg = 1 };

struct model_config {
    int depth = 4;
    int64_t input_dim = 512; // must be divisible by 2^(depth-1)
    int channels = 1;
    int lfe_dim = 1;
    pool_kind pool = pool_kind::max;
    bool clamp_output = true; // clamp eval predictions into [1, 5]
};

void validate_config(const model_config & cfg); // throws BadConfig

// smallest multiple of 2^(depth-1) that fits raw_dim
int64_t padded_dim(int64_t raw_dim, int depth);

// trainable parameters only (conv w/b, bn gamma/beta, lfe w/b, final w/b);
// running stats excluded
size_t param_count(const model_config & cfg);

struct conv_bn_unit {
    ad::tensor_ptr w;     // (C_out, C_in, 3)
    ad::tensor_ptr b;     // (C_out)
    ad::tensor_ptr gamma; // (C)
    ad::tensor_ptr beta;  // (C)
    ad::bn_state bn;
};

struct double_conv_block {
    conv_bn_unit first;
    conv_bn_unit second;
};

struct linear_layer {
    ad::tensor_ptr w; // (out, in)
    ad::tensor_ptr b; // (out)
};

struct mos_model {
    model_config cfg;
    feature_kind kind = feature_kind::wav2vec; // features this model was trained on
    std::vector<double> feat_mean;             // standardizer, input_dim entries
    std::vector<double> feat_std;              // floored at 1e-8
    std::vector<double_conv_block> blocks;     // depth entries
    std::vector<linear_layer> lfe;             // depth heads, stage length -> lfe_dim
    linear_layer head;                         // depth*lfe_dim -> 1

    // trainable tensors in fixed construction order
    std::vector<ad::tensor_ptr> parameters() const;
    int64_t stage_length(int stage) const { return cfg.input_dim >> stage; }
};

// deterministic initialization: weights uniform in +-1/sqrt(fan_in), biases
// zero, gamma 1, beta 0, running stats (0, 1)
mos_model build_model(const model_config & cfg, uint64_t seed,
                      feature_kind kind = feature_kind::wav2vec);

// batched forward over pre-standardized rows of length input_dim; returns
// the (B, 1) prediction tensor on the tape (unclamped)
ad::tensor_ptr forward_batch(mos_model & m, const std::vector<std::vector<double>> & rows,
                             bool training, ad::tape & t);

// zero-pad to input_dim, standardize, run one eval-mode forward, clamp to
// [1, 5] when cfg.clamp_output; never mutates the model. The apply_clamp
// overload exists for model selection during training, where clamp
// saturation would hide early progress.
double predict(const mos_model & m, std::span<const double> raw_features);
std::vector<double> predict_batch(const mos_model & m,
                                  const std::vector<std::vector<double>> & raw_rows);
std::vector<double> predict_batch(const mos_model & m,
                                  const std::vector<std::vector<double>> & raw_rows,
                                  bool apply_clamp);

// zero-pad + standardize one raw feature vector to input_dim
std::vector<double> prepare_input(const mos_model & m, std::span<const double> raw_features);

// SALF-C1 checkpoint: magic "SLC1", u16 version, config block (depth u8,
// input_dim u32, channels u8, lfe_dim u8, pool u8, feature_kind u8),
// standardizer (2 x input_dim f32), trainable parameters in construction
// order (f32), then batch-norm running stats (f32). Little-endian.
std::vector<uint8_t> serialize_checkpoint(const mos_model & m);
mos_model parse_checkpoint(std::span<const uint8_t> bytes);
void save_checkpoint(const mos_model & m, const std::string & path);
mos_model load_checkpoint(const std::string & path);

} // namespace salf

#pragma once

// Frame-level cepstral features (MFCC / LFCC), temporal mean pooling, and
// the SALF-F1 feature file format used to ingest externally computed
// features (wav2vec, x-vector).

#include "audio_io.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace salf {

enum class feature_kind : uint8_t {
    mfcc    = 0,
    lfcc    = 1,
    wav2vec = 2,
    xvector = 3,
    raw     = 4,
};

const char * feature_kind_name(feature_kind kind);
feature_kind feature_kind_from_name(const std::string & name);

struct feature_matrix {
    uint32_t rows = 0; // frames
    uint32_t cols = 0; // dims
    std::vector<float> data; // row-major, rows * cols
    feature_kind kind = feature_kind::raw;

    float at(uint32_t r, uint32_t c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

struct cepstral_config {
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    int num_filters = 40;
    int num_coeffs = 20;
    double pre_emphasis = 0.97;
    int fft_size = 512; // power of two, >= samples per frame
    double log_floor = 1e-10;
};

constexpr int working_sample_rate = 16000;

// Standard cepstral pipeline: pre-emphasis, 25 ms / 10 ms Hann frames, power
// spectrum, triangular filterbank (HTK mel scale for mfcc, linear spacing
// for lfcc, 0..8000 Hz), floored log, orthonormal DCT-II. The buffer must be
// at the 16 kHz working rate and at least one frame long.
feature_matrix mfcc(const audio_buffer & buf, const cepstral_config & cfg = {});
feature_matrix lfcc(const audio_buffer & buf, const cepstral_config & cfg = {});

// Element-wise mean over the frame axis; output length = cols.
std::vector<double> mean_pool(const feature_matrix & fm);

// SALF-F1: magic "SLF1", u8 kind, u32 rows, u32 cols, rows*cols float32
// row-major, all little-endian.
std::vector<uint8_t> serialize_feature_matrix(const feature_matrix & fm);
feature_matrix parse_feature_matrix(std::span<const uint8_t> bytes);
void write_feature_file(const feature_matrix & fm, const std::string & path);
feature_matrix read_feature_file(const std::string & path);

// exposed for the filterbank/DCT property tests
std::vector<std::vector<double>> make_filterbank(const cepstral_config & cfg, bool mel_scale);
std::vector<std::vector<double>> make_dct_basis(int num_coeffs, int num_filters);

} // namespace salf

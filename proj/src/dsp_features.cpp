#include "dsp_features.h"

#include "error.h"
#include "io_util.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

namespace salf {

const char * feature_kind_name(feature_kind kind) {
    switch (kind) {
        case feature_kind::mfcc:    return "mfcc";
        case feature_kind::lfcc:    return "lfcc";
        case feature_kind::wav2vec: return "wav2vec";
        case feature_kind::xvector: return "xvector";
        case feature_kind::raw:     return "raw";
    }
    return "unknown";
}

feature_kind feature_kind_from_name(const std::string & name) {
    if (name == "mfcc")    return feature_kind::mfcc;
    if (name == "lfcc")    return feature_kind::lfcc;
    if (name == "wav2vec") return feature_kind::wav2vec;
    if (name == "xvector") return feature_kind::xvector;
    if (name == "raw")     return feature_kind::raw;
    fail(errc::invalid_argument, "unknown feature kind '" + name + "'");
}

namespace {

bool is_pow2(int v) {
    return v > 0 && (v & (v - 1)) == 0;
}

// in-place iterative radix-2 FFT
void fft(std::vector<std::complex<double>> & a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double hz_to_mel(double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

void validate_config(const cepstral_config & cfg, int frame_len) {
    check(cfg.num_coeffs >= 1 && cfg.num_coeffs <= cfg.num_filters, errc::invalid_argument,
          "cepstral config: need 1 <= num_coeffs <= num_filters");
    check(is_pow2(cfg.fft_size), errc::invalid_argument, "cepstral config: fft_size must be a power of two");
    check(cfg.fft_size >= frame_len, errc::invalid_argument,
          "cepstral config: fft_size smaller than the frame length");
    check(cfg.log_floor > 0.0, errc::invalid_argument, "cepstral config: log floor must be positive");
}

} // namespace

std::vector<std::vector<double>> make_filterbank(const cepstral_config & cfg, bool mel_scale) {
    const int n_bins = cfg.fft_size / 2 + 1;
    const double f_lo = 0.0;
    const double f_hi = working_sample_rate / 2.0;

    // filter edges: num_filters + 2 points, equally spaced on the chosen scale,
    // snapped to FFT bins so each triangle peaks at exactly 1
    std::vector<int> bin(cfg.num_filters + 2);
    for (int m = 0; m < cfg.num_filters + 2; ++m) {
        const double frac = static_cast<double>(m) / (cfg.num_filters + 1);
        double hz;
        if (mel_scale) {
            hz = mel_to_hz(hz_to_mel(f_lo) + frac * (hz_to_mel(f_hi) - hz_to_mel(f_lo)));
        } else {
            hz = f_lo + frac * (f_hi - f_lo);
        }
        bin[m] = static_cast<int>(std::floor((cfg.fft_size + 1) * hz / working_sample_rate));
    }

    std::vector<std::vector<double>> bank(cfg.num_filters, std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < cfg.num_filters; ++m) {
        const int b0 = bin[m], b1 = bin[m + 1], b2 = bin[m + 2];
        if (b0 >= b1 || b1 >= b2) {
            fail(errc::invalid_argument, "filterbank too dense for the FFT resolution");
        }
        for (int k = b0; k < b1; ++k) {
            bank[m][k] = static_cast<double>(k - b0) / (b1 - b0);
        }
        for (int k = b1; k < b2 && k < n_bins; ++k) {
            bank[m][k] = static_cast<double>(b2 - k) / (b2 - b1);
        }
    }
    return bank;
}

std::vector<std::vector<double>> make_dct_basis(int num_coeffs, int num_filters) {
    // orthonormal DCT-II
    std::vector<std::vector<double>> basis(num_coeffs, std::vector<double>(num_filters));
    const double m = static_cast<double>(num_filters);
    for (int k = 0; k < num_coeffs; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
        for (int i = 0; i < num_filters; ++i) {
            basis[k][i] = scale * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * m));
        }
    }
    return basis;
}

namespace {

feature_matrix cepstral(const audio_buffer & buf, const cepstral_config & cfg, bool mel_scale) {
    check(buf.sample_rate == working_sample_rate, errc::invalid_argument,
          "cepstral features expect " + std::to_string(working_sample_rate) + " Hz input, got " +
              std::to_string(buf.sample_rate));

    const int frame_len = static_cast<int>(std::lround(cfg.frame_ms * working_sample_rate / 1000.0));
    const int hop_len = static_cast<int>(std::lround(cfg.hop_ms * working_sample_rate / 1000.0));
    validate_config(cfg, frame_len);

    const int64_t n = static_cast<int64_t>(buf.samples.size());
    if (n < frame_len) {
        fail(errc::too_short, "audio shorter than one frame (" + std::to_string(n) + " < " +
                                  std::to_string(frame_len) + " samples)");
    }
    const int64_t n_frames = 1 + (n - frame_len) / hop_len;

    // pre-emphasis over the whole signal; first sample keeps the same formula
    // with an implicit zero-order hold so constant input maps to constant output
    std::vector<double> emphasized(buf.samples.size());
    emphasized[0] = buf.samples[0] - cfg.pre_emphasis * buf.samples[0];
    for (size_t t = 1; t < buf.samples.size(); ++t) {
        emphasized[t] = buf.samples[t] - cfg.pre_emphasis * buf.samples[t - 1];
    }

    std::vector<double> window(frame_len);
    for (int i = 0; i < frame_len; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (frame_len - 1));
    }

    const auto bank = make_filterbank(cfg, mel_scale);
    const auto dct = make_dct_basis(cfg.num_coeffs, cfg.num_filters);
    const int n_bins = cfg.fft_size / 2 + 1;

    feature_matrix fm;
    fm.rows = static_cast<uint32_t>(n_frames);
    fm.cols = static_cast<uint32_t>(cfg.num_coeffs);
    fm.kind = mel_scale ? feature_kind::mfcc : feature_kind::lfcc;
    fm.data.resize(static_cast<size_t>(n_frames) * cfg.num_coeffs);

    std::vector<std::complex<double>> spec(cfg.fft_size);
    std::vector<double> power(n_bins);
    std::vector<double> log_energy(cfg.num_filters);

    for (int64_t f = 0; f < n_frames; ++f) {
        const int64_t start = f * hop_len;
        std::fill(spec.begin(), spec.end(), std::complex<double>(0.0, 0.0));
        for (int i = 0; i < frame_len; ++i) {
            spec[i] = emphasized[start + i] * window[i];
        }
        fft(spec);
        for (int k = 0; k < n_bins; ++k) {
            power[k] = std::norm(spec[k]);
        }
        for (int m = 0; m < cfg.num_filters; ++m) {
            double e = 0.0;
            for (int k = 0; k < n_bins; ++k) {
                e += bank[m][k] * power[k];
            }
            log_energy[m] = std::log(std::max(e, cfg.log_floor));
        }
        for (int k = 0; k < cfg.num_coeffs; ++k) {
            double c = 0.0;
            for (int m = 0; m < cfg.num_filters; ++m) {
                c += dct[k][m] * log_energy[m];
            }
            fm.data[static_cast<size_t>(f) * cfg.num_coeffs + k] = static_cast<float>(c);
        }
    }
    return fm;
}

} // namespace

feature_matrix mfcc(const audio_buffer & buf, const cepstral_config & cfg) {
    return cepstral(buf, cfg, true);
}

feature_matrix lfcc(const audio_buffer & buf, const cepstral_config & cfg) {
    return cepstral(buf, cfg, false);
}

std::vector<double> mean_pool(const feature_matrix & fm) {
    check(fm.rows >= 1 && fm.cols >= 1, errc::invalid_argument, "mean_pool: empty feature matrix");
    std::vector<double> out(fm.cols, 0.0);
    for (uint32_t r = 0; r < fm.rows; ++r) {
        for (uint32_t c = 0; c < fm.cols; ++c) {
            out[c] += fm.at(r, c);
        }
    }
    for (auto & v : out) {
        v /= fm.rows;
    }
    return out;
}

static constexpr char slf1_magic[4] = { 'S', 'L', 'F', '1' };

std::vector<uint8_t> serialize_feature_matrix(const feature_matrix & fm) {
    check(fm.rows >= 1 && fm.cols >= 1, errc::invalid_argument, "feature matrix must be non-empty");
    check(fm.data.size() == static_cast<size_t>(fm.rows) * fm.cols, errc::dim_mismatch,
          "feature matrix data size disagrees with rows*cols");

    std::vector<uint8_t> out;
    out.reserve(13 + fm.data.size() * 4);
    for (char c : slf1_magic) {
        put_u8(out, static_cast<uint8_t>(c));
    }
    put_u8(out, static_cast<uint8_t>(fm.kind));
    put_u32(out, fm.rows);
    put_u32(out, fm.cols);
    for (float v : fm.data) {
        put_f32(out, v);
    }
    return out;
}

feature_matrix parse_feature_matrix(std::span<const uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), slf1_magic, 4) != 0) {
        fail(errc::bad_magic, "feature file: bad magic (want SLF1)");
    }
    byte_reader r(bytes, errc::dim_mismatch, "feature file");
    r.skip(4);
    const uint8_t kind_byte = r.u8();
    if (kind_byte > static_cast<uint8_t>(feature_kind::raw)) {
        fail(errc::parse, "feature file: unknown source kind " + std::to_string(kind_byte));
    }
    feature_matrix fm;
    fm.kind = static_cast<feature_kind>(kind_byte);
    fm.rows = r.u32();
    fm.cols = r.u32();
    if (fm.rows == 0 || fm.cols == 0) {
        fail(errc::dim_mismatch, "feature file: zero rows or cols");
    }
    const size_t expect = static_cast<size_t>(fm.rows) * fm.cols;
    if (r.remaining() != expect * 4) {
        fail(errc::dim_mismatch, "feature file: header says " + std::to_string(fm.rows) + "x" +
                                     std::to_string(fm.cols) + " but payload holds " +
                                     std::to_string(r.remaining() / 4) + " floats");
    }
    fm.data.resize(expect);
    for (size_t i = 0; i < expect; ++i) {
        fm.data[i] = r.f32();
    }
    return fm;
}

void write_feature_file(const feature_matrix & fm, const std::string & path) {
    write_file_bytes(path, serialize_feature_matrix(fm));
}

feature_matrix read_feature_file(const std::string & path) {
    return parse_feature_matrix(read_file_bytes(path));
}

} // namespace salf

#include "audio_io.h"

#include "error.h"
#include "io_util.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

namespace salf {

namespace {

constexpr uint16_t WAVE_FORMAT_PCM        = 1;
constexpr uint16_t WAVE_FORMAT_IEEE_FLOAT = 3;

struct fmt_chunk {
    uint16_t format = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits_per_sample = 0;
};

uint32_t fourcc(const char (&tag)[5]) {
    return static_cast<uint32_t>(tag[0]) | (static_cast<uint32_t>(tag[1]) << 8) |
           (static_cast<uint32_t>(tag[2]) << 16) | (static_cast<uint32_t>(tag[3]) << 24);
}

} // namespace

audio_buffer read_wav(std::span<const uint8_t> bytes) {
    byte_reader r(bytes, errc::malformed_header, "wav");

    if (r.u32() != fourcc("RIFF")) {
        fail(errc::malformed_header, "wav: missing RIFF tag");
    }
    r.u32(); // riff size, not trusted
    if (r.u32() != fourcc("WAVE")) {
        fail(errc::malformed_header, "wav: missing WAVE tag");
    }

    fmt_chunk fmt;
    bool have_fmt = false;
    std::span<const uint8_t> data;
    bool have_data = false;

    while (r.remaining() >= 8 && !have_data) {
        uint32_t tag = r.u32();
        uint32_t size = r.u32();
        if (tag == fourcc("fmt ")) {
            if (size < 16) {
                fail(errc::malformed_header, "wav: fmt chunk too small");
            }
            byte_reader fr(r.take(size), errc::malformed_header, "wav fmt");
            fmt.format = fr.u16();
            fmt.channels = fr.u16();
            fmt.sample_rate = fr.u32();
            fr.u32(); // byte rate
            fr.u16(); // block align
            fmt.bits_per_sample = fr.u16();
            have_fmt = true;
        } else if (tag == fourcc("data")) {
            data = r.take(size);
            have_data = true;
        } else {
            r.skip(size);
        }
        if (size % 2 == 1 && r.remaining() > 0) {
            r.skip(1); // chunks are word aligned
        }
    }

    if (!have_fmt || !have_data) {
        fail(errc::malformed_header, "wav: missing fmt or data chunk");
    }
    if (fmt.format != WAVE_FORMAT_PCM && fmt.format != WAVE_FORMAT_IEEE_FLOAT) {
        fail(errc::unsupported_encoding,
             "wav: format code " + std::to_string(fmt.format) + " (only pcm16/float32)");
    }
    if (fmt.format == WAVE_FORMAT_PCM && fmt.bits_per_sample != 16) {
        fail(errc::unsupported_encoding,
             "wav: " + std::to_string(fmt.bits_per_sample) + "-bit pcm (only 16-bit)");
    }
    if (fmt.format == WAVE_FORMAT_IEEE_FLOAT && fmt.bits_per_sample != 32) {
        fail(errc::unsupported_encoding,
             "wav: " + std::to_string(fmt.bits_per_sample) + "-bit float (only 32-bit)");
    }
    if (fmt.channels != 1 && fmt.channels != 2) {
        fail(errc::unsupported_encoding, "wav: " + std::to_string(fmt.channels) + " channels");
    }
    if (fmt.sample_rate == 0) {
        fail(errc::malformed_header, "wav: zero sample rate");
    }

    const size_t bytes_per_sample = fmt.bits_per_sample / 8;
    const size_t frame_bytes = bytes_per_sample * fmt.channels;
    const size_t n_frames = data.size() / frame_bytes;
    if (n_frames == 0) {
        fail(errc::empty_audio, "wav: no samples");
    }

    audio_buffer out;
    out.sample_rate = static_cast<int>(fmt.sample_rate);
    out.samples.resize(n_frames);

    byte_reader dr(data, errc::malformed_header, "wav data");
    for (size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < fmt.channels; ++c) {
            double v;
            if (fmt.format == WAVE_FORMAT_PCM) {
                v = static_cast<double>(dr.i16()) / 32768.0;
            } else {
                float fv = dr.f32();
                if (!std::isfinite(fv)) {
                    fail(errc::parse, "wav: non-finite float sample");
                }
                v = std::clamp(static_cast<double>(fv), -1.0, 1.0);
            }
            acc += v;
        }
        out.samples[i] = acc / fmt.channels;
    }
    return out;
}

audio_buffer read_wav_file(const std::string & path) {
    return read_wav(read_file_bytes(path));
}

std::vector<uint8_t> write_wav_pcm16(const audio_buffer & buf) {
    check(buf.sample_rate > 0, errc::invalid_argument, "wav write: sample rate must be positive");
    check(!buf.samples.empty(), errc::empty_audio, "wav write: no samples");

    const uint32_t data_size = static_cast<uint32_t>(buf.samples.size() * 2);
    std::vector<uint8_t> out;
    out.reserve(44 + data_size);

    auto put_tag = [&](const char (&tag)[5]) { put_u32(out, fourcc(tag)); };
    put_tag("RIFF");
    put_u32(out, 36 + data_size);
    put_tag("WAVE");
    put_tag("fmt ");
    put_u32(out, 16);
    put_u16(out, WAVE_FORMAT_PCM);
    put_u16(out, 1); // mono
    put_u32(out, static_cast<uint32_t>(buf.sample_rate));
    put_u32(out, static_cast<uint32_t>(buf.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag("data");
    put_u32(out, data_size);
    for (double s : buf.samples) {
        double scaled = std::round(s * 32768.0);
        auto v = static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<uint16_t>(v));
    }
    return out;
}

void write_wav_file(const audio_buffer & buf, const std::string & path) {
    write_file_bytes(path, write_wav_pcm16(buf));
}

namespace {

// modified Bessel function of the first kind, order zero (power series)
double bessel_i0(double x) {
    double sum = 1.0;
    double term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < sum * 1e-18) {
            break;
        }
    }
    return sum;
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) {
        return 1.0;
    }
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

} // namespace

audio_buffer resample(const audio_buffer & buf, int target_rate) {
    check(target_rate > 0, errc::invalid_argument, "resample: target rate must be positive");
    check(buf.sample_rate > 0, errc::invalid_argument, "resample: source rate must be positive");
    if (target_rate == buf.sample_rate || buf.samples.empty()) {
        audio_buffer out = buf;
        out.sample_rate = target_rate;
        return out;
    }

    const int g = std::gcd(buf.sample_rate, target_rate);
    const int64_t up = target_rate / g;        // interpolation factor L
    const int64_t down = buf.sample_rate / g;  // decimation factor M

    constexpr int taps_per_phase = 64;
    constexpr double kaiser_beta = 8.6;
    const int64_t n_taps = taps_per_phase * up + 1; // odd, symmetric
    const int64_t center = (n_taps - 1) / 2;

    // cutoff at half the lower rate, expressed relative to the upsampled rate
    const double cutoff_hz = 0.5 * std::min(buf.sample_rate, target_rate);
    const double fc_rel = cutoff_hz / (static_cast<double>(buf.sample_rate) * up);

    std::vector<double> h(n_taps);
    const double i0_beta = bessel_i0(kaiser_beta);
    for (int64_t j = 0; j < n_taps; ++j) {
        const double t = static_cast<double>(j - center);
        const double win_arg = t / static_cast<double>(center);
        const double win = bessel_i0(kaiser_beta * std::sqrt(std::max(0.0, 1.0 - win_arg * win_arg))) / i0_beta;
        h[j] = 2.0 * fc_rel * sinc(2.0 * fc_rel * t) * win;
    }

    const int64_t in_len = static_cast<int64_t>(buf.samples.size());
    const int64_t out_len = std::llround(static_cast<double>(in_len) * target_rate / buf.sample_rate);

    audio_buffer out;
    out.sample_rate = target_rate;
    out.samples.resize(static_cast<size_t>(out_len));

    for (int64_t n = 0; n < out_len; ++n) {
        // position of this output sample on the upsampled grid, filter centered
        const int64_t u = n * down + center;
        int64_t i_lo = (u - (n_taps - 1) + up - 1) / up; // ceil((u - N + 1)/L)
        int64_t i_hi = u / up;
        i_lo = std::max<int64_t>(i_lo, 0);
        i_hi = std::min<int64_t>(i_hi, in_len - 1);
        double acc = 0.0;
        for (int64_t i = i_lo; i <= i_hi; ++i) {
            acc += h[u - i * up] * buf.samples[i];
        }
        out.samples[static_cast<size_t>(n)] = acc * static_cast<double>(up);
    }
    return out;
}

} // namespace salf

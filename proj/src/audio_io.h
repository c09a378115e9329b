#pragma once

// WAV parsing and band-limited resampling. Decoded audio is always mono with
// samples normalized into [-1, 1].

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace salf {

struct audio_buffer {
    std::vector<double> samples; // mono, in [-1, 1]
    int sample_rate = 0;         // Hz
};

// Parse a RIFF/WAVE container. Supported encodings: PCM 16-bit (scaled by
// 1/32768) and IEEE float-32, 1 or 2 channels (stereo is averaged to mono).
audio_buffer read_wav(std::span<const uint8_t> bytes);
audio_buffer read_wav_file(const std::string & path);

// Minimal PCM16 mono writer, mainly for tests and fixtures.
std::vector<uint8_t> write_wav_pcm16(const audio_buffer & buf);
void write_wav_file(const audio_buffer & buf, const std::string & path);

// Polyphase windowed-sinc resampler: 64 taps per phase, Kaiser beta 8.6,
// cutoff at half the lower of the two rates. Output length is
// round(len * target / source); equal rates return the input unchanged.
audio_buffer resample(const audio_buffer & buf, int target_rate);

} // namespace salf

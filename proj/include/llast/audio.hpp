// SPDX-License-Identifier: Apache-2.0
//
// Acoustic frontend: WAV / raw-float ingestion, integer-factor resampling,
// and a log-mel spectrogram for a 16 kHz speech pipeline.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llast/tensor.hpp"

namespace llast {

struct AudioWaveform {
    std::vector<float> samples;  // in [-1, 1]
    int sample_rate = 0;
};

struct FrontendConfig {
    int n_mels = 80;
    int win_samples = 400;  // 25 ms at 16 kHz, Hann window
    int hop_samples = 160;  // 10 ms
    bool normalize = true;  // per-utterance mean/variance normalization before encoding
};

// Natural-log floor applied to mel energies.
inline constexpr double kLogMelFloor = -23.025850929940457;  // ln(1e-10)

struct AcousticFeatures {
    Tensor<float> frames;  // [T x n_mels]
    double frame_hop_s = 0.0;
    int n_mels = 0;
};

// Single-channel PCM WAV (16-bit signed or 32-bit float).
AudioWaveform read_wav(const std::string& path);

// Raw-float format: 12-byte header `RAWF` + sample_rate(u32) + length(u32),
// then little-endian 32-bit floats.
AudioWaveform read_raw(const std::string& path);
void write_raw(const std::string& path, const AudioWaveform& w);

// Dispatch on the file magic.
AudioWaveform read_audio(const std::string& path);

// Anti-aliased integer-factor resampling (polyphase windowed-sinc).
// Output length is round(len * target / source).
AudioWaveform resample(const AudioWaveform& w, int target_rate);

// Windowed DFT magnitude^2 -> mel filterbank -> natural log with floor.
// T = 1 + floor((len - win) / hop); requires len >= win.
AcousticFeatures log_mel_spectrogram(const AudioWaveform& w, const FrontendConfig& cfg);

// Per-utterance mean/variance normalization over all cells.
Tensor<float> normalize_features(const Tensor<float>& frames);

AcousticFeatures extract_features(const AudioWaveform& w, const FrontendConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filterbank rows over the onesided DFT bins (n_fft/2 + 1 wide).
std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, int sample_rate);

// Peak frequency of each mel filter; tone-coded synthetic speech places its
// tones on these centers so every token maps to a distinct dominant bin.
std::vector<double> mel_bin_center_freqs(int n_mels, int sample_rate);

}  // namespace llast

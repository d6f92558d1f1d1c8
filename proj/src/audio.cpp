// SPDX-License-Identifier: Apache-2.0

#include "llast/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "llast/error.hpp"

namespace llast {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_rate(int rate, const std::string& where) {
    if (rate != 16000 && rate != 48000) {
        throw ConfigError(where + ": sample rate " + std::to_string(rate) + " not accepted (need 16000 or 48000)");
    }
}

uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError(path + ": truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in, const std::string& path) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw ParseError(path + ": truncated file");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
}

float f32_from_le(const unsigned char* b) {
    uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                 (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

double sinc(double t) {
    if (std::fabs(t) < 1e-12) return 1.0;
    return std::sin(kPi * t) / (kPi * t);
}

// Hann-windowed sinc low-pass with cutoff pi/factor, half-width 8*factor taps.
std::vector<double> lowpass_taps(int factor) {
    int half = 8 * factor;
    std::vector<double> h(static_cast<size_t>(2 * half + 1));
    for (int k = -half; k <= half; ++k) {
        double wnd = 0.5 * (1.0 + std::cos(kPi * k / (half + 1)));
        h[static_cast<size_t>(k + half)] = sinc(static_cast<double>(k) / factor) / factor * wnd;
    }
    // Normalize DC gain to exactly 1 so constant signals pass through.
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v /= sum;
    return h;
}

}  // namespace

AudioWaveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open audio file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RIFF", 4) != 0) throw ParseError(path + ": not a RIFF/WAVE file");
    read_u32(in, path);
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "WAVE", 4) != 0) throw ParseError(path + ": not a RIFF/WAVE file");

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    AudioWaveform w;
    while (in.read(magic, 4)) {
        uint32_t size = read_u32(in, path);
        if (std::memcmp(magic, "fmt ", 4) == 0) {
            format = read_u16(in, path);
            channels = read_u16(in, path);
            rate = read_u32(in, path);
            read_u32(in, path);  // byte rate
            read_u16(in, path);  // block align
            bits = read_u16(in, path);
            if (size > 16) in.ignore(size - 16);
            have_fmt = true;
        } else if (std::memcmp(magic, "data", 4) == 0) {
            if (!have_fmt) throw ParseError(path + ": data chunk before fmt chunk");
            if (channels != 1) throw ParseError(path + ": expected single-channel audio, got " + std::to_string(channels));
            std::vector<unsigned char> buf(size);
            in.read(reinterpret_cast<char*>(buf.data()), size);
            if (!in) throw ParseError(path + ": truncated data chunk");
            if (format == 1 && bits == 16) {
                size_t n = size / 2;
                w.samples.resize(n);
                for (size_t i = 0; i < n; ++i) {
                    int16_t s = static_cast<int16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
                    w.samples[i] = std::clamp(s / 32768.0f, -1.0f, 1.0f);
                }
            } else if (format == 3 && bits == 32) {
                size_t n = size / 4;
                w.samples.resize(n);
                for (size_t i = 0; i < n; ++i) w.samples[i] = std::clamp(f32_from_le(&buf[4 * i]), -1.0f, 1.0f);
            } else {
                throw ParseError(path + ": unsupported WAV encoding (need PCM16 or float32)");
            }
            w.sample_rate = static_cast<int>(rate);
            check_rate(w.sample_rate, path);
            if (w.samples.empty()) throw ParseError(path + ": empty audio");
            return w;
        } else {
            in.ignore(size + (size & 1));
        }
    }
    throw ParseError(path + ": no data chunk");
}

AudioWaveform read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open audio file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RAWF", 4) != 0) throw ParseError(path + ": not a RAWF file");
    uint32_t rate = read_u32(in, path);
    uint32_t length = read_u32(in, path);
    if (length == 0) throw ParseError(path + ": empty audio");
    AudioWaveform w;
    w.sample_rate = static_cast<int>(rate);
    check_rate(w.sample_rate, path);
    std::vector<unsigned char> buf(static_cast<size_t>(length) * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw ParseError(path + ": truncated sample data");
    w.samples.resize(length);
    for (uint32_t i = 0; i < length; ++i) w.samples[i] = f32_from_le(&buf[4 * i]);
    return w;
}

void write_raw(const std::string& path, const AudioWaveform& w) {
    check_rate(w.sample_rate, path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write audio file: " + path);
    out.write("RAWF", 4);
    write_u32(out, static_cast<uint32_t>(w.sample_rate));
    write_u32(out, static_cast<uint32_t>(w.samples.size()));
    for (float s : w.samples) {
        uint32_t u;
        std::memcpy(&u, &s, 4);
        write_u32(out, u);
    }
    if (!out) throw IoError("write failed: " + path);
}

AudioWaveform read_audio(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open audio file: " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.close();
    if (std::memcmp(magic, "RAWF", 4) == 0) return read_raw(path);
    return read_wav(path);
}

AudioWaveform resample(const AudioWaveform& w, int target_rate) {
    if (w.samples.empty()) throw ConfigError("resample: empty waveform");
    check_rate(target_rate, "resample");
    if (target_rate == w.sample_rate) return w;

    int64_t len = static_cast<int64_t>(w.samples.size());
    AudioWaveform out;
    out.sample_rate = target_rate;
    if (w.sample_rate % target_rate == 0) {
        int m = w.sample_rate / target_rate;
        auto h = lowpass_taps(m);
        int half = 8 * m;
        int64_t out_len = (len * target_rate + w.sample_rate / 2) / w.sample_rate;
        out.samples.resize(static_cast<size_t>(out_len));
        for (int64_t n = 0; n < out_len; ++n) {
            double acc = 0.0;
            int64_t center = n * m;
            for (int k = -half; k <= half; ++k) {
                int64_t i = center + k;
                if (i < 0 || i >= len) continue;
                acc += h[static_cast<size_t>(k + half)] * w.samples[static_cast<size_t>(i)];
            }
            out.samples[static_cast<size_t>(n)] = static_cast<float>(acc);
        }
    } else if (target_rate % w.sample_rate == 0) {
        int l = target_rate / w.sample_rate;
        auto h = lowpass_taps(l);
        int half = 8 * l;
        int64_t out_len = len * l;
        out.samples.resize(static_cast<size_t>(out_len));
        for (int64_t n = 0; n < out_len; ++n) {
            double acc = 0.0;
            // y[n] = L * sum_k x[k] h[n - kL]
            int64_t k_lo = (n - half + l - 1) / l;
            int64_t k_hi = (n + half) / l;
            for (int64_t k = std::max<int64_t>(0, k_lo); k <= std::min(len - 1, k_hi); ++k) {
                acc += h[static_cast<size_t>(n - k * l + half)] * w.samples[static_cast<size_t>(k)];
            }
            out.samples[static_cast<size_t>(n)] = static_cast<float>(acc * l);
        }
    } else {
        throw ConfigError("resample: unsupported rate pair " + std::to_string(w.sample_rate) + " -> " +
                          std::to_string(target_rate));
    }
    return out;
}

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, int sample_rate) {
    int n_bins = n_fft / 2 + 1;
    double mel_lo = hz_to_mel(0.0);
    double mel_hi = hz_to_mel(sample_rate / 2.0);
    std::vector<double> centers(static_cast<size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i) {
        centers[static_cast<size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
    }
    std::vector<std::vector<double>> fb(static_cast<size_t>(n_mels), std::vector<double>(static_cast<size_t>(n_bins), 0.0));
    for (int m = 0; m < n_mels; ++m) {
        double left = centers[static_cast<size_t>(m)];
        double peak = centers[static_cast<size_t>(m) + 1];
        double right = centers[static_cast<size_t>(m) + 2];
        for (int b = 0; b < n_bins; ++b) {
            double f = static_cast<double>(b) * sample_rate / n_fft;
            double v = 0.0;
            if (f > left && f < peak) {
                v = (f - left) / (peak - left);
            } else if (f >= peak && f < right) {
                v = (right - f) / (right - peak);
            }
            fb[static_cast<size_t>(m)][static_cast<size_t>(b)] = v;
        }
    }
    return fb;
}

std::vector<double> mel_bin_center_freqs(int n_mels, int sample_rate) {
    double mel_lo = hz_to_mel(0.0);
    double mel_hi = hz_to_mel(sample_rate / 2.0);
    std::vector<double> out(static_cast<size_t>(n_mels));
    for (int m = 0; m < n_mels; ++m) {
        out[static_cast<size_t>(m)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (n_mels + 1));
    }
    return out;
}

AcousticFeatures log_mel_spectrogram(const AudioWaveform& w, const FrontendConfig& cfg) {
    if (w.sample_rate != 16000) {
        throw ConfigError("log_mel_spectrogram expects 16 kHz input, got " + std::to_string(w.sample_rate));
    }
    int win = cfg.win_samples;
    int hop = cfg.hop_samples;
    int64_t len = static_cast<int64_t>(w.samples.size());
    if (len < win) {
        throw LengthError("waveform too short: " + std::to_string(len) + " samples < one window of " +
                          std::to_string(win));
    }
    int64_t frames = 1 + (len - win) / hop;
    int n_bins = win / 2 + 1;

    // Periodic Hann window and direct DFT tables.
    std::vector<double> hann(static_cast<size_t>(win));
    for (int i = 0; i < win; ++i) hann[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / win));
    std::vector<double> cos_tab(static_cast<size_t>(n_bins) * win), sin_tab(static_cast<size_t>(n_bins) * win);
    for (int b = 0; b < n_bins; ++b) {
        for (int i = 0; i < win; ++i) {
            double ang = 2.0 * kPi * b * i / win;
            cos_tab[static_cast<size_t>(b) * win + i] = std::cos(ang);
            sin_tab[static_cast<size_t>(b) * win + i] = std::sin(ang);
        }
    }
    auto fb = mel_filterbank(cfg.n_mels, win, w.sample_rate);

    Tensor<float> out({frames, cfg.n_mels});
    std::vector<double> windowed(static_cast<size_t>(win));
    std::vector<double> power(static_cast<size_t>(n_bins));
    for (int64_t t = 0; t < frames; ++t) {
        const float* seg = w.samples.data() + t * hop;
        for (int i = 0; i < win; ++i) windowed[static_cast<size_t>(i)] = hann[static_cast<size_t>(i)] * seg[i];
        for (int b = 0; b < n_bins; ++b) {
            const double* ct = &cos_tab[static_cast<size_t>(b) * win];
            const double* st = &sin_tab[static_cast<size_t>(b) * win];
            double re = 0.0, im = 0.0;
            for (int i = 0; i < win; ++i) {
                re += windowed[static_cast<size_t>(i)] * ct[i];
                im -= windowed[static_cast<size_t>(i)] * st[i];
            }
            power[static_cast<size_t>(b)] = re * re + im * im;
        }
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            const auto& row = fb[static_cast<size_t>(m)];
            for (int b = 0; b < n_bins; ++b) e += row[static_cast<size_t>(b)] * power[static_cast<size_t>(b)];
            double v = std::max(std::log(std::max(e, 0.0)), kLogMelFloor);
            out.at(t, m) = static_cast<float>(v);
        }
    }

    AcousticFeatures feats;
    feats.frames = std::move(out);
    feats.frame_hop_s = static_cast<double>(hop) / w.sample_rate;
    feats.n_mels = cfg.n_mels;
    return feats;
}

Tensor<float> normalize_features(const Tensor<float>& frames) {
    double mean = 0.0;
    for (int64_t i = 0; i < frames.numel(); ++i) mean += frames.at(i);
    mean /= static_cast<double>(frames.numel());
    double var = 0.0;
    for (int64_t i = 0; i < frames.numel(); ++i) {
        double d = frames.at(i) - mean;
        var += d * d;
    }
    var /= static_cast<double>(frames.numel());
    double inv = 1.0 / std::sqrt(var + 1e-8);
    Tensor<float> out(frames.shape());
    for (int64_t i = 0; i < frames.numel(); ++i) out.at(i) = static_cast<float>((frames.at(i) - mean) * inv);
    return out;
}

AcousticFeatures extract_features(const AudioWaveform& w, const FrontendConfig& cfg) {
    AudioWaveform at16 = w.sample_rate == 16000 ? w : resample(w, 16000);
    AcousticFeatures feats = log_mel_spectrogram(at16, cfg);
    if (cfg.normalize) feats.frames = normalize_features(feats.frames);
    return feats;
}

}  // namespace llast

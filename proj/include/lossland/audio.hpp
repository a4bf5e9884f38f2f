#pragma once

#include <span>
#include <string>
#include <vector>

#include "lossland/tensor.hpp"

namespace lossland {

struct FeatureConfig {
    int sample_rate = 16000;
    int window = 512;  // 32 ms at 16 kHz
    int hop = 160;     // 10 ms
    int mel_bins = 64;
    double fmin = 50.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;
};

/// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filterbank rows over the window/2+1 magnitude-squared bins.
std::vector<std::vector<double>> mel_filterbank(const FeatureConfig &cfg);

/// Log-mel spectrogram [mel_bins x frames]; Hann window, no center padding,
/// frames = floor((len - window)/hop) + 1. Natural log with a floor clamp.
Tensor logmel(std::span<const float> signal, const FeatureConfig &cfg);

/// In-place radix-2 FFT; re/im length must be a power of two.
void fft_radix2(std::span<double> re, std::span<double> im);

class WavError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct WavData {
    std::vector<float> samples;  // mono, [-1, 1]
    int sample_rate = 0;
};

/// 16-bit PCM RIFF reader; stereo is averaged to mono, samples divided by 32768.
WavData load_wav(const std::string &path);

std::vector<float> resample_linear(std::span<const float> in, int from_rate, int to_rate);

/// load_wav + resample to 16 kHz when needed.
std::vector<float> load_wav_16k(const std::string &path);

}  // namespace lossland

#include "lossland/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace lossland {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void fft_radix2(std::span<double> re, std::span<double> im) {
    const size_t n = re.size();
    if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
        throw std::invalid_argument("fft_radix2: length must be a power of two");
    }
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

std::vector<std::vector<double>> mel_filterbank(const FeatureConfig &cfg) {
    if (cfg.mel_bins < 1) throw std::invalid_argument("mel_filterbank: mel_bins must be >= 1");
    if (cfg.fmax > cfg.sample_rate / 2.0) {
        throw std::invalid_argument("mel_filterbank: fmax exceeds Nyquist");
    }
    const int nbins = cfg.window / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> peaks(static_cast<size_t>(cfg.mel_bins) + 2);
    for (int i = 0; i < cfg.mel_bins + 2; ++i) {
        peaks[static_cast<size_t>(i)] =
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.mel_bins + 1));
    }
    std::vector<std::vector<double>> fb(static_cast<size_t>(cfg.mel_bins),
                                        std::vector<double>(static_cast<size_t>(nbins), 0.0));
    const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.window;
    for (int m = 0; m < cfg.mel_bins; ++m) {
        const double lo = peaks[static_cast<size_t>(m)];
        const double cen = peaks[static_cast<size_t>(m) + 1];
        const double hi = peaks[static_cast<size_t>(m) + 2];
        for (int b = 0; b < nbins; ++b) {
            const double f = b * bin_hz;
            double w = 0.0;
            if (f > lo && f < cen) {
                w = (f - lo) / (cen - lo);
            } else if (f >= cen && f < hi) {
                w = (hi - f) / (hi - cen);
            }
            fb[static_cast<size_t>(m)][static_cast<size_t>(b)] = w;
        }
    }
    return fb;
}

Tensor logmel(std::span<const float> signal, const FeatureConfig &cfg) {
    if (cfg.window < cfg.hop) throw std::invalid_argument("logmel: window must be >= hop");
    if (static_cast<int>(signal.size()) < cfg.window) {
        throw std::invalid_argument("logmel: signal of " + std::to_string(signal.size()) +
                                    " samples is shorter than one window (" +
                                    std::to_string(cfg.window) + ")");
    }
    const int frames =
        static_cast<int>((signal.size() - static_cast<size_t>(cfg.window)) /
                         static_cast<size_t>(cfg.hop)) + 1;
    const int nbins = cfg.window / 2 + 1;
    const auto fb = mel_filterbank(cfg);

    std::vector<double> hann(static_cast<size_t>(cfg.window));
    for (int i = 0; i < cfg.window; ++i) {
        hann[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.window);
    }

    Tensor out({cfg.mel_bins, frames});
    std::vector<double> re(static_cast<size_t>(cfg.window));
    std::vector<double> im(static_cast<size_t>(cfg.window));
    std::vector<double> power(static_cast<size_t>(nbins));
    for (int f = 0; f < frames; ++f) {
        const float *s = signal.data() + static_cast<size_t>(f) * cfg.hop;
        for (int i = 0; i < cfg.window; ++i) {
            re[static_cast<size_t>(i)] = s[i] * hann[static_cast<size_t>(i)];
            im[static_cast<size_t>(i)] = 0.0;
        }
        fft_radix2(re, im);
        for (int b = 0; b < nbins; ++b) {
            power[static_cast<size_t>(b)] = re[static_cast<size_t>(b)] * re[static_cast<size_t>(b)] +
                                            im[static_cast<size_t>(b)] * im[static_cast<size_t>(b)];
        }
        for (int m = 0; m < cfg.mel_bins; ++m) {
            double e = 0.0;
            const auto &row = fb[static_cast<size_t>(m)];
            for (int b = 0; b < nbins; ++b) e += row[static_cast<size_t>(b)] * power[static_cast<size_t>(b)];
            out.data[static_cast<size_t>(m) * frames + f] =
                static_cast<float>(std::log(std::max(e, cfg.log_floor)));
        }
    }
    return out;
}

namespace {

uint32_t read_u32(std::istream &in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char *>(b), 4);
    if (!in) throw WavError("unexpected end of file in RIFF header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream &in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char *>(b), 2);
    if (!in) throw WavError("unexpected end of file in RIFF header");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

WavData load_wav(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError("cannot open '" + path + "'");
    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw WavError("malformed RIFF header (missing RIFF)");
    read_u32(in);  // chunk size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw WavError("malformed RIFF header (missing WAVE)");

    uint16_t channels = 0, bits = 0, format = 0;
    uint32_t rate = 0;
    std::vector<int16_t> raw;
    bool have_fmt = false, have_data = false;
    while (in.read(tag, 4)) {
        const uint32_t size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw WavError("data chunk before fmt chunk");
            raw.resize(size / 2);
            in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
            if (!in) throw WavError("truncated data chunk");
            have_data = true;
            break;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data) throw WavError("missing fmt or data chunk");
    if (format != 1 || bits != 16) {
        throw WavError("unsupported encoding: only 16-bit PCM is handled (format " +
                       std::to_string(format) + ", " + std::to_string(bits) + " bits)");
    }
    if (channels != 1 && channels != 2) {
        throw WavError("unsupported channel count " + std::to_string(channels));
    }

    WavData wav;
    wav.sample_rate = static_cast<int>(rate);
    const size_t n = raw.size() / channels;
    wav.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        if (channels == 1) {
            wav.samples[i] = static_cast<float>(raw[i]) / 32768.0f;
        } else {
            wav.samples[i] = (static_cast<float>(raw[2 * i]) + static_cast<float>(raw[2 * i + 1])) /
                             (2.0f * 32768.0f);
        }
    }
    return wav;
}

std::vector<float> resample_linear(std::span<const float> in, int from_rate, int to_rate) {
    if (from_rate <= 0 || to_rate <= 0) throw std::invalid_argument("resample: rates must be positive");
    if (from_rate == to_rate) return {in.begin(), in.end()};
    const size_t out_len = static_cast<size_t>(
        std::llround(static_cast<double>(in.size()) * to_rate / from_rate));
    std::vector<float> out(out_len);
    const double step = static_cast<double>(from_rate) / to_rate;
    for (size_t i = 0; i < out_len; ++i) {
        const double pos = i * step;
        const size_t i0 = std::min(static_cast<size_t>(pos), in.size() - 1);
        const size_t i1 = std::min(i0 + 1, in.size() - 1);
        const double frac = pos - static_cast<double>(i0);
        out[i] = static_cast<float>((1.0 - frac) * in[i0] + frac * in[i1]);
    }
    return out;
}

std::vector<float> load_wav_16k(const std::string &path) {
    WavData wav = load_wav(path);
    return resample_linear(wav.samples, wav.sample_rate, 16000);
}

}  // namespace lossland

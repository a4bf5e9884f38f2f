#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lossland/tensor.hpp"

namespace lossland {

/// One of nine recording devices. A, B, C and S1-S3 appear in training; S4-S6
/// are test-only (OOD).
struct DeviceProfile {
    std::string id;
    std::vector<float> log_gain;  // per mel bin, natural log of the gain curve
    double offset_db = 0.0;
};

enum class Split { Train, Test };

struct Sample {
    Tensor features;  // [mel_bins x frames]
    int label = 0;
    std::string device;
    Split split = Split::Train;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
    int mel_bins = 64;
    int frames = 101;
    int classes = 10;
    uint64_t seed = 0;
};

struct SynthConfig {
    uint64_t seed = 1;
    int train_size = 1200;
    int test_size = 600;
    int frames = 101;
    int mel_bins = 64;
    int classes = 10;
    double noise_level = 0.3;
    double device_a_share = 0.4;
    double iid_gain_scale = 0.15;
    double ood_gain_scale = 0.6;
    double iid_offset_db = 1.5;
    double ood_offset_db = 4.0;
};

extern const std::vector<std::string> kAllDevices;   // A,B,C,S1..S6
extern const std::vector<std::string> kIidDevices;   // A,B,C,S1..S3
extern const std::vector<std::string> kOodDevices;   // S4..S6

std::vector<DeviceProfile> make_device_profiles(const SynthConfig &cfg);

/// Deterministic per seed. Classes are balanced per split (counts differ by at
/// most 1); device A holds the largest training share; S4-S6 never appear in
/// the training split.
Dataset generate_dataset(const SynthConfig &cfg);

/// Partition a test-split sample list into (IID, OOD) by device membership.
std::pair<std::vector<Sample>, std::vector<Sample>> split_iid_ood(
    const std::vector<Sample> &test_samples);

/// Directory of flat float32 feature files plus manifest.csv
/// (filename,label,device,split) and a meta.json sidecar.
void export_dataset(const Dataset &ds, const std::string &dir);
Dataset import_dataset(const std::string &dir);

}  // namespace lossland

#include "lossland/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lossland/rng.hpp"

namespace lossland {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kAllDevices = {"A", "B", "C", "S1", "S2",
                                              "S3", "S4", "S5", "S6"};
const std::vector<std::string> kIidDevices = {"A", "B", "C", "S1", "S2", "S3"};
const std::vector<std::string> kOodDevices = {"S4", "S5", "S6"};

namespace {

constexpr double kTwoPi = 6.283185307179586;

bool is_ood(const std::string &id) {
    return std::find(kOodDevices.begin(), kOodDevices.end(), id) != kOodDevices.end();
}

struct Bump {
    double center, width, amp, rate, phase;
};

struct ClassProto {
    Bump bumps[2];
};

std::vector<ClassProto> make_prototypes(const SynthConfig &cfg) {
    std::vector<ClassProto> protos(static_cast<size_t>(cfg.classes));
    for (int c = 0; c < cfg.classes; ++c) {
        Rng rng(derive_seed(cfg.seed, 0x70726f746fULL + static_cast<uint64_t>(c)));
        for (auto &b : protos[static_cast<size_t>(c)].bumps) {
            b.center = rng.uniform(4.0, cfg.mel_bins - 4.0);
            b.width = rng.uniform(2.0, 6.0);
            b.amp = rng.uniform(0.5, 1.5);
            b.rate = rng.uniform(1.0, 4.0);
            b.phase = rng.uniform(0.0, kTwoPi);
        }
    }
    return protos;
}

double proto_energy(const ClassProto &p, int bin, int frame, int frames) {
    double e = 0.05;
    for (const auto &b : p.bumps) {
        const double d = (bin - b.center) / b.width;
        const double spatial = b.amp * std::exp(-0.5 * d * d);
        const double temporal = 1.0 + 0.4 * std::sin(kTwoPi * b.rate * frame / frames + b.phase);
        e += spatial * temporal;
    }
    return e;
}

Sample make_sample(const SynthConfig &cfg, const std::vector<ClassProto> &protos,
                   const DeviceProfile &dev, int label, Split split,
                   uint64_t sample_index) {
    Rng rng(derive_seed(cfg.seed, 0x73616d70ULL * 131 + sample_index));
    const double offset_gain = std::pow(10.0, dev.offset_db / 10.0);
    Sample s;
    s.label = label;
    s.device = dev.id;
    s.split = split;
    s.features = Tensor({cfg.mel_bins, cfg.frames});
    for (int b = 0; b < cfg.mel_bins; ++b) {
        const double gain = std::exp(dev.log_gain[static_cast<size_t>(b)]) * offset_gain;
        for (int t = 0; t < cfg.frames; ++t) {
            const double e = proto_energy(protos[static_cast<size_t>(label)], b, t, cfg.frames) * gain;
            double v = std::log(std::max(e, 1e-10));
            if (cfg.noise_level > 0.0) v += cfg.noise_level * rng.normal();
            s.features.data[static_cast<size_t>(b) * cfg.frames + t] = static_cast<float>(v);
        }
    }
    return s;
}

}  // namespace

std::vector<DeviceProfile> make_device_profiles(const SynthConfig &cfg) {
    std::vector<DeviceProfile> devices;
    devices.reserve(kAllDevices.size());
    for (size_t d = 0; d < kAllDevices.size(); ++d) {
        const std::string &id = kAllDevices[d];
        DeviceProfile dev;
        dev.id = id;
        dev.log_gain.assign(static_cast<size_t>(cfg.mel_bins), 0.0f);
        if (id != "A") {  // device A is the reference response
            Rng rng(derive_seed(cfg.seed, 0x646576ULL * 257 + d));
            const double scale = is_ood(id) ? cfg.ood_gain_scale : cfg.iid_gain_scale;
            const double a1 = rng.normal(), a2 = rng.normal(), a3 = rng.normal();
            const double p1 = rng.uniform(0.0, kTwoPi), p2 = rng.uniform(0.0, kTwoPi),
                         p3 = rng.uniform(0.0, kTwoPi);
            for (int b = 0; b < cfg.mel_bins; ++b) {
                const double x = static_cast<double>(b) / cfg.mel_bins;
                dev.log_gain[static_cast<size_t>(b)] = static_cast<float>(
                    scale * (a1 * std::sin(kTwoPi * x + p1) + a2 * std::sin(2 * kTwoPi * x + p2) +
                             a3 * std::cos(3 * kTwoPi * x + p3)));
            }
            dev.offset_db = (is_ood(id) ? cfg.ood_offset_db : cfg.iid_offset_db) * rng.normal();
        }
        devices.push_back(std::move(dev));
    }
    return devices;
}

Dataset generate_dataset(const SynthConfig &cfg) {
    if (cfg.train_size < cfg.classes || cfg.test_size < cfg.classes) {
        throw std::invalid_argument("generate_dataset: split sizes must be >= class count");
    }
    const auto devices = make_device_profiles(cfg);
    const auto protos = make_prototypes(cfg);
    auto device_by_id = [&](const std::string &id) -> const DeviceProfile & {
        for (const auto &d : devices) {
            if (d.id == id) return d;
        }
        throw std::logic_error("missing device " + id);
    };

    // Train device list: A gets the dominant share, the other IID devices
    // split the remainder evenly. S4-S6 are excluded by construction.
    int n_a = static_cast<int>(std::lround(cfg.device_a_share * cfg.train_size));
    const int others = static_cast<int>(kIidDevices.size()) - 1;
    while (n_a < cfg.train_size && (cfg.train_size - n_a + others - 1) / others >= n_a) ++n_a;
    std::vector<std::string> train_devices;
    train_devices.reserve(static_cast<size_t>(cfg.train_size));
    for (int i = 0; i < n_a; ++i) train_devices.push_back("A");
    for (int i = n_a; i < cfg.train_size; ++i) {
        train_devices.push_back(kIidDevices[1 + static_cast<size_t>(i - n_a) % others]);
    }
    Rng shuf_train(derive_seed(cfg.seed, 0x7472646576ULL));
    shuf_train.shuffle(train_devices.begin(), train_devices.end());

    std::vector<std::string> test_devices;
    test_devices.reserve(static_cast<size_t>(cfg.test_size));
    for (int i = 0; i < cfg.test_size; ++i) {
        test_devices.push_back(kAllDevices[static_cast<size_t>(i) % kAllDevices.size()]);
    }
    Rng shuf_test(derive_seed(cfg.seed, 0x747374646576ULL));
    shuf_test.shuffle(test_devices.begin(), test_devices.end());

    Dataset ds;
    ds.mel_bins = cfg.mel_bins;
    ds.frames = cfg.frames;
    ds.classes = cfg.classes;
    ds.seed = cfg.seed;
    ds.train.reserve(static_cast<size_t>(cfg.train_size));
    ds.test.reserve(static_cast<size_t>(cfg.test_size));
    uint64_t index = 0;
    for (int i = 0; i < cfg.train_size; ++i, ++index) {
        ds.train.push_back(make_sample(cfg, protos, device_by_id(train_devices[static_cast<size_t>(i)]),
                                       i % cfg.classes, Split::Train, index));
    }
    for (int i = 0; i < cfg.test_size; ++i, ++index) {
        ds.test.push_back(make_sample(cfg, protos, device_by_id(test_devices[static_cast<size_t>(i)]),
                                      i % cfg.classes, Split::Test, index));
    }
    return ds;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_iid_ood(
    const std::vector<Sample> &test_samples) {
    std::vector<Sample> iid, ood;
    for (const auto &s : test_samples) {
        if (s.split != Split::Test) {
            throw std::invalid_argument("split_iid_ood: sample from non-test split");
        }
        if (std::find(kIidDevices.begin(), kIidDevices.end(), s.device) != kIidDevices.end()) {
            iid.push_back(s);
        } else if (is_ood(s.device)) {
            ood.push_back(s);
        } else {
            throw std::invalid_argument("split_iid_ood: unknown device id '" + s.device + "'");
        }
    }
    return {std::move(iid), std::move(ood)};
}

namespace {

void write_sample_file(const fs::path &path, const Tensor &features) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char *>(features.ptr()),
              static_cast<std::streamsize>(features.numel() * 4));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void export_dataset(const Dataset &ds, const std::string &dir) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    manifest << "filename,label,device,split\n";
    int index = 0;
    auto dump = [&](const std::vector<Sample> &samples, const char *split) {
        for (const auto &s : samples) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%06d.bin", index++);
            write_sample_file(fs::path(dir) / name, s.features);
            manifest << name << "," << s.label << "," << s.device << "," << split << "\n";
        }
    };
    dump(ds.train, "train");
    dump(ds.test, "test");
    json meta = {{"mel_bins", ds.mel_bins},
                 {"frames", ds.frames},
                 {"classes", ds.classes},
                 {"seed", ds.seed}};
    std::ofstream(fs::path(dir) / "meta.json") << meta.dump(2) << "\n";
}

Dataset import_dataset(const std::string &dir) {
    std::ifstream meta_in(fs::path(dir) / "meta.json");
    if (!meta_in) throw std::runtime_error("import_dataset: missing meta.json in " + dir);
    json meta = json::parse(meta_in);
    Dataset ds;
    ds.mel_bins = meta.at("mel_bins").get<int>();
    ds.frames = meta.at("frames").get<int>();
    ds.classes = meta.at("classes").get<int>();
    ds.seed = meta.at("seed").get<uint64_t>();

    std::ifstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw std::runtime_error("import_dataset: missing manifest.csv in " + dir);
    std::string line;
    std::getline(manifest, line);  // header
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string fname, label, device, split;
        std::getline(ss, fname, ',');
        std::getline(ss, label, ',');
        std::getline(ss, device, ',');
        std::getline(ss, split, ',');
        Sample s;
        s.label = std::stoi(label);
        s.device = device;
        s.split = split == "train" ? Split::Train : Split::Test;
        s.features = Tensor({ds.mel_bins, ds.frames});
        std::ifstream f(fs::path(dir) / fname, std::ios::binary);
        f.read(reinterpret_cast<char *>(s.features.ptr()),
               static_cast<std::streamsize>(s.features.numel() * 4));
        if (!f) throw std::runtime_error("import_dataset: bad feature file " + fname);
        (s.split == Split::Train ? ds.train : ds.test).push_back(std::move(s));
    }
    return ds;
}

}  // namespace lossland

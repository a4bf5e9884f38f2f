#include "lossland/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace lossland {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'S', 'C', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string &out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string &out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char *p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64(const unsigned char *p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

void save_checkpoint(const ModelState &state, const std::string &path) {
    json manifest = json::array();
    uint64_t offset = 0;
    for (const auto &p : state.params.params) {
        manifest.push_back({{"name", p.name},
                            {"kind", param_kind_name(p.kind)},
                            {"shape", p.tensor.shape},
                            {"offset", offset}});
        offset += static_cast<uint64_t>(p.tensor.numel()) * 4;
    }
    json running = json::array();
    for (const auto &b : state.running) {
        running.push_back({{"name", b.name},
                           {"shape", b.mean.shape},
                           {"mean_offset", offset},
                           {"var_offset", offset + static_cast<uint64_t>(b.mean.numel()) * 4}});
        offset += static_cast<uint64_t>(b.mean.numel()) * 8;
    }
    json header = {{"arch", arch_name(state.spec.arch)},
                   {"class_count", state.spec.class_count},
                   {"mel_bins", state.spec.mel_bins},
                   {"channels", state.spec.channels},
                   {"epoch", state.epoch},
                   {"metrics", state.metrics},
                   {"hyper", state.hyper},
                   {"manifest", manifest},
                   {"running", running}};
    const std::string header_str = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header_str.size());
    out += header_str;
    for (const auto &p : state.params.params) {
        out.append(reinterpret_cast<const char *>(p.tensor.ptr()),
                   static_cast<size_t>(p.tensor.numel()) * 4);
    }
    for (const auto &b : state.running) {
        out.append(reinterpret_cast<const char *>(b.mean.ptr()),
                   static_cast<size_t>(b.mean.numel()) * 4);
        out.append(reinterpret_cast<const char *>(b.var.ptr()),
                   static_cast<size_t>(b.var.numel()) * 4);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(CheckpointErrorKind::Io, "cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError(CheckpointErrorKind::Io, "write failed for " + path);
}

ModelState load_checkpoint(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(CheckpointErrorKind::Io, "cannot read " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointErrorKind::BadMagic, path + " is not a checkpoint");
    }
    const uint32_t version = get_u32(buf.data() + 4);
    if (version != kVersion) {
        throw CheckpointError(CheckpointErrorKind::VersionMismatch,
                              "unsupported checkpoint version " + std::to_string(version));
    }
    const uint64_t hlen = get_u64(buf.data() + 8);
    if (buf.size() < 16 + hlen) {
        throw CheckpointError(CheckpointErrorKind::PayloadLengthMismatch,
                              "truncated header in " + path);
    }
    json header;
    try {
        header = json::parse(buf.begin() + 16, buf.begin() + 16 + static_cast<long>(hlen));
    } catch (const json::exception &e) {
        throw CheckpointError(CheckpointErrorKind::ManifestMismatch,
                              "bad checkpoint header: " + std::string(e.what()));
    }
    const unsigned char *payload = buf.data() + 16 + hlen;
    const uint64_t payload_len = buf.size() - 16 - hlen;

    ModelState state;
    try {
        state.spec.arch = arch_from_name(header.at("arch").get<std::string>());
        state.spec.class_count = header.at("class_count").get<int>();
        state.spec.mel_bins = header.at("mel_bins").get<int>();
        state.spec.channels = header.at("channels").get<std::vector<int>>();
        state.epoch = header.at("epoch").get<int>();
        state.metrics = header.at("metrics").get<std::map<std::string, double>>();
        state.hyper = header.at("hyper").get<std::map<std::string, std::string>>();

        uint64_t expected = 0;
        for (const auto &m : header.at("manifest")) {
            NamedParam p;
            p.name = m.at("name").get<std::string>();
            p.kind = param_kind_from_name(m.at("kind").get<std::string>());
            const auto shape = m.at("shape").get<std::vector<int>>();
            const uint64_t off = m.at("offset").get<uint64_t>();
            if (off != expected) {
                throw CheckpointError(CheckpointErrorKind::ManifestMismatch,
                                      "manifest offset mismatch at " + p.name);
            }
            p.tensor = Tensor(shape);
            expected += static_cast<uint64_t>(p.tensor.numel()) * 4;
            state.params.params.push_back(std::move(p));
        }
        for (const auto &r : header.at("running")) {
            BnBuffers b;
            b.name = r.at("name").get<std::string>();
            const auto shape = r.at("shape").get<std::vector<int>>();
            b.mean = Tensor(shape);
            b.var = Tensor(shape);
            if (r.at("mean_offset").get<uint64_t>() != expected ||
                r.at("var_offset").get<uint64_t>() !=
                    expected + static_cast<uint64_t>(b.mean.numel()) * 4) {
                throw CheckpointError(CheckpointErrorKind::ManifestMismatch,
                                      "running-stat offset mismatch at " + b.name);
            }
            expected += static_cast<uint64_t>(b.mean.numel()) * 8;
            state.running.push_back(std::move(b));
        }
        if (expected != payload_len) {
            throw CheckpointError(CheckpointErrorKind::PayloadLengthMismatch,
                                  "payload length mismatch: manifest expects " +
                                      std::to_string(expected) + " bytes, file has " +
                                      std::to_string(payload_len));
        }
    } catch (const json::exception &e) {
        throw CheckpointError(CheckpointErrorKind::ManifestMismatch,
                              "bad checkpoint header: " + std::string(e.what()));
    }

    uint64_t off = 0;
    for (auto &p : state.params.params) {
        std::memcpy(p.tensor.ptr(), payload + off, static_cast<size_t>(p.tensor.numel()) * 4);
        off += static_cast<uint64_t>(p.tensor.numel()) * 4;
    }
    for (auto &b : state.running) {
        std::memcpy(b.mean.ptr(), payload + off, static_cast<size_t>(b.mean.numel()) * 4);
        off += static_cast<uint64_t>(b.mean.numel()) * 4;
        std::memcpy(b.var.ptr(), payload + off, static_cast<size_t>(b.var.numel()) * 4);
        off += static_cast<uint64_t>(b.var.numel()) * 4;
    }
    return state;
}

}  // namespace lossland

#include "lossland/models.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "lossland/rng.hpp"

namespace lossland {

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::Mini10: return "mini10";
        case Arch::Mini14: return "mini14";
        case Arch::Quadratic: return "quadratic";
    }
    throw std::invalid_argument("arch_name: bad enum");
}

Arch arch_from_name(const std::string &name) {
    if (name == "mini10") return Arch::Mini10;
    if (name == "mini14") return Arch::Mini14;
    if (name == "quadratic") return Arch::Quadratic;
    throw std::invalid_argument("unknown architecture '" + name + "'");
}

std::string param_kind_name(ParamKind k) {
    switch (k) {
        case ParamKind::ConvWeight: return "conv_weight";
        case ParamKind::LinearWeight: return "linear_weight";
        case ParamKind::Bias: return "bias";
        case ParamKind::BnGamma: return "bn_gamma";
        case ParamKind::BnBeta: return "bn_beta";
    }
    throw std::invalid_argument("param_kind_name: bad enum");
}

ParamKind param_kind_from_name(const std::string &name) {
    if (name == "conv_weight") return ParamKind::ConvWeight;
    if (name == "linear_weight") return ParamKind::LinearWeight;
    if (name == "bias") return ParamKind::Bias;
    if (name == "bn_gamma") return ParamKind::BnGamma;
    if (name == "bn_beta") return ParamKind::BnBeta;
    throw std::invalid_argument("unknown parameter kind '" + name + "'");
}

int64_t ParamVector::total_size() const {
    int64_t n = 0;
    for (const auto &p : params) n += p.tensor.numel();
    return n;
}

std::vector<float> ParamVector::flatten() const {
    std::vector<float> flat;
    flat.reserve(static_cast<size_t>(total_size()));
    for (const auto &p : params) flat.insert(flat.end(), p.tensor.data.begin(), p.tensor.data.end());
    return flat;
}

void ParamVector::unflatten(std::span<const float> flat) {
    if (static_cast<int64_t>(flat.size()) != total_size()) {
        throw ShapeError("unflatten: got " + std::to_string(flat.size()) +
                         " values, expected " + std::to_string(total_size()));
    }
    size_t off = 0;
    for (auto &p : params) {
        std::memcpy(p.tensor.ptr(), flat.data() + off,
                    sizeof(float) * static_cast<size_t>(p.tensor.numel()));
        off += static_cast<size_t>(p.tensor.numel());
    }
}

int ParamVector::filter_count(const NamedParam &p) {
    if (p.kind == ParamKind::ConvWeight || p.kind == ParamKind::LinearWeight) {
        return p.tensor.dim(0);
    }
    return 0;
}

std::span<float> ParamVector::filter_slice(NamedParam &p, int j) {
    const int64_t stride = p.tensor.numel() / p.tensor.dim(0);
    return {p.tensor.ptr() + j * stride, static_cast<size_t>(stride)};
}

std::span<const float> ParamVector::filter_slice(const NamedParam &p, int j) {
    const int64_t stride = p.tensor.numel() / p.tensor.dim(0);
    return {p.tensor.ptr() + j * stride, static_cast<size_t>(stride)};
}

ParamVector ParamVector::zeros_like() const {
    ParamVector out;
    out.params.reserve(params.size());
    for (const auto &p : params) {
        out.params.push_back({p.name, p.kind, Tensor(p.tensor.shape)});
    }
    return out;
}

namespace {

Tensor he_normal(std::vector<int> shape, int fan_in, Rng &rng) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / fan_in);
    for (auto &v : t.data) v = static_cast<float>(stddev * rng.normal());
    return t;
}

void add_conv_block(ModelState &state, const std::string &prefix, int in_ch,
                    int out_ch, Rng &rng) {
    auto &ps = state.params.params;
    for (int k = 1; k <= 2; ++k) {
        const int ci = k == 1 ? in_ch : out_ch;
        const std::string conv = prefix + ".conv" + std::to_string(k);
        const std::string bn = prefix + ".bn" + std::to_string(k);
        ps.push_back({conv + ".weight", ParamKind::ConvWeight,
                      he_normal({out_ch, ci, 3, 3}, ci * 9, rng)});
        ps.push_back({conv + ".bias", ParamKind::Bias, Tensor({out_ch})});
        ps.push_back({bn + ".gamma", ParamKind::BnGamma, Tensor::full({out_ch}, 1.0f)});
        ps.push_back({bn + ".beta", ParamKind::BnBeta, Tensor({out_ch})});
        state.running.push_back({bn, Tensor({out_ch}), Tensor::full({out_ch}, 1.0f)});
    }
}

}  // namespace

ModelState build_model(const ModelSpec &spec, uint64_t seed) {
    if (spec.arch != Arch::Mini10 && spec.arch != Arch::Mini14) {
        throw std::invalid_argument("build_model: unsupported architecture '" +
                                    arch_name(spec.arch) + "'");
    }
    if (spec.class_count < 2) throw std::invalid_argument("build_model: class_count must be >= 2");
    if (spec.channels.empty()) throw std::invalid_argument("build_model: channels must be nonempty");

    ModelState state;
    state.spec = spec;
    Rng rng(derive_seed(seed, 0x6d6f64656cULL));
    int in_ch = 1;
    for (size_t b = 0; b < spec.channels.size(); ++b) {
        add_conv_block(state, "block" + std::to_string(b + 1), in_ch, spec.channels[b], rng);
        in_ch = spec.channels[b];
    }
    auto &ps = state.params.params;
    ps.push_back({"head.linear.weight", ParamKind::LinearWeight,
                  he_normal({spec.class_count, in_ch}, in_ch, rng)});
    ps.push_back({"head.linear.bias", ParamKind::Bias, Tensor({spec.class_count})});
    return state;
}

Tape::VarId model_logits(Tape &tape, ModelState &state, const Tensor &inputs,
                         bool train, std::vector<Tape::VarId> *param_vars) {
    const ModelSpec &spec = state.spec;
    if (inputs.rank() != 4 || inputs.dim(1) != 1 || inputs.dim(2) != spec.mel_bins) {
        throw ShapeError("model_logits: expected input [N,1," +
                         std::to_string(spec.mel_bins) + ",frames], got " +
                         shape_str(inputs.shape));
    }
    std::vector<Tape::VarId> pv(state.params.params.size());
    for (size_t i = 0; i < pv.size(); ++i) {
        pv[i] = tape.leaf(state.params.params[i].tensor, true);
    }
    if (param_vars) *param_vars = pv;

    auto find = [&](const std::string &name) -> Tape::VarId {
        for (size_t i = 0; i < state.params.params.size(); ++i) {
            if (state.params.params[i].name == name) return pv[i];
        }
        throw std::logic_error("model_logits: missing parameter " + name);
    };
    auto &bn_bufs = state.running;
    auto find_bn = [&](const std::string &name) -> BnBuffers & {
        for (auto &b : bn_bufs) {
            if (b.name == name) return b;
        }
        throw std::logic_error("model_logits: missing bn buffers " + name);
    };

    Tape::VarId x = tape.leaf(inputs, false);
    for (size_t b = 1; b <= spec.channels.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b);
        for (int k = 1; k <= 2; ++k) {
            const std::string conv = prefix + ".conv" + std::to_string(k);
            const std::string bn = prefix + ".bn" + std::to_string(k);
            x = tape.conv2d_same(x, find(conv + ".weight"));
            x = tape.add_bias(x, find(conv + ".bias"));
            BnBuffers &bb = find_bn(bn);
            x = tape.batchnorm2d(x, find(bn + ".gamma"), find(bn + ".beta"), bb.mean,
                                 bb.var, train);
            x = tape.relu(x);
        }
        x = tape.mean_pool_2x2(x);
    }
    x = tape.global_avg_max_pool(x);
    x = tape.matmul_nt(x, find("head.linear.weight"));
    return tape.add_bias(x, find("head.linear.bias"));
}

double model_loss(ModelState &state, const Tensor &inputs,
                  const std::vector<int> &labels, bool train) {
    Tape tape(false);
    Tape::VarId logits = model_logits(tape, state, inputs, train);
    Tape::VarId loss = tape.softmax_cross_entropy(logits, labels);
    return tape.value(loss).data[0];
}

std::string model_hash(const ModelState &state) {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const float *p, int64_t n) {
        const auto *bytes = reinterpret_cast<const unsigned char *>(p);
        for (int64_t i = 0; i < n * 4; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto &p : state.params.params) mix(p.tensor.ptr(), p.tensor.numel());
    for (const auto &b : state.running) {
        mix(b.mean.ptr(), b.mean.numel());
        mix(b.var.ptr(), b.var.numel());
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

QuadraticModel QuadraticModel::make(std::vector<float> center,
                                    std::vector<double> curvature) {
    if (center.size() != curvature.size() || center.empty()) {
        throw std::invalid_argument("QuadraticModel: center/curvature size mismatch");
    }
    for (double c : curvature) {
        if (c < 0.0) throw std::invalid_argument("QuadraticModel: curvature must be non-negative");
    }
    const int n = static_cast<int>(center.size());
    QuadraticModel m;
    m.center.params.push_back({"theta", ParamKind::LinearWeight, Tensor({1, n}, std::move(center))});
    m.curvature = std::move(curvature);
    return m;
}

double QuadraticModel::loss_at(const ParamVector &theta) const {
    const Tensor &t = theta.params.at(0).tensor;
    const Tensor &c = center.params.at(0).tensor;
    if (t.numel() != c.numel()) {
        throw ShapeError("QuadraticModel::loss_at: dimension mismatch");
    }
    double acc = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) {
        const double d = static_cast<double>(t.data[static_cast<size_t>(i)]) -
                         c.data[static_cast<size_t>(i)];
        acc += curvature[static_cast<size_t>(i)] * d * d;
    }
    return acc;
}

}  // namespace lossland

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lossland/tape.hpp"
#include "lossland/tensor.hpp"

namespace lossland {

enum class Arch { Mini10, Mini14, Quadratic };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string &name);

struct ModelSpec {
    Arch arch = Arch::Mini10;
    int class_count = 10;
    int mel_bins = 64;
    std::vector<int> channels;  // per conv block

    static ModelSpec mini10(int classes = 10, int mel_bins = 64) {
        return {Arch::Mini10, classes, mel_bins, {16, 32}};
    }
    static ModelSpec mini14(int classes = 10, int mel_bins = 64) {
        return {Arch::Mini14, classes, mel_bins, {16, 32, 64}};
    }
};

enum class ParamKind { ConvWeight, LinearWeight, Bias, BnGamma, BnBeta };

std::string param_kind_name(ParamKind k);
ParamKind param_kind_from_name(const std::string &name);

struct NamedParam {
    std::string name;
    ParamKind kind;
    Tensor tensor;
};

/// Flat, named view of all trainable parameters. Filter structure:
/// ConvWeight [O,C,kh,kw] -> filter j is the j-th out-slice (C*kh*kw values);
/// LinearWeight [O,I] -> filter j is the j-th row; everything else is
/// non-filter.
struct ParamVector {
    std::vector<NamedParam> params;

    int64_t total_size() const;
    std::vector<float> flatten() const;
    void unflatten(std::span<const float> flat);

    /// Number of filter slices in parameter p (0 for non-filter kinds).
    static int filter_count(const NamedParam &p);
    /// Contiguous span of filter j within p's data.
    static std::span<float> filter_slice(NamedParam &p, int j);
    static std::span<const float> filter_slice(const NamedParam &p, int j);

    /// Same names/kinds/shapes, zero-filled data.
    ParamVector zeros_like() const;
};

struct BnBuffers {
    std::string name;  // matching layer prefix
    Tensor mean;
    Tensor var;
};

struct ModelState {
    ModelSpec spec;
    ParamVector params;
    std::vector<BnBuffers> running;
    int epoch = 0;
    std::map<std::string, double> metrics;
    std::map<std::string, std::string> hyper;
};

/// Deterministic He fan-in initialization; batchnorm stats start at mean 0,
/// variance 1.
ModelState build_model(const ModelSpec &spec, uint64_t seed);

/// Records the full forward pass on `tape` and returns the logits node. When
/// `param_vars` is non-null it receives one VarId per entry of state.params,
/// in order. In train mode the state's running batchnorm buffers are updated.
Tape::VarId model_logits(Tape &tape, ModelState &state, const Tensor &inputs,
                         bool train, std::vector<Tape::VarId> *param_vars = nullptr);

/// Mean cross-entropy of one batch. Eval mode is side-effect free.
double model_loss(ModelState &state, const Tensor &inputs,
                  const std::vector<int> &labels, bool train);

/// FNV-1a over the parameter and running-stat bytes, as a hex string.
std::string model_hash(const ModelState &state);

/// Analytic oracle: L(theta) = sum_i c_i (theta_i - center_i)^2.
struct QuadraticModel {
    ParamVector center;  // single tensor named "theta"
    std::vector<double> curvature;

    static QuadraticModel make(std::vector<float> center, std::vector<double> curvature);
    double loss_at(const ParamVector &theta) const;
};

}  // namespace lossland

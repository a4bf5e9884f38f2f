#include "lossland/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace lossland {

std::string optim_kind_name(OptimConfig::Kind k) {
    return k == OptimConfig::Kind::SGD ? "sgd" : "adam";
}

OptimConfig::Kind optim_kind_from_name(const std::string &name) {
    if (name == "sgd") return OptimConfig::Kind::SGD;
    if (name == "adam") return OptimConfig::Kind::Adam;
    throw std::invalid_argument("unknown optimiser '" + name + "'");
}

void optim_step(ParamVector &params, const std::vector<Tensor> &grads,
                const OptimConfig &cfg, OptimState &state) {
    if (grads.size() != params.params.size()) {
        throw ShapeError("optim_step: " + std::to_string(grads.size()) +
                         " gradients for " + std::to_string(params.params.size()) +
                         " parameters");
    }
    if (cfg.lr <= 0.0) throw std::invalid_argument("optim_step: learning rate must be positive");
    if (state.m.empty()) {
        for (const auto &p : params.params) state.m.push_back(Tensor(p.tensor.shape));
        if (cfg.kind == OptimConfig::Kind::Adam) {
            for (const auto &p : params.params) state.v.push_back(Tensor(p.tensor.shape));
        }
    }
    for (size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].same_shape(params.params[i].tensor)) {
            throw ShapeError("optim_step: gradient shape " + shape_str(grads[i].shape) +
                             " mismatches parameter " + params.params[i].name);
        }
        for (float g : grads[i].data) {
            if (!std::isfinite(g)) {
                throw std::runtime_error("optim_step: non-finite gradient in parameter " +
                                         params.params[i].name);
            }
        }
    }

    if (cfg.kind == OptimConfig::Kind::SGD) {
        for (size_t i = 0; i < grads.size(); ++i) {
            float *theta = params.params[i].tensor.ptr();
            float *vel = state.m[i].ptr();
            const float *g = grads[i].ptr();
            const int64_t n = grads[i].numel();
            for (int64_t j = 0; j < n; ++j) {
                vel[j] = static_cast<float>(cfg.momentum * vel[j] + g[j]);
                theta[j] -= static_cast<float>(cfg.lr * vel[j]);
            }
        }
    } else {
        state.step_count += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
        for (size_t i = 0; i < grads.size(); ++i) {
            float *theta = params.params[i].tensor.ptr();
            float *m = state.m[i].ptr();
            float *v = state.v[i].ptr();
            const float *g = grads[i].ptr();
            const int64_t n = grads[i].numel();
            for (int64_t j = 0; j < n; ++j) {
                m[j] = static_cast<float>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j]);
                v[j] = static_cast<float>(cfg.beta2 * v[j] +
                                          (1.0 - cfg.beta2) * static_cast<double>(g[j]) * g[j]);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                theta[j] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
            }
        }
    }
}

}  // namespace lossland

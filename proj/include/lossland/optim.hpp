#pragma once

#include <string>
#include <vector>

#include "lossland/models.hpp"
#include "lossland/tensor.hpp"

namespace lossland {

struct OptimConfig {
    enum class Kind { SGD, Adam };
    Kind kind = Kind::Adam;
    double lr = 1e-3;
    double momentum = 0.9;  // SGD only
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static OptimConfig sgd(double lr, double momentum = 0.9) {
        OptimConfig c;
        c.kind = Kind::SGD;
        c.lr = lr;
        c.momentum = momentum;
        return c;
    }
    static OptimConfig adam(double lr) {
        OptimConfig c;
        c.kind = Kind::Adam;
        c.lr = lr;
        return c;
    }
};

std::string optim_kind_name(OptimConfig::Kind k);
OptimConfig::Kind optim_kind_from_name(const std::string &name);

/// Moment buffers; zero-initialized lazily on the first step.
struct OptimState {
    std::vector<Tensor> m;  // SGD velocity / Adam first moment
    std::vector<Tensor> v;  // Adam second moment
    long step_count = 0;
};

/// One update. SGD: v <- mu*v + g, theta <- theta - lr*v. Adam: standard
/// bias-corrected update. Throws on non-finite gradients, naming the
/// parameter.
void optim_step(ParamVector &params, const std::vector<Tensor> &grads,
                const OptimConfig &cfg, OptimState &state);

}  // namespace lossland

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lossland/rng.hpp"
#include "lossland/tape.hpp"
#include "lossland/tensor.hpp"

namespace lossland::testing {

inline Tensor random_tensor(std::vector<int> shape, Rng &rng, bool avoid_zero = false,
                            float scale = 1.0f) {
    Tensor t(std::move(shape));
    for (auto &v : t.data) {
        double x = rng.normal();
        if (avoid_zero && std::fabs(x) < 5e-2) x = x < 0 ? x - 5e-2 : x + 5e-2;
        v = static_cast<float>(x * scale);
    }
    return t;
}

// Graph builder: inputs are pre-registered grad-tracked leaves; must return a
// scalar loss node.
using GraphFn = std::function<Tape::VarId(Tape &, const std::vector<Tape::VarId> &)>;

// Central finite differences, independent of the backward pass.
inline double fd_gradient(const GraphFn &graph, std::vector<Tensor> inputs,
                          size_t which, size_t coord, double h) {
    auto eval = [&](float v) {
        std::vector<Tensor> local = inputs;
        local[which].data[coord] = v;
        Tape tape(false);
        std::vector<Tape::VarId> ids;
        ids.reserve(local.size());
        for (auto &t : local) ids.push_back(tape.leaf(t, false));
        Tape::VarId loss = graph(tape, ids);
        return static_cast<double>(tape.value(loss).data[0]);
    };
    const float orig = inputs[which].data[coord];
    const double fp = eval(static_cast<float>(orig + h));
    const double fm = eval(static_cast<float>(orig - h));
    return (fp - fm) / (2.0 * h);
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    size_t checked = 0;
};

inline GradCheckResult check_gradients(const GraphFn &graph,
                                       const std::vector<Tensor> &inputs,
                                       double h = 1e-3) {
    Tape tape(true);
    std::vector<Tape::VarId> ids;
    ids.reserve(inputs.size());
    for (const auto &t : inputs) ids.push_back(tape.leaf(t, true));
    Tape::VarId loss = graph(tape, ids);
    tape.backward(loss);

    GradCheckResult res;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Tensor &g = tape.grad(ids[i]);
        for (size_t k = 0; k < inputs[i].data.size(); ++k) {
            const double ad = g.data.empty() ? 0.0 : g.data[k];
            const double fd = fd_gradient(graph, inputs, i, k, h);
            // floor of 1.0 makes this an absolute tolerance for small entries;
            // float32 forward passes quantize the loss, so central differences
            // carry noise of order eps_f * |loss| / (2h)
            const double denom = std::max({std::fabs(ad), std::fabs(fd), 1.0});
            res.max_rel_err = std::max(res.max_rel_err, std::fabs(ad - fd) / denom);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace lossland::testing

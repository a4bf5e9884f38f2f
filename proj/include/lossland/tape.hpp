#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lossland/tensor.hpp"

namespace lossland {

/// Reverse-mode autodiff tape.
///
/// Values are recorded in creation order, so parents always precede children
/// and a reverse sweep over node ids is a valid topological order. All
/// reductions run in a fixed row-major sequential order with 64-bit
/// accumulators, so repeated evaluations are bit-identical.
class Tape {
  public:
    using VarId = int;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    VarId leaf(Tensor value, bool requires_grad = false);

    const Tensor &value(VarId id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor &grad(VarId id) const { return nodes_[static_cast<size_t>(id)].grad; }

    /// Accumulates gradients of `loss` into every reachable node. `loss` must
    /// be a scalar recorded on this tape with grad tracking on.
    void backward(VarId loss);
    void zero_grad();

    // ---- ops ----
    VarId matmul(VarId a, VarId b);
    /// a [M,K] times b[N,K] transposed -> [M,N]; the linear-layer form.
    VarId matmul_nt(VarId a, VarId b);
    /// Stride-1 zero-padded "same" convolution. input [N,C,H,W], weight
    /// [O,C,kh,kw] with odd kh/kw; output [N,O,H,W].
    VarId conv2d_same(VarId input, VarId weight);
    /// bias [C] broadcast over [N,C,H,W], or [F] over [N,F].
    VarId add_bias(VarId x, VarId bias);
    VarId relu(VarId x);
    /// Per-channel batch normalization over [N,C,H,W]. In train mode batch
    /// statistics are used and the running buffers updated in place; in eval
    /// mode the running buffers are read and left untouched.
    VarId batchnorm2d(VarId x, VarId gamma, VarId beta, Tensor &running_mean,
                      Tensor &running_var, bool train, float momentum = 0.1f,
                      float eps = 1e-5f);
    /// 2x2 mean pooling, stride 2; trailing odd row/column dropped.
    VarId mean_pool_2x2(VarId x);
    /// [N,C,H,W] -> [N,C]: spatial mean plus spatial max per channel.
    VarId global_avg_max_pool(VarId x);
    /// Mean softmax cross-entropy over the batch; logits [N,C], labels in [0,C).
    VarId softmax_cross_entropy(VarId logits, const std::vector<int> &labels);
    VarId square(VarId x);
    VarId sum_all(VarId x);

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool tracked = false;  // produced by a recorded op
        std::vector<VarId> parents;
        std::function<void(Tape &, VarId)> back;
    };

    VarId record(Tensor value, std::vector<VarId> parents,
                 std::function<void(Tape &, VarId)> back);
    Node &node(VarId id) { return nodes_[static_cast<size_t>(id)]; }
    Tensor &grad_buf(VarId id);

    std::vector<Node> nodes_;
    bool grad_enabled_;
};

}  // namespace lossland

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lossland/models.hpp"
#include "lossland/optim.hpp"
#include "lossland/synth.hpp"

namespace lossland {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    OptimConfig optim;
    uint64_t seed = 42;
    bool shuffle = true;
};

struct EpochLog {
    int epoch = 0;  // 1-indexed
    double train_loss = 0.0;
    double train_acc = 0.0;
    double dev_acc = 0.0;
};

struct TrainResult {
    ModelState best;
    std::vector<EpochLog> logs;
    int best_epoch = 0;
};

/// Raised when the training loss goes non-finite; carries the log so far.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(std::string msg, std::vector<EpochLog> partial, int at_epoch)
        : std::runtime_error(std::move(msg)), logs(std::move(partial)), epoch(at_epoch) {}
    std::vector<EpochLog> logs;
    int epoch;
};

/// Stacks samples into a [N,1,bins,frames] batch tensor plus labels.
std::pair<Tensor, std::vector<int>> make_batch(const std::vector<Sample> &samples,
                                               size_t begin, size_t count);

/// Mean eval-mode cross-entropy over `samples` with a frozen batch order;
/// pure and bit-deterministic.
double eval_loss(ModelState &state, const std::vector<Sample> &samples,
                 int batch_size = 32);

/// Fraction of argmax-correct predictions in eval mode.
double accuracy(ModelState &state, const std::vector<Sample> &samples,
                int batch_size = 32);

/// 50-epoch-style loop: seeded per-epoch shuffling, epoch-end dev evaluation
/// on the IID portion of the test split, best epoch by dev accuracy with
/// earliest-epoch tie-break.
TrainResult train(const ModelSpec &spec, const Dataset &data, const TrainConfig &cfg);

}  // namespace lossland

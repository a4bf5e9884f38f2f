#include "lossland/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "lossland/rng.hpp"

namespace lossland {

std::pair<Tensor, std::vector<int>> make_batch(const std::vector<Sample> &samples,
                                               size_t begin, size_t count) {
    if (count == 0 || begin + count > samples.size()) {
        throw std::invalid_argument("make_batch: bad range");
    }
    const Tensor &first = samples[begin].features;
    const int bins = first.dim(0), frames = first.dim(1);
    Tensor batch({static_cast<int>(count), 1, bins, frames});
    std::vector<int> labels(count);
    for (size_t i = 0; i < count; ++i) {
        const Sample &s = samples[begin + i];
        if (!s.features.same_shape(first)) {
            throw ShapeError("make_batch: inconsistent feature shapes");
        }
        std::memcpy(batch.ptr() + i * static_cast<size_t>(bins) * frames,
                    s.features.ptr(), sizeof(float) * static_cast<size_t>(bins) * frames);
        labels[i] = s.label;
    }
    return {std::move(batch), std::move(labels)};
}

double eval_loss(ModelState &state, const std::vector<Sample> &samples, int batch_size) {
    if (samples.empty()) throw std::invalid_argument("eval_loss: empty sample list");
    double total = 0.0;
    for (size_t i = 0; i < samples.size(); i += static_cast<size_t>(batch_size)) {
        const size_t n = std::min(static_cast<size_t>(batch_size), samples.size() - i);
        auto [inputs, labels] = make_batch(samples, i, n);
        total += model_loss(state, inputs, labels, /*train=*/false) * static_cast<double>(n);
    }
    return total / static_cast<double>(samples.size());
}

double accuracy(ModelState &state, const std::vector<Sample> &samples, int batch_size) {
    if (samples.empty()) throw std::invalid_argument("accuracy: empty sample list");
    size_t correct = 0;
    for (size_t i = 0; i < samples.size(); i += static_cast<size_t>(batch_size)) {
        const size_t n = std::min(static_cast<size_t>(batch_size), samples.size() - i);
        auto [inputs, labels] = make_batch(samples, i, n);
        Tape tape(false);
        Tape::VarId logits = model_logits(tape, state, inputs, /*train=*/false);
        const Tensor &z = tape.value(logits);
        const int C = z.dim(1);
        for (size_t r = 0; r < n; ++r) {
            const float *row = z.ptr() + r * static_cast<size_t>(C);
            int arg = 0;
            for (int c = 1; c < C; ++c) {
                if (row[c] > row[arg]) arg = c;
            }
            if (arg == labels[r]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(const ModelSpec &spec, const Dataset &data, const TrainConfig &cfg) {
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw std::invalid_argument("train: epochs and batch_size must be >= 1");
    }
    if (data.train.empty() || data.test.empty()) {
        throw std::invalid_argument("train: dataset needs train and dev samples");
    }
    auto [dev, ood] = split_iid_ood(data.test);
    (void)ood;
    if (dev.empty()) throw std::invalid_argument("train: no IID dev samples in test split");

    ModelState state = build_model(spec, cfg.seed);
    {
        char lr[32];
        std::snprintf(lr, sizeof(lr), "%g", cfg.optim.lr);
        state.hyper = {{"arch", arch_name(spec.arch)},
                       {"optimiser", optim_kind_name(cfg.optim.kind)},
                       {"lr", lr},
                       {"batch_size", std::to_string(cfg.batch_size)},
                       {"epochs", std::to_string(cfg.epochs)},
                       {"seed", std::to_string(cfg.seed)}};
    }
    OptimState opt;
    std::vector<size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0u);
    std::vector<Sample> shuffled = data.train;

    TrainResult result;
    double best_dev = -1.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            Rng rng(derive_seed(cfg.seed, 0x65706f6368ULL + static_cast<uint64_t>(epoch)));
            rng.shuffle(order.begin(), order.end());
        }
        for (size_t i = 0; i < order.size(); ++i) shuffled[i] = data.train[order[i]];

        double loss_sum = 0.0;
        size_t correct = 0;
        for (size_t i = 0; i < shuffled.size(); i += static_cast<size_t>(cfg.batch_size)) {
            const size_t n = std::min(static_cast<size_t>(cfg.batch_size), shuffled.size() - i);
            auto [inputs, labels] = make_batch(shuffled, i, n);
            Tape tape(true);
            std::vector<Tape::VarId> pvars;
            Tape::VarId logits = model_logits(tape, state, inputs, /*train=*/true, &pvars);
            Tape::VarId loss = tape.softmax_cross_entropy(logits, labels);
            const double lv = tape.value(loss).data[0];
            if (!std::isfinite(lv)) {
                throw DivergenceError("training diverged (non-finite loss) at epoch " +
                                          std::to_string(epoch),
                                      result.logs, epoch);
            }
            loss_sum += lv * static_cast<double>(n);
            const Tensor &z = tape.value(logits);
            for (size_t r = 0; r < n; ++r) {
                const float *row = z.ptr() + r * static_cast<size_t>(z.dim(1));
                int arg = 0;
                for (int c = 1; c < z.dim(1); ++c) {
                    if (row[c] > row[arg]) arg = c;
                }
                if (arg == labels[r]) ++correct;
            }
            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(pvars.size());
            for (Tape::VarId id : pvars) {
                Tensor g = tape.grad(id);
                if (g.data.empty()) g = Tensor(tape.value(id).shape);
                grads.push_back(std::move(g));
            }
            try {
                optim_step(state.params, grads, cfg.optim, opt);
            } catch (const std::runtime_error &e) {
                // non-finite gradients are the same failure mode as a
                // non-finite loss: the run has left the trainable region
                throw DivergenceError(std::string("training diverged: ") + e.what(),
                                      result.logs, epoch);
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(shuffled.size());
        log.train_acc = static_cast<double>(correct) / static_cast<double>(shuffled.size());
        log.dev_acc = accuracy(state, dev);
        result.logs.push_back(log);

        if (log.dev_acc > best_dev) {
            best_dev = log.dev_acc;
            result.best_epoch = epoch;
            result.best = state;  // deep copy of params + running stats
            result.best.epoch = epoch;
            result.best.metrics = {{"train_loss", log.train_loss},
                                   {"train_acc", log.train_acc},
                                   {"dev_acc", log.dev_acc}};
        }
    }
    return result;
}

}  // namespace lossland

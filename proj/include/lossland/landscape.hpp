#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lossland/models.hpp"
#include "lossland/synth.hpp"

namespace lossland {

/// Two random perturbation directions shaped like the model's parameters.
struct DirectionPair {
    ParamVector delta;
    ParamVector eta;
    uint64_t seed = 0;
    bool normalized = false;
};

/// Losses sampled on a rectangular (alpha, beta) lattice around a trained
/// state. Non-finite evaluations are stored as +infinity.
struct SurfaceGrid {
    std::vector<double> alphas;
    std::vector<double> betas;
    std::vector<double> losses;  // row-major [alphas x betas]
    double center_loss = 0.0;
    std::string model_hash;
    std::string split;
    uint64_t direction_seed = 0;

    double at(size_t ai, size_t bi) const { return losses[ai * betas.size() + bi]; }
    bool has_center() const;
};

using LossFn = std::function<double(const ParamVector &)>;

/// I.i.d. standard-normal entries per coordinate; delta and eta come from
/// disjoint seeded substreams. Not yet normalized.
DirectionPair sample_directions(const ParamVector &shape_like, uint64_t seed);

/// Rescales every filter slice of delta and eta to the norm of the matching
/// filter of theta; non-filter entries (biases, batchnorm) are zeroed. A
/// zero-norm theta filter yields a zero direction slice.
void filter_normalize(DirectionPair &dir, const ParamVector &theta);

/// Evaluates loss(theta + alpha*delta + beta*eta) over the lattice. The loss
/// function must be safe to call from multiple threads; results are written
/// to fixed slots so any worker count produces a bit-identical grid.
SurfaceGrid scan_surface(const ParamVector &center, const DirectionPair &dir,
                         const LossFn &loss, double alpha_min, double alpha_max,
                         double beta_min, double beta_max, int points_per_axis,
                         int workers = 1);

SurfaceGrid scan_surface_symmetric(const ParamVector &center, const DirectionPair &dir,
                                   const LossFn &loss, double radius,
                                   int points_per_axis, int workers = 1);

/// Eval-mode cross-entropy of `state` with its parameters replaced by the
/// perturbed vector; each call works on a private copy of the state.
LossFn make_model_loss_fn(const ModelState &state, const std::vector<Sample> &eval_samples,
                          int batch_size = 32);

LossFn make_quadratic_loss_fn(const QuadraticModel &model);

void save_surface_csv(const SurfaceGrid &grid, const std::string &path);
void save_surface_meta(const SurfaceGrid &grid, const std::string &path);
SurfaceGrid load_surface_csv(const std::string &path);

}  // namespace lossland

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lossland/landscape.hpp"

namespace lossland {

/// Distinct from precondition violations: the inputs are structurally valid
/// but statistically degenerate (zero variance).
class DegenerateDataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SharpnessResult {
    double epsilon = 0.0;
    std::vector<double> values;  // per repeat; +inf marks a divergent scan
    std::vector<uint64_t> seeds;
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1); 0 with single_repeat flag when n == 1
    bool single_repeat = false;
    bool divergent = false;
    int divergent_count = 0;
};

/// Normalized maximum loss increase within the radius-epsilon ball of the
/// (alpha, beta) plane, in percent: (max - center) / (1 + center) * 100.
/// Grid points with alpha^2 + beta^2 <= epsilon^2 participate, including
/// (0,0); +inf cells propagate. `full_square` lifts the ball restriction.
double epsilon_sharpness(const SurfaceGrid &grid, double epsilon,
                         bool full_square = false);

struct SharpnessProtocol {
    int repeats = 3;
    double epsilon = 0.25;
    double radius = 0.25;
    int points = 11;  // 11x11 -> 121 loss values per scan
    uint64_t base_seed = 1;
    int workers = 1;
    bool full_square = false;
};

using DirectionFn = std::function<DirectionPair(uint64_t seed)>;

/// Repeats independent direction draws (seeds derived from base_seed), one
/// scan plus one sharpness evaluation each. Divergent repeats are excluded
/// from mean/std but kept in `values` and flagged.
SharpnessResult sharpness_study(const ParamVector &center, const LossFn &loss,
                                const DirectionFn &directions,
                                const SharpnessProtocol &proto);

/// CNN protocol: Gaussian directions, filter-normalized against the state.
SharpnessResult sharpness_study_model(const ModelState &state,
                                      const std::vector<Sample> &eval_samples,
                                      const SharpnessProtocol &proto,
                                      int batch_size = 32);

/// Direction convention for the quadratic oracle: a random orthonormal
/// unit-length pair, so the scan coordinates carry the Euclidean metric.
DirectionFn orthonormal_directions(const ParamVector &shape_like);

/// Pearson product-moment correlation; needs >= 3 points and nonzero
/// variance on both sides.
double pearson(std::span<const double> xs, std::span<const double> ys);

void save_sharpness_json(const SharpnessResult &res, const std::string &model_hash,
                         const std::string &path);

}  // namespace lossland

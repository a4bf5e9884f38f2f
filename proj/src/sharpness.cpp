#include "lossland/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lossland/rng.hpp"

namespace lossland {

using nlohmann::json;

double epsilon_sharpness(const SurfaceGrid &grid, double epsilon, bool full_square) {
    if (epsilon <= 0.0) {
        throw std::invalid_argument("epsilon_sharpness: epsilon must be positive");
    }
    if (!grid.has_center()) {
        throw std::invalid_argument("epsilon_sharpness: grid does not contain (0,0)");
    }
    double max_a = 0.0, max_b = 0.0;
    for (double a : grid.alphas) max_a = std::max(max_a, std::fabs(a));
    for (double b : grid.betas) max_b = std::max(max_b, std::fabs(b));
    if (epsilon > std::hypot(max_a, max_b)) {
        throw std::invalid_argument("epsilon_sharpness: epsilon exceeds the grid's coordinate radius");
    }
    const double e2 = epsilon * epsilon;
    const double center = grid.center_loss;
    double max_loss = -std::numeric_limits<double>::infinity();
    for (size_t ai = 0; ai < grid.alphas.size(); ++ai) {
        for (size_t bi = 0; bi < grid.betas.size(); ++bi) {
            const double a = grid.alphas[ai], b = grid.betas[bi];
            if (!full_square && a * a + b * b > e2) continue;
            max_loss = std::max(max_loss, grid.at(ai, bi));
        }
    }
    return (max_loss - center) / (1.0 + center) * 100.0;
}

SharpnessResult sharpness_study(const ParamVector &center, const LossFn &loss,
                                const DirectionFn &directions,
                                const SharpnessProtocol &proto) {
    if (proto.repeats < 1) {
        throw std::invalid_argument("sharpness_study: repeats must be >= 1");
    }
    SharpnessResult res;
    res.epsilon = proto.epsilon;
    for (int k = 0; k < proto.repeats; ++k) {
        const uint64_t seed = derive_seed(proto.base_seed, 0x72707464ULL + static_cast<uint64_t>(k));
        DirectionPair dir = directions(seed);
        SurfaceGrid grid = scan_surface_symmetric(center, dir, loss, proto.radius,
                                                  proto.points, proto.workers);
        res.seeds.push_back(seed);
        res.values.push_back(epsilon_sharpness(grid, proto.epsilon, proto.full_square));
    }
    std::vector<double> finite;
    for (double v : res.values) {
        if (std::isfinite(v)) {
            finite.push_back(v);
        } else {
            res.divergent = true;
            ++res.divergent_count;
        }
    }
    if (finite.empty()) {
        res.mean = std::numeric_limits<double>::infinity();
        res.stddev = 0.0;
        res.single_repeat = res.values.size() == 1;
        return res;
    }
    double sum = 0.0;
    for (double v : finite) sum += v;
    res.mean = sum / static_cast<double>(finite.size());
    if (finite.size() < 2) {
        res.stddev = 0.0;
        res.single_repeat = true;
    } else {
        double ss = 0.0;
        for (double v : finite) ss += (v - res.mean) * (v - res.mean);
        res.stddev = std::sqrt(ss / static_cast<double>(finite.size() - 1));
    }
    return res;
}

SharpnessResult sharpness_study_model(const ModelState &state,
                                      const std::vector<Sample> &eval_samples,
                                      const SharpnessProtocol &proto, int batch_size) {
    const LossFn loss = make_model_loss_fn(state, eval_samples, batch_size);
    const DirectionFn dirs = [&state](uint64_t seed) {
        DirectionPair d = sample_directions(state.params, seed);
        filter_normalize(d, state.params);
        return d;
    };
    return sharpness_study(state.params, loss, dirs, proto);
}

DirectionFn orthonormal_directions(const ParamVector &shape_like) {
    const ParamVector like = shape_like;
    return [like](uint64_t seed) {
        DirectionPair dir = sample_directions(like, seed);
        std::vector<float> d = dir.delta.flatten();
        std::vector<float> e = dir.eta.flatten();
        std::vector<double> dd(d.begin(), d.end()), ee(e.begin(), e.end());
        double dn = 0.0;
        for (double v : dd) dn += v * v;
        dn = std::sqrt(dn);
        for (auto &v : dd) v /= dn;
        double proj = 0.0;
        for (size_t i = 0; i < dd.size(); ++i) proj += dd[i] * ee[i];
        for (size_t i = 0; i < ee.size(); ++i) ee[i] -= proj * dd[i];
        double en = 0.0;
        for (double v : ee) en += v * v;
        en = std::sqrt(en);
        for (auto &v : ee) v /= en;
        for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(dd[i]);
        for (size_t i = 0; i < e.size(); ++i) e[i] = static_cast<float>(ee[i]);
        dir.delta.unflatten(d);
        dir.eta.unflatten(e);
        dir.normalized = true;
        return dir;
    };
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 3) {
        throw std::invalid_argument("pearson: need matching lists of at least 3 values");
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateDataError("pearson: zero variance input");
    }
    return sxy / std::sqrt(sxx * syy);
}

void save_sharpness_json(const SharpnessResult &res, const std::string &model_hash,
                         const std::string &path) {
    auto enc = [](double v) -> json {
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };
    json values = json::array();
    for (double v : res.values) values.push_back(enc(v));
    json j = {{"epsilon", res.epsilon},
              {"values", values},
              {"seeds", res.seeds},
              {"mean", enc(res.mean)},
              {"std", res.stddev},
              {"single_repeat", res.single_repeat},
              {"divergent", res.divergent},
              {"divergent_count", res.divergent_count},
              {"model_hash", model_hash}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace lossland

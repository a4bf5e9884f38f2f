#include "lossland/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lossland/rng.hpp"
#include "lossland/trainer.hpp"

namespace lossland {

using nlohmann::json;

bool SurfaceGrid::has_center() const {
    return std::find(alphas.begin(), alphas.end(), 0.0) != alphas.end() &&
           std::find(betas.begin(), betas.end(), 0.0) != betas.end();
}

DirectionPair sample_directions(const ParamVector &shape_like, uint64_t seed) {
    DirectionPair dir;
    dir.seed = seed;
    dir.delta = shape_like.zeros_like();
    dir.eta = shape_like.zeros_like();
    Rng rng_delta(derive_seed(seed, 0x64656c7461ULL));
    Rng rng_eta(derive_seed(seed, 0x657461ULL));
    for (auto &p : dir.delta.params) {
        for (auto &v : p.tensor.data) v = static_cast<float>(rng_delta.normal());
    }
    for (auto &p : dir.eta.params) {
        for (auto &v : p.tensor.data) v = static_cast<float>(rng_eta.normal());
    }
    return dir;
}

namespace {

double frob_norm(std::span<const float> s) {
    double acc = 0.0;
    for (float v : s) acc += static_cast<double>(v) * v;
    return std::sqrt(acc);
}

void normalize_one(ParamVector &d, const ParamVector &theta, uint64_t reseed) {
    if (d.params.size() != theta.params.size()) {
        throw ShapeError("filter_normalize: direction/parameter layout mismatch");
    }
    Rng resampler(derive_seed(reseed, 0x7265736dULL));
    for (size_t i = 0; i < d.params.size(); ++i) {
        NamedParam &dp = d.params[i];
        const NamedParam &tp = theta.params[i];
        if (!dp.tensor.same_shape(tp.tensor)) {
            throw ShapeError("filter_normalize: shape mismatch at " + tp.name);
        }
        const int filters = ParamVector::filter_count(tp);
        if (filters == 0) {
            // biases and batchnorm parameters carry no perturbation
            std::fill(dp.tensor.data.begin(), dp.tensor.data.end(), 0.0f);
            continue;
        }
        for (int j = 0; j < filters; ++j) {
            auto ds = ParamVector::filter_slice(dp, j);
            auto ts = ParamVector::filter_slice(tp, j);
            const double tnorm = frob_norm(ts);
            if (tnorm == 0.0) {
                std::fill(ds.begin(), ds.end(), 0.0f);
                continue;
            }
            double dnorm = frob_norm(ds);
            while (dnorm == 0.0) {  // probability-zero; resample the slice
                for (auto &v : ds) v = static_cast<float>(resampler.normal());
                dnorm = frob_norm(ds);
            }
            const double scale = tnorm / dnorm;
            for (auto &v : ds) v = static_cast<float>(v * scale);
        }
    }
}

}  // namespace

void filter_normalize(DirectionPair &dir, const ParamVector &theta) {
    if (dir.normalized) {
        throw std::logic_error("filter_normalize: directions already normalized");
    }
    normalize_one(dir.delta, theta, dir.seed ^ 0x11);
    normalize_one(dir.eta, theta, dir.seed ^ 0x22);
    dir.normalized = true;
}

SurfaceGrid scan_surface(const ParamVector &center, const DirectionPair &dir,
                         const LossFn &loss, double alpha_min, double alpha_max,
                         double beta_min, double beta_max, int points_per_axis,
                         int workers) {
    if (!dir.normalized) {
        throw std::logic_error("scan_surface: directions must be normalized");
    }
    if (points_per_axis < 2) {
        throw std::invalid_argument("scan_surface: points_per_axis must be >= 2");
    }
    const bool symmetric = alpha_min == -alpha_max && beta_min == -beta_max;
    if (symmetric && points_per_axis % 2 == 0) {
        throw std::invalid_argument(
            "scan_surface: symmetric range needs an odd points_per_axis so (0,0) is on-grid");
    }
    const int n = points_per_axis;
    SurfaceGrid grid;
    grid.direction_seed = dir.seed;
    grid.alphas.resize(static_cast<size_t>(n));
    grid.betas.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        grid.alphas[static_cast<size_t>(i)] = alpha_min * (1.0 - t) + alpha_max * t;
        grid.betas[static_cast<size_t>(i)] = beta_min * (1.0 - t) + beta_max * t;
    }
    grid.losses.assign(static_cast<size_t>(n) * n, 0.0);

    const int64_t dim = center.total_size();
    const std::vector<float> theta = center.flatten();
    const std::vector<float> delta = dir.delta.flatten();
    const std::vector<float> eta = dir.eta.flatten();

    auto eval_cell = [&](int cell) {
        const int ai = cell / n, bi = cell % n;
        const double a = grid.alphas[static_cast<size_t>(ai)];
        const double b = grid.betas[static_cast<size_t>(bi)];
        ParamVector perturbed = center;
        std::vector<float> flat(static_cast<size_t>(dim));
        for (int64_t i = 0; i < dim; ++i) {
            flat[static_cast<size_t>(i)] = static_cast<float>(
                static_cast<double>(theta[static_cast<size_t>(i)]) +
                a * delta[static_cast<size_t>(i)] + b * eta[static_cast<size_t>(i)]);
        }
        perturbed.unflatten(flat);
        const double v = loss(perturbed);
        grid.losses[static_cast<size_t>(cell)] =
            std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    const int cells = n * n;
    workers = std::max(1, workers);
    if (workers == 1) {
        for (int c = 0; c < cells; ++c) eval_cell(c);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int c = w; c < cells; c += workers) eval_cell(c);
            });
        }
        for (auto &t : pool) t.join();
    }

    if (grid.has_center()) {
        const size_t ai = static_cast<size_t>(
            std::find(grid.alphas.begin(), grid.alphas.end(), 0.0) - grid.alphas.begin());
        const size_t bi = static_cast<size_t>(
            std::find(grid.betas.begin(), grid.betas.end(), 0.0) - grid.betas.begin());
        grid.center_loss = grid.at(ai, bi);
    } else {
        grid.center_loss = loss(center);
    }
    return grid;
}

SurfaceGrid scan_surface_symmetric(const ParamVector &center, const DirectionPair &dir,
                                   const LossFn &loss, double radius,
                                   int points_per_axis, int workers) {
    return scan_surface(center, dir, loss, -radius, radius, -radius, radius,
                        points_per_axis, workers);
}

LossFn make_model_loss_fn(const ModelState &state, const std::vector<Sample> &eval_samples,
                          int batch_size) {
    if (eval_samples.empty()) {
        throw std::invalid_argument("make_model_loss_fn: empty evaluation set");
    }
    return [&state, &eval_samples, batch_size](const ParamVector &perturbed) {
        ModelState local = state;  // private copy; batchnorm stats stay frozen
        local.params = perturbed;
        return eval_loss(local, eval_samples, batch_size);
    };
}

LossFn make_quadratic_loss_fn(const QuadraticModel &model) {
    return [&model](const ParamVector &theta) { return model.loss_at(theta); };
}

namespace {

std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string &s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

}  // namespace

void save_surface_csv(const SurfaceGrid &grid, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "alpha,beta,loss\n";
    for (size_t ai = 0; ai < grid.alphas.size(); ++ai) {
        for (size_t bi = 0; bi < grid.betas.size(); ++bi) {
            out << fmt_double(grid.alphas[ai]) << "," << fmt_double(grid.betas[bi]) << ","
                << fmt_double(grid.at(ai, bi)) << "\n";
        }
    }
}

void save_surface_meta(const SurfaceGrid &grid, const std::string &path) {
    json meta = {{"direction_seed", grid.direction_seed},
                 {"model_hash", grid.model_hash},
                 {"split", grid.split},
                 {"center_loss", grid.center_loss},
                 {"alpha_min", grid.alphas.front()},
                 {"alpha_max", grid.alphas.back()},
                 {"beta_min", grid.betas.front()},
                 {"beta_max", grid.betas.back()},
                 {"points_per_axis", grid.alphas.size()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << meta.dump(2) << "\n";
}

SurfaceGrid load_surface_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "alpha,beta,loss") {
        throw std::runtime_error("bad surface CSV header in " + path);
    }
    std::set<double> aset, bset;
    std::map<std::pair<double, double>, double> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, l;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, l, ',');
        const double av = parse_double(a), bv = parse_double(b);
        aset.insert(av);
        bset.insert(bv);
        cells[{av, bv}] = parse_double(l);
    }
    SurfaceGrid grid;
    grid.alphas.assign(aset.begin(), aset.end());
    grid.betas.assign(bset.begin(), bset.end());
    grid.losses.resize(grid.alphas.size() * grid.betas.size());
    for (size_t ai = 0; ai < grid.alphas.size(); ++ai) {
        for (size_t bi = 0; bi < grid.betas.size(); ++bi) {
            auto it = cells.find({grid.alphas[ai], grid.betas[bi]});
            if (it == cells.end()) throw std::runtime_error("non-rectangular surface CSV " + path);
            grid.losses[ai * grid.betas.size() + bi] = it->second;
        }
    }
    if (grid.has_center()) {
        const size_t ai = static_cast<size_t>(
            std::find(grid.alphas.begin(), grid.alphas.end(), 0.0) - grid.alphas.begin());
        const size_t bi = static_cast<size_t>(
            std::find(grid.betas.begin(), grid.betas.end(), 0.0) - grid.betas.begin());
        grid.center_loss = grid.at(ai, bi);
    }
    return grid;
}

}  // namespace lossland

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "doctest.h"
#include "lossland/sharpness.hpp"

using namespace lossland;

namespace {

QuadraticModel axis_quadratic(std::vector<double> curvature) {
    std::vector<float> center(curvature.size(), 0.0f);
    return QuadraticModel::make(std::move(center), std::move(curvature));
}

DirectionPair axis_directions(const ParamVector &like) {
    DirectionPair dir;
    dir.delta = like.zeros_like();
    dir.eta = like.zeros_like();
    dir.delta.params[0].tensor.data[0] = 1.0f;
    dir.eta.params[0].tensor.data[1] = 1.0f;
    dir.normalized = true;
    return dir;
}

// Independent enumeration of the lattice maximum inside the epsilon ball.
double lattice_oracle(const SurfaceGrid &grid, double epsilon) {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t ai = 0; ai < grid.alphas.size(); ++ai) {
        for (size_t bi = 0; bi < grid.betas.size(); ++bi) {
            const double a = grid.alphas[ai], b = grid.betas[bi];
            if (a * a + b * b > epsilon * epsilon) continue;
            best = std::max(best, grid.at(ai, bi));
        }
    }
    return (best - grid.center_loss) / (1.0 + grid.center_loss) * 100.0;
}

SurfaceGrid quadratic_grid(const QuadraticModel &q, double radius = 0.25, int points = 11) {
    DirectionPair dir = axis_directions(q.center);
    return scan_surface_symmetric(q.center, dir, make_quadratic_loss_fn(q), radius, points);
}

}  // namespace

TEST_CASE("epsilon sharpness matches the lattice oracle on a known quadratic") {
    QuadraticModel q = axis_quadratic({3.0, 5.0, 1.0});
    SurfaceGrid grid = quadratic_grid(q);
    for (double eps : {0.05, 0.1, 0.2, 0.25}) {
        const double got = epsilon_sharpness(grid, eps);
        const double want = lattice_oracle(grid, eps);
        CHECK(std::fabs(got - want) <= 1e-6 * std::max(std::fabs(want), 1.0));
    }
}

TEST_CASE("sharpness is monotone in epsilon") {
    QuadraticModel q = axis_quadratic({3.0, 5.0});
    SurfaceGrid grid = quadratic_grid(q);
    double prev = -1.0;
    for (double eps : {0.05, 0.1, 0.25}) {
        const double s = epsilon_sharpness(grid, eps);
        CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("sharpness is non-negative and zero on a flat surface") {
    QuadraticModel q = axis_quadratic({0.0, 0.0});
    SurfaceGrid grid = quadratic_grid(q);
    CHECK(epsilon_sharpness(grid, 0.25) == 0.0);
    QuadraticModel bowl = axis_quadratic({2.0, 2.0});
    CHECK(epsilon_sharpness(quadratic_grid(bowl), 0.25) >= 0.0);
}

TEST_CASE("full-square mode can only increase the result") {
    QuadraticModel q = axis_quadratic({3.0, 5.0});
    SurfaceGrid grid = quadratic_grid(q);
    const double ball = epsilon_sharpness(grid, 0.2, false);
    const double square = epsilon_sharpness(grid, 0.2, true);
    CHECK(square >= ball);
    // corner (0.25, 0.25) lies outside every epsilon <= 0.25 ball
    CHECK(square > ball);
}

TEST_CASE("divergent cells inside the ball make the result +inf") {
    QuadraticModel q = axis_quadratic({1.0, 1.0});
    SurfaceGrid grid = quadratic_grid(q);
    // poison a point at distance 0.05 from the center
    for (size_t ai = 0; ai < grid.alphas.size(); ++ai) {
        for (size_t bi = 0; bi < grid.betas.size(); ++bi) {
            if (std::fabs(grid.alphas[ai] - 0.05) < 1e-12 && grid.betas[bi] == 0.0) {
                grid.losses[ai * grid.betas.size() + bi] =
                    std::numeric_limits<double>::infinity();
            }
        }
    }
    CHECK(std::isinf(epsilon_sharpness(grid, 0.25)));
}

TEST_CASE("epsilon sharpness preconditions") {
    QuadraticModel q = axis_quadratic({1.0, 1.0});
    SurfaceGrid grid = quadratic_grid(q);
    CHECK_THROWS_AS(epsilon_sharpness(grid, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(epsilon_sharpness(grid, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(epsilon_sharpness(grid, 10.0), std::invalid_argument);
    SurfaceGrid off = grid;
    for (auto &a : off.alphas) a += 1.0;
    CHECK_THROWS_AS(epsilon_sharpness(off, 0.25), std::invalid_argument);
}

TEST_CASE("repeat study on a rotationally symmetric quadratic is stable") {
    QuadraticModel q = axis_quadratic(std::vector<double>(16, 2.0));
    SharpnessProtocol proto;
    proto.base_seed = 99;
    SharpnessResult res = sharpness_study(q.center, make_quadratic_loss_fn(q),
                                          orthonormal_directions(q.center), proto);
    REQUIRE(res.values.size() == 3);
    REQUIRE(res.seeds.size() == 3);
    CHECK(res.seeds[0] != res.seeds[1]);
    CHECK(res.mean > 0.0);
    CHECK(res.stddev < 1e-6 * res.mean);
    CHECK_FALSE(res.divergent);
    CHECK_FALSE(res.single_repeat);
}

TEST_CASE("repeat study is deterministic per base seed") {
    QuadraticModel q = axis_quadratic({4.0, 1.0, 2.0, 3.0});
    SharpnessProtocol proto;
    proto.base_seed = 5;
    auto dirs = orthonormal_directions(q.center);
    SharpnessResult a = sharpness_study(q.center, make_quadratic_loss_fn(q), dirs, proto);
    SharpnessResult b = sharpness_study(q.center, make_quadratic_loss_fn(q), dirs, proto);
    CHECK(a.values == b.values);
    proto.base_seed = 6;
    SharpnessResult c = sharpness_study(q.center, make_quadratic_loss_fn(q), dirs, proto);
    CHECK(a.values != c.values);
}

TEST_CASE("single repeat sets the flag; divergent repeats are excluded from the mean") {
    QuadraticModel q = axis_quadratic({1.0, 1.0});
    SharpnessProtocol proto;
    proto.repeats = 1;
    SharpnessResult one = sharpness_study(q.center, make_quadratic_loss_fn(q),
                                          orthonormal_directions(q.center), proto);
    CHECK(one.single_repeat);
    CHECK(one.stddev == 0.0);

    int calls = 0;
    LossFn flaky = [&calls, &q](const ParamVector &theta) {
        ++calls;
        // the second repeat's scan returns NaN everywhere off-center
        if (calls > 121 && calls <= 242) {
            bool at_center = true;
            for (float v : theta.params[0].tensor.data) at_center = at_center && v == 0.0f;
            if (!at_center) return std::numeric_limits<double>::quiet_NaN();
        }
        return q.loss_at(theta);
    };
    proto.repeats = 3;
    SharpnessResult res =
        sharpness_study(q.center, flaky, orthonormal_directions(q.center), proto);
    CHECK(res.divergent);
    CHECK(res.divergent_count == 1);
    CHECK(std::isfinite(res.mean));
    CHECK(std::isinf(res.values[1]));
}

TEST_CASE("pearson correlation on exact lines and its failure modes") {
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> y_up = {2.0, 4.0, 6.0, 8.0};
    std::vector<double> y_down = {8.0, 6.0, 4.0, 2.0};
    CHECK(pearson(x, y_up) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(x, y_down) == doctest::Approx(-1.0).epsilon(1e-12));
    std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(pearson(two, two), std::invalid_argument);
    std::vector<double> flat = {3.0, 3.0, 3.0, 3.0};
    CHECK_THROWS_AS(pearson(x, flat), DegenerateDataError);
}

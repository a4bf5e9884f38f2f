#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "doctest.h"
#include "lossland/optim.hpp"

using namespace lossland;

namespace {

ParamVector one_param(std::vector<float> values) {
    const int n = static_cast<int>(values.size());
    ParamVector pv;
    pv.params.push_back({"w", ParamKind::LinearWeight, Tensor({1, n}, std::move(values))});
    return pv;
}

}  // namespace

TEST_CASE("optimiser names round-trip") {
    CHECK(optim_kind_name(OptimConfig::Kind::SGD) == "sgd");
    CHECK(optim_kind_from_name("adam") == OptimConfig::Kind::Adam);
    CHECK_THROWS_AS(optim_kind_from_name("rmsprop"), std::invalid_argument);
}

TEST_CASE("sgd with momentum accumulates velocity across steps") {
    ParamVector pv = one_param({1.0f});
    OptimConfig cfg = OptimConfig::sgd(0.1, 0.9);
    OptimState st;
    Tensor g({1, 1}, {2.0f});

    // v1 = 2, theta = 1 - 0.1*2 = 0.8
    optim_step(pv, {g}, cfg, st);
    CHECK(pv.params[0].tensor.data[0] == doctest::Approx(0.8).epsilon(1e-6));
    // v2 = 0.9*2 + 2 = 3.8, theta = 0.8 - 0.38 = 0.42
    optim_step(pv, {g}, cfg, st);
    CHECK(pv.params[0].tensor.data[0] == doctest::Approx(0.42).epsilon(1e-6));
}

TEST_CASE("sgd with zero momentum is plain gradient descent") {
    ParamVector pv = one_param({1.0f});
    OptimConfig cfg = OptimConfig::sgd(0.5, 0.0);
    OptimState st;
    optim_step(pv, {Tensor({1, 1}, {1.0f})}, cfg, st);
    CHECK(pv.params[0].tensor.data[0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("adam first step size is close to lr regardless of gradient scale") {
    for (float scale : {0.01f, 1.0f, 100.0f}) {
        ParamVector pv = one_param({0.0f});
        OptimConfig cfg = OptimConfig::adam(1e-3);
        OptimState st;
        optim_step(pv, {Tensor({1, 1}, {scale})}, cfg, st);
        CHECK(pv.params[0].tensor.data[0] == doctest::Approx(-1e-3).epsilon(1e-3));
    }
}

TEST_CASE("adam matches the reference update over several steps") {
    ParamVector pv = one_param({1.0f});
    OptimConfig cfg = OptimConfig::adam(0.1);
    OptimState st;
    double theta = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double g = 2.0 * theta;  // d/dtheta theta^2
        Tensor grad({1, 1}, {static_cast<float>(pv.params[0].tensor.data[0] * 2.0f)});
        optim_step(pv, {grad}, cfg, st);
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mh = m / (1 - std::pow(cfg.beta1, t));
        const double vh = v / (1 - std::pow(cfg.beta2, t));
        theta -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        CHECK(pv.params[0].tensor.data[0] == doctest::Approx(theta).epsilon(1e-4));
    }
}

TEST_CASE("non-finite gradient names the parameter") {
    ParamVector pv = one_param({1.0f});
    OptimConfig cfg = OptimConfig::adam(1e-3);
    OptimState st;
    Tensor g({1, 1}, {std::numeric_limits<float>::quiet_NaN()});
    CHECK_THROWS_WITH_AS(optim_step(pv, {g}, cfg, st),
                         doctest::Contains("w"), std::runtime_error);
}

TEST_CASE("gradient count mismatch is rejected") {
    ParamVector pv = one_param({1.0f});
    OptimConfig cfg = OptimConfig::adam(1e-3);
    OptimState st;
    CHECK_THROWS_AS(optim_step(pv, {}, cfg, st), std::invalid_argument);
}

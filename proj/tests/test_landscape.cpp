#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "lossland/landscape.hpp"
#include "lossland/models.hpp"

using namespace lossland;

namespace {

QuadraticModel sphere_model(int n, double curvature) {
    std::vector<float> center(static_cast<size_t>(n), 0.0f);
    std::vector<double> curv(static_cast<size_t>(n), curvature);
    return QuadraticModel::make(std::move(center), std::move(curv));
}

DirectionPair axis_directions(const ParamVector &like, size_t i, size_t j) {
    DirectionPair dir;
    dir.delta = like.zeros_like();
    dir.eta = like.zeros_like();
    dir.delta.params[0].tensor.data[i] = 1.0f;
    dir.eta.params[0].tensor.data[j] = 1.0f;
    dir.normalized = true;
    return dir;
}

}  // namespace

TEST_CASE("sample_directions is deterministic and the two streams differ") {
    ModelState m = build_model(ModelSpec::mini10(10, 32), 1);
    DirectionPair a = sample_directions(m.params, 5);
    DirectionPair b = sample_directions(m.params, 5);
    DirectionPair c = sample_directions(m.params, 6);
    CHECK(a.delta.flatten() == b.delta.flatten());
    CHECK(a.eta.flatten() == b.eta.flatten());
    CHECK(a.delta.flatten() != a.eta.flatten());
    CHECK(a.delta.flatten() != c.delta.flatten());
    CHECK_FALSE(a.normalized);
}

TEST_CASE("filter_normalize matches per-filter norms and zeroes non-filter entries") {
    for (auto spec : {ModelSpec::mini10(10, 32), ModelSpec::mini14(10, 32)}) {
        ModelState m = build_model(spec, 3);
        DirectionPair dir = sample_directions(m.params, 11);
        filter_normalize(dir, m.params);
        CHECK(dir.normalized);
        for (size_t pi = 0; pi < m.params.params.size(); ++pi) {
            const NamedParam &tp = m.params.params[pi];
            for (const ParamVector *d : {&dir.delta, &dir.eta}) {
                const NamedParam &dp = d->params[pi];
                const int filters = ParamVector::filter_count(tp);
                if (filters == 0) {
                    for (float v : dp.tensor.data) CHECK(v == 0.0f);
                    continue;
                }
                for (int j = 0; j < filters; ++j) {
                    auto ds = ParamVector::filter_slice(dp, j);
                    auto ts = ParamVector::filter_slice(tp, j);
                    double dn = 0.0, tn = 0.0;
                    for (float v : ds) dn += static_cast<double>(v) * v;
                    for (float v : ts) tn += static_cast<double>(v) * v;
                    dn = std::sqrt(dn);
                    tn = std::sqrt(tn);
                    CHECK(std::fabs(dn - tn) <= 1e-5 * std::max(tn, 1e-12));
                }
            }
        }
    }
}

TEST_CASE("normalizing twice is an error") {
    ModelState m = build_model(ModelSpec::mini10(10, 32), 3);
    DirectionPair dir = sample_directions(m.params, 1);
    filter_normalize(dir, m.params);
    CHECK_THROWS_AS(filter_normalize(dir, m.params), std::logic_error);
}

TEST_CASE("a zero theta filter produces a zero direction slice") {
    ModelState m = build_model(ModelSpec::mini10(10, 32), 3);
    auto first = ParamVector::filter_slice(m.params.params[0], 0);
    std::fill(first.begin(), first.end(), 0.0f);
    DirectionPair dir = sample_directions(m.params, 1);
    filter_normalize(dir, m.params);
    for (float v : ParamVector::filter_slice(dir.delta.params[0], 0)) CHECK(v == 0.0f);
}

TEST_CASE("scan of an axis-aligned quadratic reproduces the closed form") {
    QuadraticModel q = sphere_model(4, 3.0);
    q.curvature = {3.0, 5.0, 1.0, 1.0};
    DirectionPair dir = axis_directions(q.center, 0, 1);
    SurfaceGrid grid = scan_surface_symmetric(q.center, dir, make_quadratic_loss_fn(q),
                                              0.25, 11);
    REQUIRE(grid.losses.size() == 121);
    REQUIRE(grid.alphas.size() == 11);
    CHECK(grid.has_center());
    CHECK(grid.center_loss == 0.0);
    for (size_t ai = 0; ai < 11; ++ai) {
        for (size_t bi = 0; bi < 11; ++bi) {
            const double a = grid.alphas[ai], b = grid.betas[bi];
            CHECK(grid.at(ai, bi) == doctest::Approx(3.0 * a * a + 5.0 * b * b).epsilon(1e-6));
        }
    }
}

TEST_CASE("center cell equals the unperturbed loss exactly") {
    ModelState m = build_model(ModelSpec::mini10(4, 16), 2);
    SynthConfig dcfg;
    dcfg.train_size = 16;
    dcfg.test_size = 8;
    dcfg.frames = 12;
    dcfg.mel_bins = 16;
    dcfg.classes = 4;
    Dataset ds = generate_dataset(dcfg);
    DirectionPair dir = sample_directions(m.params, 9);
    filter_normalize(dir, m.params);
    LossFn loss = make_model_loss_fn(m, ds.train, 16);
    SurfaceGrid grid = scan_surface_symmetric(m.params, dir, loss, 0.25, 5);
    CHECK(grid.center_loss == loss(m.params));
}

TEST_CASE("worker count does not change a single bit of the grid") {
    QuadraticModel q = sphere_model(6, 2.0);
    q.curvature = {2.0, 0.5, 1.0, 4.0, 3.0, 0.25};
    DirectionPair dir = axis_directions(q.center, 2, 4);
    LossFn loss = make_quadratic_loss_fn(q);
    SurfaceGrid serial = scan_surface_symmetric(q.center, dir, loss, 0.3, 9, 1);
    for (int w : {2, 4, 8}) {
        SurfaceGrid parallel = scan_surface_symmetric(q.center, dir, loss, 0.3, 9, w);
        CHECK(parallel.losses == serial.losses);
        CHECK(parallel.alphas == serial.alphas);
    }
}

TEST_CASE("non-finite losses become +inf sentinels") {
    QuadraticModel q = sphere_model(2, 1.0);
    DirectionPair dir = axis_directions(q.center, 0, 1);
    LossFn bad = [](const ParamVector &theta) {
        const double a = theta.params[0].tensor.data[0];
        return a > 0.1 ? std::numeric_limits<double>::quiet_NaN() : a;
    };
    SurfaceGrid grid = scan_surface_symmetric(q.center, dir, bad, 0.25, 5);
    bool saw_inf = false;
    for (double v : grid.losses) {
        CHECK((std::isfinite(v) || v == std::numeric_limits<double>::infinity()));
        saw_inf = saw_inf || std::isinf(v);
    }
    CHECK(saw_inf);
}

TEST_CASE("scan preconditions") {
    QuadraticModel q = sphere_model(2, 1.0);
    DirectionPair raw;
    raw.delta = q.center.zeros_like();
    raw.eta = q.center.zeros_like();
    LossFn loss = make_quadratic_loss_fn(q);
    CHECK_THROWS_AS(scan_surface_symmetric(q.center, raw, loss, 0.25, 11), std::logic_error);
    DirectionPair dir = axis_directions(q.center, 0, 1);
    CHECK_THROWS_AS(scan_surface_symmetric(q.center, dir, loss, 0.25, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(scan_surface_symmetric(q.center, dir, loss, 0.25, 10),
                    std::invalid_argument);
}

TEST_CASE("surface CSV round-trip, including infinities") {
    QuadraticModel q = sphere_model(2, 7.0);
    DirectionPair dir = axis_directions(q.center, 0, 1);
    SurfaceGrid grid = scan_surface_symmetric(q.center, dir, make_quadratic_loss_fn(q),
                                              0.25, 7);
    grid.losses[3] = std::numeric_limits<double>::infinity();
    const std::string path = "/tmp/lossland_test_surface.csv";
    save_surface_csv(grid, path);
    SurfaceGrid back = load_surface_csv(path);
    CHECK(back.alphas == grid.alphas);
    CHECK(back.betas == grid.betas);
    CHECK(back.losses == grid.losses);
    CHECK(back.center_loss == grid.center_loss);
    std::remove(path.c_str());
}

TEST_CASE("malformed surface CSV is rejected") {
    const std::string path = "/tmp/lossland_test_badsurface.csv";
    {
        std::ofstream out(path);
        out << "a,b,c\n1,2,3\n";
    }
    CHECK_THROWS_AS(load_surface_csv(path), std::runtime_error);
    std::remove(path.c_str());
}

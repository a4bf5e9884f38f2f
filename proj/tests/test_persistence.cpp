#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "lossland/checkpoint.hpp"
#include "lossland/landscape.hpp"
#include "lossland/svg_plot.hpp"

using namespace lossland;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string &path, const std::string &bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelState sample_state() {
    ModelState s = build_model(ModelSpec::mini10(6, 24), 17);
    s.epoch = 12;
    s.metrics = {{"dev_acc", 0.75}, {"train_loss", 0.31}};
    s.hyper = {{"arch", "mini10"}, {"optimiser", "adam"}};
    // move the running stats off their defaults so the payload is non-trivial
    for (auto &b : s.running) {
        for (auto &v : b.mean.data) v = 0.05f;
        for (auto &v : b.var.data) v = 1.2f;
    }
    return s;
}

size_t count_occurrences(const std::string &text, const std::string &needle) {
    size_t n = 0;
    for (size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
    const std::string p1 = "/tmp/lossland_ckpt_a.mscp";
    const std::string p2 = "/tmp/lossland_ckpt_b.mscp";
    ModelState s = sample_state();
    save_checkpoint(s, p1);
    ModelState loaded = load_checkpoint(p1);
    CHECK(loaded.params.flatten() == s.params.flatten());
    CHECK(loaded.epoch == s.epoch);
    CHECK(loaded.metrics == s.metrics);
    CHECK(loaded.hyper == s.hyper);
    CHECK(loaded.spec.channels == s.spec.channels);
    REQUIRE(loaded.running.size() == s.running.size());
    for (size_t i = 0; i < s.running.size(); ++i) {
        CHECK(loaded.running[i].mean.data == s.running[i].mean.data);
        CHECK(loaded.running[i].var.data == s.running[i].var.data);
    }
    save_checkpoint(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("corrupt magic is reported as not-a-checkpoint") {
    const std::string path = "/tmp/lossland_ckpt_magic.mscp";
    ModelState s = sample_state();
    save_checkpoint(s, path);
    std::string bytes = slurp(path);
    bytes[0] = 'X';
    spit(path, bytes);
    try {
        load_checkpoint(path);
        FAIL("expected CheckpointError");
    } catch (const CheckpointError &e) {
        CHECK(e.kind() == CheckpointErrorKind::BadMagic);
        CHECK(std::string(e.what()).find("not a checkpoint") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("truncated payload is reported as a length mismatch") {
    const std::string path = "/tmp/lossland_ckpt_trunc.mscp";
    ModelState s = sample_state();
    save_checkpoint(s, path);
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() - 4);
    spit(path, bytes);
    try {
        load_checkpoint(path);
        FAIL("expected CheckpointError");
    } catch (const CheckpointError &e) {
        CHECK(e.kind() == CheckpointErrorKind::PayloadLengthMismatch);
        CHECK(std::string(e.what()).find("payload length mismatch") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("tampered manifest offsets are a distinct error") {
    const std::string path = "/tmp/lossland_ckpt_manifest.mscp";
    ModelState s = sample_state();
    save_checkpoint(s, path);
    std::string bytes = slurp(path);
    const size_t pos = bytes.find("\"offset\":0,");
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, 11, "\"offset\":8,");
    spit(path, bytes);
    try {
        load_checkpoint(path);
        FAIL("expected CheckpointError");
    } catch (const CheckpointError &e) {
        CHECK(e.kind() == CheckpointErrorKind::ManifestMismatch);
    }
    fs::remove(path);
}

TEST_CASE("version bump is rejected") {
    const std::string path = "/tmp/lossland_ckpt_version.mscp";
    save_checkpoint(sample_state(), path);
    std::string bytes = slurp(path);
    bytes[4] = 9;
    spit(path, bytes);
    try {
        load_checkpoint(path);
        FAIL("expected CheckpointError");
    } catch (const CheckpointError &e) {
        CHECK(e.kind() == CheckpointErrorKind::VersionMismatch);
    }
    fs::remove(path);
}

TEST_CASE("surface CSV row count equals points per axis squared") {
    QuadraticModel q = QuadraticModel::make({0.0f, 0.0f}, {2.0, 3.0});
    DirectionPair dir;
    dir.delta = q.center.zeros_like();
    dir.eta = q.center.zeros_like();
    dir.delta.params[0].tensor.data[0] = 1.0f;
    dir.eta.params[0].tensor.data[1] = 1.0f;
    dir.normalized = true;
    SurfaceGrid grid = scan_surface_symmetric(q.center, dir, make_quadratic_loss_fn(q),
                                              0.25, 11);
    const std::string path = "/tmp/lossland_surface_rows.csv";
    save_surface_csv(grid, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "alpha,beta,loss");
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 121);
    fs::remove(path);

    SUBCASE("heatmap renders one cell rect per row") {
        PlotStyle style;
        const std::string svg = surface_heatmap_svg(grid, style);
        CHECK(count_occurrences(svg, "class=\"cell\"") == 121);
        CHECK(svg.rfind("<svg", 0) == 0);
        CHECK(svg.find("</svg>") != std::string::npos);
    }

    SUBCASE("contour output is well-formed and has paths") {
        PlotStyle style;
        const std::string svg = surface_contour_svg(grid, 6, style);
        CHECK(count_occurrences(svg, "class=\"contour\"") >= 1);
        CHECK(svg.find("</svg>") != std::string::npos);
    }
}

TEST_CASE("plots are deterministic for identical input") {
    QuadraticModel q = QuadraticModel::make({0.0f, 0.0f}, {1.0, 4.0});
    DirectionPair dir;
    dir.delta = q.center.zeros_like();
    dir.eta = q.center.zeros_like();
    dir.delta.params[0].tensor.data[0] = 1.0f;
    dir.eta.params[0].tensor.data[1] = 1.0f;
    dir.normalized = true;
    SurfaceGrid grid = scan_surface_symmetric(q.center, dir, make_quadratic_loss_fn(q),
                                              0.25, 7);
    PlotStyle style;
    CHECK(surface_heatmap_svg(grid, style) == surface_heatmap_svg(grid, style));
    CHECK(surface_contour_svg(grid, 4, style) == surface_contour_svg(grid, 4, style));
}

TEST_CASE("scatter of an exact line embeds slope 1 in the metadata") {
    ScatterSeries s;
    s.label = "line";
    for (int i = 0; i < 10; ++i) {
        s.xs.push_back(static_cast<double>(i));
        s.ys.push_back(static_cast<double>(i));
    }
    PlotStyle style;
    const std::string svg = scatter_svg({s}, style);
    CHECK(svg.find("<metadata>") != std::string::npos);
    CHECK(svg.find("slope=\"1\"") != std::string::npos);
    CHECK(count_occurrences(svg, "class=\"pt\"") == 10);
    CHECK(count_occurrences(svg, "class=\"fit\"") == 1);

    LineFit fit = least_squares_fit(s.xs, s.ys);
    CHECK(std::fabs(fit.slope - 1.0) <= 1e-9);
    CHECK(std::fabs(fit.intercept) <= 1e-9);
}

TEST_CASE("grouped bars draw one bar per series per group, with error bars") {
    std::vector<BarGroup> groups = {{"sgd", {0.8, 0.6}, {0.02, 0.03}},
                                    {"adam", {0.9, 0.7}, {0.01, 0.02}}};
    PlotStyle style;
    const std::string svg = grouped_bars_svg({"iid", "ood"}, groups, style);
    CHECK(count_occurrences(svg, "class=\"bar\"") == 4);
    CHECK(count_occurrences(svg, "class=\"err\"") == 12);  // 3 line segments per bar

    const std::string one = grouped_bars_svg({"acc"}, {{"only", {0.5}, {}}}, style);
    CHECK(count_occurrences(one, "class=\"bar\"") == 1);
    CHECK(count_occurrences(one, "class=\"err\"") == 0);
}

TEST_CASE("empty plot data is an error") {
    PlotStyle style;
    CHECK_THROWS_AS(scatter_svg({}, style), std::invalid_argument);
    CHECK_THROWS_AS(grouped_bars_svg({"a"}, {}, style), std::invalid_argument);
    SurfaceGrid empty;
    CHECK_THROWS_AS(surface_heatmap_svg(empty, style), std::invalid_argument);
    CHECK_THROWS_AS(surface_contour_svg(empty, 4, style), std::invalid_argument);
    CHECK_THROWS_AS(least_squares_fit({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(least_squares_fit({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}),
                    std::invalid_argument);
}

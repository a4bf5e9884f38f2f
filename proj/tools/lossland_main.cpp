#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lossland/audio.hpp"
#include "lossland/checkpoint.hpp"
#include "lossland/landscape.hpp"
#include "lossland/models.hpp"
#include "lossland/rng.hpp"
#include "lossland/sharpness.hpp"
#include "lossland/study.hpp"
#include "lossland/svg_plot.hpp"
#include "lossland/synth.hpp"
#include "lossland/trainer.hpp"

namespace fs = std::filesystem;
using namespace lossland;

namespace {

std::vector<Sample> pick_split(const Dataset &data, const std::string &split) {
    if (split == "train") return data.train;
    if (split == "test") return data.test;
    auto [iid, ood] = split_iid_ood(data.test);
    if (split == "iid") return iid;
    if (split == "ood") return ood;
    throw std::runtime_error("unknown split '" + split + "' (train|test|iid|ood)");
}

std::vector<Sample> limited(std::vector<Sample> samples, int limit) {
    if (limit > 0 && static_cast<size_t>(limit) < samples.size()) {
        samples.resize(static_cast<size_t>(limit));
    }
    return samples;
}

Dataset load_or_generate(const std::string &data_dir, uint64_t data_seed) {
    if (!data_dir.empty()) return import_dataset(data_dir);
    SynthConfig cfg;
    cfg.seed = data_seed;
    return generate_dataset(cfg);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"loss-landscape toolkit for small acoustic-scene CNNs"};
    app.require_subcommand(1);

    // gen-data
    auto *gen = app.add_subcommand("gen-data", "generate the synthetic device-shift dataset");
    SynthConfig synth_cfg;
    std::string gen_out = "data";
    gen->add_option("--seed", synth_cfg.seed, "dataset seed");
    gen->add_option("--train-size", synth_cfg.train_size);
    gen->add_option("--test-size", synth_cfg.test_size);
    gen->add_option("--classes", synth_cfg.classes);
    gen->add_option("--out", gen_out, "output directory")->required();

    // features
    auto *feat = app.add_subcommand("features", "log-mel features from a WAV file");
    std::string feat_wav, feat_out = "features.csv";
    feat->add_option("wav", feat_wav, "input WAV path")->required();
    feat->add_option("--out", feat_out, "output CSV path");

    // train
    auto *tr = app.add_subcommand("train", "train a model on the synthetic dataset");
    std::string tr_arch = "mini10", tr_optim = "adam", tr_data, tr_out = "run";
    double tr_lr = 1e-3;
    TrainConfig tr_cfg;
    uint64_t tr_data_seed = 1;
    tr->add_option("--arch", tr_arch, "mini10|mini14");
    tr->add_option("--optimiser", tr_optim, "sgd|adam");
    tr->add_option("--lr", tr_lr);
    tr->add_option("--batch-size", tr_cfg.batch_size);
    tr->add_option("--epochs", tr_cfg.epochs);
    tr->add_option("--seed", tr_cfg.seed, "training seed");
    tr->add_option("--data", tr_data, "dataset directory (default: generate in memory)");
    tr->add_option("--data-seed", tr_data_seed);
    tr->add_option("--out", tr_out, "output directory")->required();

    // scan
    auto *sc = app.add_subcommand("scan", "sample the loss surface around a checkpoint");
    std::string sc_ckpt, sc_data, sc_split = "train", sc_out = "scan";
    double sc_radius = 0.25;
    int sc_points = 11, sc_workers = 1, sc_limit = 0;
    uint64_t sc_seed = 1, sc_data_seed = 1;
    sc->add_option("--checkpoint", sc_ckpt)->required();
    sc->add_option("--radius", sc_radius);
    sc->add_option("--points", sc_points, "points per axis");
    sc->add_option("--seed", sc_seed, "direction seed");
    sc->add_option("--split", sc_split, "train|test|iid|ood");
    sc->add_option("--data", sc_data);
    sc->add_option("--data-seed", sc_data_seed);
    sc->add_option("--workers", sc_workers);
    sc->add_option("--eval-limit", sc_limit, "cap the evaluation sample count (0 = all)");
    sc->add_option("--out", sc_out, "output directory")->required();

    // sharpness
    auto *sh = app.add_subcommand("sharpness", "epsilon-sharpness around a minimum");
    std::string sh_ckpt, sh_grid, sh_data, sh_split = "train", sh_out = "sharpness.json";
    double sh_radius = 0.25, sh_epsilon = 0.25;
    int sh_points = 11, sh_repeats = 3, sh_workers = 1, sh_limit = 0;
    uint64_t sh_seed = 1, sh_data_seed = 1;
    bool sh_full_square = false;
    sh->add_option("--checkpoint", sh_ckpt, "run the full repeat protocol on a checkpoint");
    sh->add_option("--grid", sh_grid, "evaluate one existing surface CSV instead");
    sh->add_option("--repeats", sh_repeats);
    sh->add_option("--epsilon", sh_epsilon);
    sh->add_option("--radius", sh_radius);
    sh->add_option("--points", sh_points);
    sh->add_option("--seed", sh_seed, "base direction seed");
    sh->add_option("--split", sh_split);
    sh->add_option("--data", sh_data);
    sh->add_option("--data-seed", sh_data_seed);
    sh->add_option("--workers", sh_workers);
    sh->add_option("--eval-limit", sh_limit);
    sh->add_flag("--full-square", sh_full_square, "max over the whole grid, not the epsilon ball");
    sh->add_option("--out", sh_out, "output JSON path");

    // study
    auto *st = app.add_subcommand("study", "train and measure every grid configuration");
    StudyConfig st_cfg;
    std::vector<std::string> st_archs, st_optims;
    std::vector<double> st_lrs;
    std::vector<int> st_bs;
    std::vector<uint64_t> st_seeds;
    st->add_option("--out", st_cfg.out_dir, "study directory")->required();
    st->add_option("--epochs", st_cfg.epochs);
    st->add_option("--seed", st_cfg.synth.seed, "dataset seed");
    st->add_option("--train-size", st_cfg.synth.train_size);
    st->add_option("--test-size", st_cfg.synth.test_size);
    st->add_option("--frames", st_cfg.synth.frames);
    st->add_option("--mel-bins", st_cfg.synth.mel_bins);
    st->add_option("--classes", st_cfg.synth.classes);
    st->add_option("--repeats", st_cfg.protocol.repeats);
    st->add_option("--epsilon", st_cfg.protocol.epsilon);
    st->add_option("--radius", st_cfg.protocol.radius);
    st->add_option("--points", st_cfg.protocol.points);
    st->add_option("--workers", st_cfg.protocol.workers);
    st->add_option("--eval-limit", st_cfg.eval_limit);
    st->add_option("--arch", st_archs, "restrict the architecture axis");
    st->add_option("--optimiser", st_optims, "restrict the optimiser axis");
    st->add_option("--lr", st_lrs, "restrict the learning-rate axis");
    st->add_option("--batch-size", st_bs, "restrict the batch-size axis");
    st->add_option("--train-seed", st_seeds, "restrict the training-seed axis");
    st->add_flag("--verbose", st_cfg.verbose);

    // report
    auto *rp = app.add_subcommand("report", "correlation report from a finished study");
    std::string rp_study, rp_out;
    std::string rp_group = "optimiser";
    rp->add_option("--study", rp_study, "study directory")->required();
    rp->add_option("--out", rp_out, "output directory (default: the study directory)");
    rp->add_option("--group-by", rp_group,
                   "architecture|optimiser|learning-rate|batch-size|seed");

    // plot
    auto *pl = app.add_subcommand("plot", "render an SVG from toolkit outputs");
    std::string pl_kind, pl_input, pl_out = "plot.svg", pl_title;
    int pl_levels = 8;
    pl->add_option("kind", pl_kind, "surface-heatmap|surface-contour|scatter|grouped-bars")
        ->required();
    pl->add_option("input", pl_input, "surface CSV, report JSON, or summary CSV")->required();
    pl->add_option("--out", pl_out, "output SVG path");
    pl->add_option("--title", pl_title);
    pl->add_option("--levels", pl_levels, "contour level count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            Dataset ds = generate_dataset(synth_cfg);
            export_dataset(ds, gen_out);
            std::printf("wrote %zu train / %zu test samples to %s\n", ds.train.size(),
                        ds.test.size(), gen_out.c_str());
        } else if (feat->parsed()) {
            std::vector<float> signal = load_wav_16k(feat_wav);
            FeatureConfig fcfg;
            Tensor mel = logmel(signal, fcfg);
            std::ofstream out(feat_out);
            if (!out) throw std::runtime_error("cannot write " + feat_out);
            out << "bin";
            for (int t = 0; t < mel.dim(1); ++t) out << ",frame" << t;
            out << "\n";
            for (int b = 0; b < mel.dim(0); ++b) {
                out << b;
                for (int t = 0; t < mel.dim(1); ++t) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.9g", mel.data[b * mel.dim(1) + t]);
                    out << "," << buf;
                }
                out << "\n";
            }
            std::printf("%d mel bins x %d frames -> %s\n", mel.dim(0), mel.dim(1),
                        feat_out.c_str());
        } else if (tr->parsed()) {
            Dataset data = load_or_generate(tr_data, tr_data_seed);
            ModelSpec spec = tr_arch == "mini14"
                                 ? ModelSpec::mini14(data.classes, data.mel_bins)
                                 : ModelSpec::mini10(data.classes, data.mel_bins);
            if (tr_arch != "mini10" && tr_arch != "mini14") {
                throw std::runtime_error("unknown arch '" + tr_arch + "'");
            }
            tr_cfg.optim = tr_optim == "sgd" ? OptimConfig::sgd(tr_lr)
                                             : OptimConfig::adam(tr_lr);
            if (tr_optim != "sgd" && tr_optim != "adam") {
                throw std::runtime_error("unknown optimiser '" + tr_optim + "'");
            }
            fs::create_directories(tr_out);
            TrainResult res = train(spec, data, tr_cfg);
            save_checkpoint(res.best, (fs::path(tr_out) / "model.mscp").string());
            std::ofstream log(fs::path(tr_out) / "epochs.csv");
            log << "epoch,train_loss,train_acc,dev_acc\n";
            for (const auto &e : res.logs) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch,
                              e.train_loss, e.train_acc, e.dev_acc);
                log << buf;
            }
            std::printf("best epoch %d  dev_acc %.4f  -> %s/model.mscp\n", res.best_epoch,
                        res.logs[static_cast<size_t>(res.best_epoch - 1)].dev_acc,
                        tr_out.c_str());
        } else if (sc->parsed()) {
            ModelState state = load_checkpoint(sc_ckpt);
            Dataset data = load_or_generate(sc_data, sc_data_seed);
            std::vector<Sample> samples = limited(pick_split(data, sc_split), sc_limit);
            DirectionPair dir = sample_directions(state.params, sc_seed);
            filter_normalize(dir, state.params);
            LossFn loss = make_model_loss_fn(state, samples);
            SurfaceGrid grid = scan_surface_symmetric(state.params, dir, loss, sc_radius,
                                                      sc_points, sc_workers);
            grid.model_hash = model_hash(state);
            grid.split = sc_split;
            fs::create_directories(sc_out);
            save_surface_csv(grid, (fs::path(sc_out) / "surface.csv").string());
            save_surface_meta(grid, (fs::path(sc_out) / "surface.meta.json").string());
            std::printf("scanned %zu points, center loss %.6f -> %s/surface.csv\n",
                        grid.losses.size(), grid.center_loss, sc_out.c_str());
        } else if (sh->parsed()) {
            if (sh_grid.empty() == sh_ckpt.empty()) {
                std::fprintf(stderr, "sharpness: exactly one of --checkpoint or --grid\n");
                return 1;
            }
            if (!sh_grid.empty()) {
                SurfaceGrid grid = load_surface_csv(sh_grid);
                const double s = epsilon_sharpness(grid, sh_epsilon, sh_full_square);
                SharpnessResult res;
                res.epsilon = sh_epsilon;
                res.values = {s};
                res.seeds = {grid.direction_seed};
                res.mean = s;
                res.single_repeat = true;
                if (!std::isfinite(s)) {
                    res.divergent = true;
                    res.divergent_count = 1;
                }
                save_sharpness_json(res, grid.model_hash, sh_out);
                std::printf("sharpness %.6f %% -> %s\n", s, sh_out.c_str());
            } else {
                ModelState state = load_checkpoint(sh_ckpt);
                Dataset data = load_or_generate(sh_data, sh_data_seed);
                std::vector<Sample> samples = limited(pick_split(data, sh_split), sh_limit);
                SharpnessProtocol proto;
                proto.repeats = sh_repeats;
                proto.epsilon = sh_epsilon;
                proto.radius = sh_radius;
                proto.points = sh_points;
                proto.base_seed = sh_seed;
                proto.workers = sh_workers;
                proto.full_square = sh_full_square;
                SharpnessResult res = sharpness_study_model(state, samples, proto);
                save_sharpness_json(res, model_hash(state), sh_out);
                std::printf("sharpness %.6f +/- %.6f %% over %d repeats -> %s\n", res.mean,
                            res.stddev, sh_repeats, sh_out.c_str());
            }
        } else if (st->parsed()) {
            if (!st_archs.empty()) {
                st_cfg.grid.archs.clear();
                for (const auto &a : st_archs) st_cfg.grid.archs.push_back(arch_from_name(a));
            }
            if (!st_optims.empty()) {
                st_cfg.grid.optimisers.clear();
                for (const auto &o : st_optims) {
                    st_cfg.grid.optimisers.push_back(optim_kind_from_name(o));
                }
            }
            if (!st_lrs.empty()) st_cfg.grid.lrs = st_lrs;
            if (!st_bs.empty()) st_cfg.grid.batch_sizes = st_bs;
            if (!st_seeds.empty()) st_cfg.grid.seeds = st_seeds;
            std::vector<StudyRecord> records = run_study(st_cfg);
            int failed = 0;
            for (const auto &r : records) failed += r.failed ? 1 : 0;
            std::printf("study complete: %zu configs, %d failed -> %s\n", records.size(),
                        failed, st_cfg.out_dir.c_str());
        } else if (rp->parsed()) {
            const std::string out_dir = rp_out.empty() ? rp_study : rp_out;
            fs::create_directories(out_dir);
            std::vector<StudyRecord> records = load_study_records(rp_study);
            CorrelationReport report = correlation_report(records);
            write_report_json(report, (fs::path(out_dir) / "report.json").string());
            write_summary_csv(records, (fs::path(out_dir) / "summary.csv").string());
            auto groups = disaggregate(records, rp_group);
            std::printf("records %zu  r(iid) %.3f  r(ood) %.3f  r(all) %.3f\n",
                        records.size(), report.iid_r, report.ood_r, report.combined_r);
            for (const auto &[key, g] : groups) {
                std::printf("  %s=%s  n=%d  sharpness %.3f  iid %.3f  ood %.3f\n",
                            rp_group.c_str(), key.c_str(), g.count, g.mean_sharpness,
                            g.mean_iid_acc, g.mean_ood_acc);
            }
        } else if (pl->parsed()) {
            PlotStyle style;
            style.title = pl_title;
            std::string svg;
            if (pl_kind == "surface-heatmap" || pl_kind == "surface-contour") {
                SurfaceGrid grid = load_surface_csv(pl_input);
                style.x_label = "alpha";
                style.y_label = "beta";
                svg = pl_kind == "surface-heatmap"
                          ? surface_heatmap_svg(grid, style)
                          : surface_contour_svg(grid, pl_levels, style);
            } else if (pl_kind == "scatter") {
                std::ifstream in(pl_input);
                if (!in) throw std::runtime_error("cannot read " + pl_input);
                nlohmann::json j = nlohmann::json::parse(in);
                ScatterSeries iid{"iid", "#1f6fb2", {}, {}};
                ScatterSeries ood{"ood", "#d95f02", {}, {}};
                for (const auto &row : j.at("records")) {
                    const double s = row.at("sharpness").get<double>();
                    iid.xs.push_back(s);
                    iid.ys.push_back(row.at("iid_acc").get<double>());
                    ood.xs.push_back(s);
                    ood.ys.push_back(row.at("ood_acc").get<double>());
                }
                style.x_label = "mean sharpness (%)";
                style.y_label = "test accuracy";
                svg = scatter_svg({iid, ood}, style);
            } else if (pl_kind == "grouped-bars") {
                std::vector<StudyRecord> records = load_study_records(pl_input);
                std::vector<BarGroup> groups;
                for (const auto &[key, g] : disaggregate(records, "optimiser")) {
                    groups.push_back({key, {g.mean_iid_acc, g.mean_ood_acc}, {}});
                }
                style.y_label = "accuracy";
                svg = grouped_bars_svg({"iid", "ood"}, groups, style);
            } else {
                std::fprintf(stderr, "plot: unknown kind '%s'\n", pl_kind.c_str());
                return 1;
            }
            write_svg(svg, pl_out);
            std::printf("wrote %s\n", pl_out.c_str());
        }
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

#include "lossland/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lossland/checkpoint.hpp"
#include "lossland/rng.hpp"

namespace lossland {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lr_str(double lr) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", lr);
    return buf;
}

json enc_inf(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    return json(v);
}

double dec_inf(const json &j) {
    if (j.is_string()) {
        return j.get<std::string>() == "-inf" ? -std::numeric_limits<double>::infinity()
                                              : std::numeric_limits<double>::infinity();
    }
    return j.get<double>();
}

}  // namespace

std::string GridPoint::config_id() const {
    return arch_name(arch) + "_" + optim_kind_name(optimiser) + "_lr" + lr_str(lr) +
           "_bs" + std::to_string(batch_size) + "_seed" + std::to_string(seed);
}

std::map<std::string, std::string> GridPoint::as_map() const {
    return {{"architecture", arch_name(arch)},
            {"optimiser", optim_kind_name(optimiser)},
            {"learning-rate", lr_str(lr)},
            {"batch-size", std::to_string(batch_size)},
            {"seed", std::to_string(seed)}};
}

std::vector<GridPoint> GridSpec::enumerate() const {
    std::vector<GridPoint> points;
    for (Arch a : archs) {
        for (auto o : optimisers) {
            for (double lr : lrs) {
                for (int bs : batch_sizes) {
                    for (uint64_t s : seeds) {
                        GridPoint p{a, o, lr, bs, s};
                        const auto pm = p.as_map();
                        bool excluded = false;
                        for (const auto &ex : exclusions) {
                            bool all = !ex.empty();
                            for (const auto &[k, v] : ex) {
                                auto it = pm.find(k);
                                if (it == pm.end()) {
                                    throw std::invalid_argument("exclusion key '" + k + "' unknown");
                                }
                                if (it->second != v) {
                                    all = false;
                                    break;
                                }
                            }
                            if (all) {
                                excluded = true;
                                break;
                            }
                        }
                        if (!excluded) points.push_back(p);
                    }
                }
            }
        }
    }
    if (points.empty()) {
        throw std::invalid_argument("grid is empty after exclusions");
    }
    return points;
}

std::string record_to_json(const StudyRecord &rec) {
    json values = json::array();
    for (double v : rec.sharpness.values) values.push_back(enc_inf(v));
    json j = {{"config_id", rec.config_id},
              {"arch", arch_name(rec.point.arch)},
              {"optimiser", optim_kind_name(rec.point.optimiser)},
              {"lr", rec.point.lr},
              {"batch_size", rec.point.batch_size},
              {"seed", rec.point.seed},
              {"epochs", rec.epochs},
              {"best_epoch", rec.best_epoch},
              {"train_acc", rec.train_acc},
              {"dev_acc", rec.dev_acc},
              {"iid_acc", rec.iid_acc},
              {"ood_acc", rec.ood_acc},
              {"test_acc", rec.test_acc},
              {"sharpness",
               {{"epsilon", rec.sharpness.epsilon},
                {"values", values},
                {"seeds", rec.sharpness.seeds},
                {"mean", enc_inf(rec.sharpness.mean)},
                {"std", rec.sharpness.stddev},
                {"single_repeat", rec.sharpness.single_repeat},
                {"divergent", rec.sharpness.divergent},
                {"divergent_count", rec.sharpness.divergent_count}}},
              {"failed", rec.failed},
              {"error", rec.error}};
    return j.dump(2);
}

StudyRecord record_from_json(const std::string &text) {
    json j = json::parse(text);
    StudyRecord rec;
    rec.config_id = j.at("config_id").get<std::string>();
    rec.point.arch = arch_from_name(j.at("arch").get<std::string>());
    rec.point.optimiser = optim_kind_from_name(j.at("optimiser").get<std::string>());
    rec.point.lr = j.at("lr").get<double>();
    rec.point.batch_size = j.at("batch_size").get<int>();
    rec.point.seed = j.at("seed").get<uint64_t>();
    rec.epochs = j.at("epochs").get<int>();
    rec.best_epoch = j.at("best_epoch").get<int>();
    rec.train_acc = j.at("train_acc").get<double>();
    rec.dev_acc = j.at("dev_acc").get<double>();
    rec.iid_acc = j.at("iid_acc").get<double>();
    rec.ood_acc = j.at("ood_acc").get<double>();
    rec.test_acc = j.at("test_acc").get<double>();
    const json &s = j.at("sharpness");
    rec.sharpness.epsilon = s.at("epsilon").get<double>();
    for (const auto &v : s.at("values")) rec.sharpness.values.push_back(dec_inf(v));
    rec.sharpness.seeds = s.at("seeds").get<std::vector<uint64_t>>();
    rec.sharpness.mean = dec_inf(s.at("mean"));
    rec.sharpness.stddev = s.at("std").get<double>();
    rec.sharpness.single_repeat = s.at("single_repeat").get<bool>();
    rec.sharpness.divergent = s.at("divergent").get<bool>();
    rec.sharpness.divergent_count = s.at("divergent_count").get<int>();
    rec.failed = j.at("failed").get<bool>();
    rec.error = j.at("error").get<std::string>();
    return rec;
}

std::vector<StudyRecord> run_study(const StudyConfig &cfg) {
    if (cfg.out_dir.empty()) throw std::invalid_argument("run_study: out_dir required");
    fs::create_directories(fs::path(cfg.out_dir) / "records");
    fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");

    const Dataset data = generate_dataset(cfg.synth);
    auto [iid, ood] = split_iid_ood(data.test);
    std::vector<Sample> eval_set = data.train;
    if (cfg.eval_limit > 0 && static_cast<size_t>(cfg.eval_limit) < eval_set.size()) {
        eval_set.resize(static_cast<size_t>(cfg.eval_limit));
    }

    std::ofstream timing_log(fs::path(cfg.out_dir) / "timings.csv", std::ios::app);
    std::vector<StudyRecord> records;
    for (const GridPoint &point : cfg.grid.enumerate()) {
        const std::string id = point.config_id();
        const fs::path rec_path = fs::path(cfg.out_dir) / "records" / (id + ".json");
        if (fs::exists(rec_path)) {
            std::ifstream in(rec_path);
            std::string text((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
            records.push_back(record_from_json(text));
            continue;
        }
        if (cfg.verbose) std::fprintf(stderr, "[study] %s\n", id.c_str());
        const auto t0 = std::chrono::steady_clock::now();

        StudyRecord rec;
        rec.config_id = id;
        rec.point = point;
        rec.epochs = cfg.epochs;
        try {
            ModelSpec spec = point.arch == Arch::Mini14
                                 ? ModelSpec::mini14(data.classes, data.mel_bins)
                                 : ModelSpec::mini10(data.classes, data.mel_bins);
            TrainConfig tc;
            tc.epochs = cfg.epochs;
            tc.batch_size = point.batch_size;
            tc.seed = point.seed;
            tc.optim = point.optimiser == OptimConfig::Kind::SGD
                           ? OptimConfig::sgd(point.lr)
                           : OptimConfig::adam(point.lr);
            TrainResult tr = train(spec, data, tc);
            rec.best_epoch = tr.best_epoch;
            rec.train_acc = accuracy(tr.best, data.train);
            rec.dev_acc = tr.logs[static_cast<size_t>(tr.best_epoch - 1)].dev_acc;
            rec.iid_acc = accuracy(tr.best, iid);
            rec.ood_acc = accuracy(tr.best, ood);
            rec.test_acc = accuracy(tr.best, data.test);

            SharpnessProtocol proto = cfg.protocol;
            proto.base_seed = derive_seed(point.seed, 0x7368617270ULL);
            rec.sharpness = sharpness_study_model(tr.best, eval_set, proto, point.batch_size);
            save_checkpoint(tr.best, (fs::path(cfg.out_dir) / "checkpoints" / (id + ".mscp")).string());
        } catch (const std::exception &e) {
            rec.failed = true;
            rec.error = e.what();
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timing_log << id << "," << rec.wall_seconds << "\n";
        timing_log.flush();

        std::ofstream out(rec_path);
        out << record_to_json(rec) << "\n";
        records.push_back(std::move(rec));
    }
    write_summary_csv(records, (fs::path(cfg.out_dir) / "summary.csv").string());
    return records;
}

namespace {

FitLine fit_line(std::span<const double> xs, std::span<const double> ys) {
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    FitLine f;
    if (denom != 0.0) {
        f.slope = (n * sxy - sx * sy) / denom;
        f.intercept = (sy - f.slope * sx) / n;
    }
    return f;
}

}  // namespace

CorrelationReport correlation_report(const std::vector<StudyRecord> &records) {
    std::vector<double> sharp, iid, ood, combined;
    CorrelationReport rep;
    for (const auto &r : records) {
        if (r.failed || r.sharpness.divergent || !std::isfinite(r.sharpness.mean)) continue;
        sharp.push_back(r.sharpness.mean);
        iid.push_back(r.iid_acc);
        ood.push_back(r.ood_acc);
        combined.push_back(r.test_acc);
        rep.table.emplace_back(r.config_id, r.sharpness.mean, r.iid_acc, r.ood_acc);
    }
    if (sharp.size() < 3) {
        throw std::invalid_argument("correlation_report: need at least 3 non-divergent records, have " +
                                    std::to_string(sharp.size()));
    }
    try {
        rep.iid_r = pearson(sharp, iid);
        rep.ood_r = pearson(sharp, ood);
        rep.combined_r = pearson(sharp, combined);
    } catch (const DegenerateDataError &) {
        rep.degenerate = true;
    }
    rep.iid_fit = fit_line(sharp, iid);
    rep.ood_fit = fit_line(sharp, ood);
    rep.combined_fit = fit_line(sharp, combined);
    return rep;
}

std::map<std::string, GroupStats> disaggregate(const std::vector<StudyRecord> &records,
                                               const std::string &group_key) {
    if (records.empty()) throw std::invalid_argument("disaggregate: no records");
    static const std::vector<std::string> keys = {"architecture", "optimiser",
                                                  "learning-rate", "batch-size", "seed"};
    if (std::find(keys.begin(), keys.end(), group_key) == keys.end()) {
        throw std::invalid_argument("disaggregate: unknown group key '" + group_key + "'");
    }
    std::map<std::string, GroupStats> groups;
    std::map<std::string, double> iid_sum, ood_sum;
    for (const auto &r : records) {
        const std::string value = r.point.as_map().at(group_key);
        GroupStats &g = groups[value];
        g.count += 1;
        g.sharpness_sum += r.sharpness.mean;
        g.test_acc_sum += r.test_acc;
        iid_sum[value] += r.iid_acc;
        ood_sum[value] += r.ood_acc;
    }
    for (auto &[value, g] : groups) {
        g.mean_sharpness = g.sharpness_sum / g.count;
        g.mean_test_acc = g.test_acc_sum / g.count;
        g.mean_iid_acc = iid_sum[value] / g.count;
        g.mean_ood_acc = ood_sum[value] / g.count;
    }
    return groups;
}

void write_summary_csv(const std::vector<StudyRecord> &records, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "config_id,arch,optimiser,lr,batch_size,seed,epochs,best_epoch,"
           "train_acc,dev_acc,iid_acc,ood_acc,test_acc,sharpness_mean,sharpness_std,"
           "divergent,failed\n";
    char buf[64];
    auto num = [&buf](double v) {
        if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto &r : records) {
        out << r.config_id << "," << arch_name(r.point.arch) << ","
            << optim_kind_name(r.point.optimiser) << "," << lr_str(r.point.lr) << ","
            << r.point.batch_size << "," << r.point.seed << "," << r.epochs << ","
            << r.best_epoch << "," << num(r.train_acc) << "," << num(r.dev_acc) << ","
            << num(r.iid_acc) << "," << num(r.ood_acc) << "," << num(r.test_acc) << ","
            << num(r.sharpness.mean) << "," << num(r.sharpness.stddev) << ","
            << (r.sharpness.divergent ? 1 : 0) << "," << (r.failed ? 1 : 0) << "\n";
    }
}

std::vector<StudyRecord> load_study_records(const std::string &study_dir) {
    const fs::path dir = fs::path(study_dir) / "records";
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("no records directory under " + study_dir);
    }
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<StudyRecord> records;
    for (const auto &f : files) {
        std::ifstream in(f);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        records.push_back(record_from_json(text));
    }
    return records;
}

void write_report_json(const CorrelationReport &report, const std::string &path) {
    json table = json::array();
    for (const auto &[id, s, i, o] : report.table) {
        table.push_back({{"config_id", id}, {"sharpness", s}, {"iid_acc", i}, {"ood_acc", o}});
    }
    json j = {{"iid_r", report.iid_r},
              {"ood_r", report.ood_r},
              {"combined_r", report.combined_r},
              {"degenerate", report.degenerate},
              {"iid_fit", {{"slope", report.iid_fit.slope}, {"intercept", report.iid_fit.intercept}}},
              {"ood_fit", {{"slope", report.ood_fit.slope}, {"intercept", report.ood_fit.intercept}}},
              {"combined_fit",
               {{"slope", report.combined_fit.slope}, {"intercept", report.combined_fit.intercept}}},
              {"records", table}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace lossland

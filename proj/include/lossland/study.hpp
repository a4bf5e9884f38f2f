#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lossland/sharpness.hpp"
#include "lossland/trainer.hpp"

namespace lossland {

struct GridPoint {
    Arch arch = Arch::Mini10;
    OptimConfig::Kind optimiser = OptimConfig::Kind::Adam;
    double lr = 1e-3;
    int batch_size = 32;
    uint64_t seed = 42;

    std::string config_id() const;
    std::map<std::string, std::string> as_map() const;
};

struct GridSpec {
    std::vector<Arch> archs = {Arch::Mini10, Arch::Mini14};
    std::vector<OptimConfig::Kind> optimisers = {OptimConfig::Kind::SGD,
                                                 OptimConfig::Kind::Adam};
    std::vector<double> lrs = {1e-3, 1e-4, 1e-5};
    std::vector<int> batch_sizes = {16, 32};
    std::vector<uint64_t> seeds = {42, 43};
    /// A combination is skipped when it matches every (key,value) pair of any
    /// exclusion. Keys: architecture, optimiser, learning-rate, batch-size,
    /// seed.
    std::vector<std::map<std::string, std::string>> exclusions;

    std::vector<GridPoint> enumerate() const;
};

struct StudyRecord {
    std::string config_id;
    GridPoint point;
    int epochs = 0;
    int best_epoch = 0;
    double train_acc = 0.0;
    double dev_acc = 0.0;
    double iid_acc = 0.0;
    double ood_acc = 0.0;
    double test_acc = 0.0;
    SharpnessResult sharpness;
    bool failed = false;
    std::string error;
    double wall_seconds = 0.0;  // sidecar only; never serialized into the ledger
};

struct StudyConfig {
    GridSpec grid;
    SynthConfig synth;
    int epochs = 50;
    SharpnessProtocol protocol;
    int eval_limit = 0;  // sharpness eval subset of the train split; 0 = all
    std::string out_dir;
    bool verbose = false;
};

/// Trains every grid point, measures IID/OOD accuracy and sharpness, and
/// persists one JSON record per config under out_dir/records/. Completed
/// records are reloaded, so an interrupted study resumes by config id.
/// Per-config failures are recorded, not fatal.
std::vector<StudyRecord> run_study(const StudyConfig &cfg);

std::string record_to_json(const StudyRecord &rec);
StudyRecord record_from_json(const std::string &text);

struct FitLine {
    double slope = 0.0;
    double intercept = 0.0;
};

struct CorrelationReport {
    double iid_r = 0.0;
    double ood_r = 0.0;
    double combined_r = 0.0;
    bool degenerate = false;
    FitLine iid_fit, ood_fit, combined_fit;
    // scatter table rows: (config_id, mean sharpness, iid, ood)
    std::vector<std::tuple<std::string, double, double, double>> table;
};

/// Pearson r between mean sharpness and the accuracy metrics, over
/// non-failed, non-divergent records (>= 3 required).
CorrelationReport correlation_report(const std::vector<StudyRecord> &records);

struct GroupStats {
    int count = 0;
    double sharpness_sum = 0.0;
    double test_acc_sum = 0.0;
    double mean_sharpness = 0.0;
    double mean_test_acc = 0.0;
    double mean_iid_acc = 0.0;
    double mean_ood_acc = 0.0;
};

/// Group key: architecture | optimiser | learning-rate | batch-size | seed.
std::map<std::string, GroupStats> disaggregate(const std::vector<StudyRecord> &records,
                                               const std::string &group_key);

void write_summary_csv(const std::vector<StudyRecord> &records, const std::string &path);
std::vector<StudyRecord> load_study_records(const std::string &study_dir);
void write_report_json(const CorrelationReport &report, const std::string &path);

}  // namespace lossland

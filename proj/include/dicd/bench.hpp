#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dicd/pipeline.hpp"

namespace dicd::bench {

/// Multi-seed sweep description. Every (d, degree, seed) dataset is fitted by
/// the lambda_D = 0 baseline and by DICD at each positive lambda_D, for every
/// lambda1 (and lambda2 for MLP models) grid point.
struct BenchConfig {
    std::string graph_type = "er";
    std::vector<int> d{10};
    std::vector<int> degree{4};
    int env_count = 5;
    int n_per_env = 200;
    std::vector<double> noise{0.2, 0.4, 0.6, 0.8, 1.0};  ///< variances unless noise_as_std
    bool noise_as_std = false;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::string model = "linear";  ///< "linear" | "mlp"
    std::vector<double> lambda1{0.01, 0.1};
    std::vector<double> lambda2{0.01, 0.1};  ///< MLP only
    std::vector<double> lambda_d{0.1, 1.0};
    double threshold = 0.3;
    std::vector<int> hidden{10};          ///< fitted MLP layers
    int mlp_gen_hidden = 100;             ///< generating MLP width
    std::optional<double> env_fraction;
    solver::SolverConfig solver;          ///< lambda_d is overwritten per row
    std::filesystem::path output = "bench_out";
    int workers = 1;
    bool save_datasets = true;

    void validate() const;
};

BenchConfig bench_config_from_json(const nlohmann::json &j);
nlohmann::json to_json(const BenchConfig &cfg);

struct BenchRow {
    std::string graph_type;
    int d = 0;
    int degree = 0;
    int env_count = 0;
    int n_per_env = 0;
    std::string model;
    std::string method;  ///< "dicd" | "baseline"
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda_d = 0.0;
    std::uint64_t seed = 0;
    double fdr = 0.0;
    double tpr = 0.0;
    int shd = 0;
    int nnz = 0;
    double h_final = 0.0;
    bool converged = false;
    double wall_time_sec = 0.0;
    std::string error;  ///< empty on success

    /// Identifies the run: every coordinate column, including seed.
    std::string key() const;
    /// Identifies the aggregate group: every coordinate except seed.
    std::string group() const;
};

struct AggregateRow {
    BenchRow coords;  ///< seed and metric fields unused
    int runs = 0;
    int failed = 0;
    int converged_runs = 0;
    double fdr_mean = 0, fdr_std = 0;
    double tpr_mean = 0, tpr_std = 0;
    double shd_mean = 0, shd_std = 0;
    double nnz_mean = 0;
    double wall_time_mean = 0;
};

extern const char *const kRawHeader;
extern const char *const kAggregateHeader;

std::string to_csv_line(const BenchRow &r);
BenchRow parse_csv_line(const std::string &line);
std::string to_csv_line(const AggregateRow &a);

/// Rows of a raw CSV file, or empty when the file does not exist.
std::vector<BenchRow> read_raw_csv(const std::filesystem::path &file);

/// Mean and population standard deviation per (coordinates, method) group,
/// over the rows without an error; groups ordered by first appearance.
std::vector<AggregateRow> aggregate(const std::vector<BenchRow> &rows);

struct BenchOutcome {
    std::vector<BenchRow> rows;
    std::vector<AggregateRow> aggregates;
    int reused = 0;
    int computed = 0;
};

/// Runs the sweep, appending to <output>/raw.csv and rewriting
/// <output>/aggregate.csv. Rows already present without an error are reused.
BenchOutcome run_bench(const BenchConfig &cfg);

/// Fits one dataset with one grid point and scores it; failures land in
/// BenchRow::error instead of propagating.
BenchRow run_row(const BenchConfig &cfg, const simdata::MultiEnvDataset &ds, BenchRow coords);

pipeline::GenConfig gen_config_for(const BenchConfig &cfg, int d, int degree, std::uint64_t seed);

} // namespace dicd::bench

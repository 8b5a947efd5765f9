#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dicd/linear.hpp"
#include "dicd/mlp.hpp"
#include "dicd/simdata.hpp"

namespace dicd::pipeline {

/// Everything needed to regenerate one synthetic dataset from a seed.
struct GenConfig {
    std::string graph_type = "er";  ///< "er" (degree * d edges) or "sf" (degree edges per arrival)
    int d = 10;
    int degree = 4;
    int env_count = 5;
    int n_per_env = 200;
    /// Environment-node noise per environment, as variances unless
    /// `noise_as_std` is set.
    std::vector<double> noise = {0.2, 0.4, 0.6, 0.8, 1.0};
    bool noise_as_std = false;
    simdata::Mechanism mechanism = simdata::Mechanism::Linear;
    /// Defaults to 0.3 for linear and 0.5 for MLP data when unset.
    std::optional<double> env_fraction;
    simdata::EnvWiring wiring = simdata::EnvWiring::OneToOne;
    double weight_low = 0.5;
    double weight_high = 2.0;
    int mlp_hidden = 100;
    std::uint64_t seed = 0;

    void validate() const;
    simdata::EnvSpec env_spec() const;
};

simdata::MultiEnvDataset generate(const GenConfig &cfg);

/// Serialized outcome of one fit, shared by the linear and MLP models.
struct FitResult {
    std::string model;  ///< "linear" | "mlp"
    Matrix weighted_adjacency;
    graphs::Adjacency binary_adjacency;
    double threshold = 0.3;
    double h_final = 0.0;
    std::vector<double> per_env_loss;
    std::vector<double> per_env_penalty;
    nlohmann::json config_echo;
    std::uint64_t seed = 0;
    double wall_time_sec = 0.0;
    bool converged = false;
    std::optional<mlp::MlpSem> mlp_params;
};

nlohmann::json matrix_to_json(const Matrix &m);
Matrix matrix_from_json(const nlohmann::json &j);

nlohmann::json to_json(const FitResult &r);
FitResult fit_result_from_json(const nlohmann::json &j);
void save_fit_result(const FitResult &r, const std::filesystem::path &file);
FitResult load_fit_result(const std::filesystem::path &file);

FitResult run_linear(const simdata::MultiEnvDataset &ds, const linear::LinearFitConfig &cfg, std::uint64_t seed,
                     solver::FitTrace *trace = nullptr);
FitResult run_mlp(const simdata::MultiEnvDataset &ds, const mlp::MlpFitConfig &cfg, solver::FitTrace *trace = nullptr);

/// Thresholds the weighted estimate at `omega` and scores it against the
/// dataset's ground truth.
graphs::MetricsReport evaluate(const FitResult &r, const simdata::MultiEnvDataset &ds, double omega,
                               bool repair = false);

} // namespace dicd::pipeline

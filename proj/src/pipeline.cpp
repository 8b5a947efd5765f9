#include "dicd/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dicd::pipeline {

using nlohmann::json;

void GenConfig::validate() const {
    if (graph_type != "er" && graph_type != "sf") throw std::invalid_argument("graph type must be 'er' or 'sf'");
    if (d < 2) throw std::invalid_argument("d must be at least 2");
    if (degree < 0) throw std::invalid_argument("degree must be nonnegative");
    if (graph_type == "er" && degree * d > d * (d - 1) / 2)
        throw std::invalid_argument("ER graph with " + std::to_string(degree * d) + " edges does not fit in a DAG over " +
                                    std::to_string(d) + " nodes");
    if (env_count < 1) throw std::invalid_argument("need at least one environment");
    if (n_per_env < 1) throw std::invalid_argument("need at least one sample per environment");
    if (static_cast<int>(noise.size()) != env_count)
        throw std::invalid_argument("got " + std::to_string(noise.size()) + " noise values for " +
                                    std::to_string(env_count) + " environments");
    for (double v : noise)
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("noise values must be positive");
    if (mlp_hidden < 1) throw std::invalid_argument("MLP hidden width must be positive");
}

simdata::EnvSpec GenConfig::env_spec() const {
    simdata::EnvSpec spec;
    spec.env_count = env_count;
    spec.n_per_env.assign(env_count, n_per_env);
    for (double v : noise) spec.noise_scales.push_back(noise_as_std ? v : std::sqrt(v));
    return spec;
}

simdata::MultiEnvDataset generate(const GenConfig &cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto base = cfg.graph_type == "er" ? graphs::gen_er_dag(cfg.d, cfg.degree * cfg.d, rng)
                                             : graphs::gen_sf_dag(cfg.d, cfg.degree, rng);
    const bool is_linear = cfg.mechanism == simdata::Mechanism::Linear;
    const double fraction = cfg.env_fraction.value_or(is_linear ? 0.3 : 0.5);
    const auto aug = simdata::attach_env_nodes(base, fraction, rng, cfg.wiring);
    auto ds = is_linear ? simdata::simulate_linear(aug, cfg.weight_low, cfg.weight_high, cfg.env_spec(), rng)
                        : simdata::simulate_mlp(aug, cfg.mlp_hidden, cfg.env_spec(), rng);
    ds.meta.seed = cfg.seed;
    ds.meta.graph_type = cfg.graph_type;
    return ds;
}

json matrix_to_json(const Matrix &m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json &j) {
    if (!j.is_array()) throw std::invalid_argument("matrix JSON must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw std::invalid_argument("matrix JSON rows differ in length");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

json to_json(const FitResult &r) {
    json out = {{"model", r.model},
                {"weighted_adjacency", matrix_to_json(r.weighted_adjacency)},
                {"binary_adjacency", graphs::to_json(r.binary_adjacency)},
                {"threshold", r.threshold},
                {"h_final", r.h_final},
                {"per_env_loss", r.per_env_loss},
                {"per_env_penalty", r.per_env_penalty},
                {"config_echo", r.config_echo},
                {"seed", r.seed},
                {"wall_time_sec", r.wall_time_sec},
                {"converged", r.converged}};
    if (r.mlp_params) out["mlp_params"] = mlp::to_json(*r.mlp_params);
    return out;
}

FitResult fit_result_from_json(const json &j) {
    FitResult r;
    r.model = j.at("model").get<std::string>();
    r.weighted_adjacency = matrix_from_json(j.at("weighted_adjacency"));
    r.binary_adjacency = graphs::adjacency_from_json(j.at("binary_adjacency"));
    r.threshold = j.value("threshold", r.threshold);
    r.h_final = j.at("h_final").get<double>();
    r.per_env_loss = j.at("per_env_loss").get<std::vector<double>>();
    r.per_env_penalty = j.at("per_env_penalty").get<std::vector<double>>();
    r.config_echo = j.value("config_echo", json::object());
    r.seed = j.value("seed", std::uint64_t{0});
    r.wall_time_sec = j.value("wall_time_sec", 0.0);
    r.converged = j.at("converged").get<bool>();
    if (j.contains("mlp_params")) r.mlp_params = mlp::mlp_sem_from_json(j["mlp_params"]);
    if (r.weighted_adjacency.rows() != r.weighted_adjacency.cols())
        throw std::invalid_argument("fit result: weighted_adjacency is not square");
    return r;
}

void save_fit_result(const FitResult &r, const std::filesystem::path &file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << to_json(r).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

FitResult load_fit_result(const std::filesystem::path &file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read fit result " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw std::runtime_error("malformed fit result " + file.string() + ": " + e.what());
    }
    return fit_result_from_json(j);
}

FitResult run_linear(const simdata::MultiEnvDataset &ds, const linear::LinearFitConfig &cfg, std::uint64_t seed,
                     solver::FitTrace *trace) {
    auto fit = linear::fit_linear(ds, cfg);
    FitResult r;
    r.model = "linear";
    r.weighted_adjacency = fit.params.a_s;
    r.threshold = cfg.threshold;
    r.binary_adjacency = graphs::threshold(r.weighted_adjacency, cfg.threshold);
    r.h_final = fit.h_final;
    r.per_env_loss = fit.per_env_loss;
    r.per_env_penalty = fit.per_env_penalty;
    r.config_echo = linear::to_json(cfg);
    r.seed = seed;
    r.wall_time_sec = fit.wall_time_sec;
    r.converged = fit.converged;
    if (trace) *trace = std::move(fit.trace);
    return r;
}

FitResult run_mlp(const simdata::MultiEnvDataset &ds, const mlp::MlpFitConfig &cfg, solver::FitTrace *trace) {
    auto fit = mlp::fit_mlp(ds, cfg);
    FitResult r;
    r.model = "mlp";
    r.weighted_adjacency = fit.wtheta;
    r.threshold = cfg.threshold;
    r.binary_adjacency = graphs::threshold(r.weighted_adjacency, cfg.threshold);
    r.h_final = fit.h_final;
    r.per_env_loss = fit.per_env_loss;
    r.per_env_penalty = fit.per_env_penalty;
    r.config_echo = mlp::to_json(cfg);
    r.seed = cfg.seed;
    r.wall_time_sec = fit.wall_time_sec;
    r.converged = fit.converged;
    r.mlp_params = std::move(fit.sem);
    if (trace) *trace = std::move(fit.trace);
    return r;
}

graphs::MetricsReport evaluate(const FitResult &r, const simdata::MultiEnvDataset &ds, double omega, bool repair) {
    if (r.weighted_adjacency.rows() != ds.d())
        throw std::invalid_argument("fit result has d = " + std::to_string(r.weighted_adjacency.rows()) +
                                    " but dataset has d = " + std::to_string(ds.d()));
    return graphs::metrics(graphs::threshold(r.weighted_adjacency, omega, repair), ds.meta.truth);
}

} // namespace dicd::pipeline

#include "dicd/mlp.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dicd::mlp {

using nlohmann::json;

void MlpFitConfig::validate() const {
    if (hidden.empty()) throw std::invalid_argument("mlp config: need at least one hidden layer");
    for (int m : hidden)
        if (m < 1) throw std::invalid_argument("mlp config: hidden widths must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("mlp config: lambda1/lambda2 must be nonnegative");
    if (threshold < 0.0) throw std::invalid_argument("mlp config: threshold must be nonnegative");
    solver.validate();
}

json to_json(const MlpFitConfig &cfg) {
    return {{"model", "mlp"},
            {"hidden", cfg.hidden},
            {"lambda1", cfg.lambda1},
            {"lambda2", cfg.lambda2},
            {"threshold", cfg.threshold},
            {"seed", cfg.seed},
            {"weight_by_n", cfg.weight_by_n},
            {"solver", solver::to_json(cfg.solver)}};
}

MlpFitConfig mlp_config_from_json(const json &j, MlpFitConfig cfg) {
    if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<int>>();
    cfg.lambda1 = j.value("lambda1", cfg.lambda1);
    cfg.lambda2 = j.value("lambda2", cfg.lambda2);
    cfg.threshold = j.value("threshold", cfg.threshold);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.weight_by_n = j.value("weight_by_n", cfg.weight_by_n);
    if (j.contains("solver")) cfg.solver = solver::solver_config_from_json(j["solver"], cfg.solver);
    return cfg;
}

json to_json(const MlpSem &sem) {
    auto matrix = [](const Matrix &m) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    json nodes = json::array();
    for (const auto &net : sem.nodes) {
        json layers = json::array(), biases = json::array();
        for (const auto &w : net.weights) layers.push_back(matrix(w));
        for (const auto &b : net.biases) biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
        nodes.push_back({{"layers", layers}, {"biases", biases}});
    }
    return {{"d", sem.d}, {"hidden", sem.hidden}, {"nodes", nodes}};
}

MlpSem mlp_sem_from_json(const json &j) {
    MlpSem sem = MlpSem::zeros(j.at("d").get<int>(), j.at("hidden").get<std::vector<int>>());
    const auto &nodes = j.at("nodes");
    if (nodes.size() != sem.nodes.size()) throw std::invalid_argument("MLP JSON: node count mismatch");
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        auto &net = sem.nodes[n];
        const auto &layers = nodes[n].at("layers");
        const auto &biases = nodes[n].at("biases");
        if (layers.size() != net.weights.size() || biases.size() != net.biases.size())
            throw std::invalid_argument("MLP JSON: layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto &w = net.weights[l];
            if (layers[l].size() != static_cast<std::size_t>(w.rows()))
                throw std::invalid_argument("MLP JSON: layer shape mismatch");
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                if (layers[l][r].size() != static_cast<std::size_t>(w.cols()))
                    throw std::invalid_argument("MLP JSON: layer shape mismatch");
                for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = layers[l][r][c].get<double>();
            }
        }
        for (std::size_t l = 0; l < biases.size(); ++l) {
            const auto b = biases[l].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(b.size()) != net.biases[l].size())
                throw std::invalid_argument("MLP JSON: bias shape mismatch");
            net.biases[l] = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        }
    }
    return sem;
}

MlpObjective::MlpObjective(const std::vector<Matrix> &envs, const MlpFitConfig &cfg) : envs_(envs), cfg_(cfg) {
    if (envs.empty()) throw std::invalid_argument("fit_mlp: dataset has no environments");
    const auto d = static_cast<int>(envs.front().cols());
    double total_n = 0.0;
    for (const auto &x : envs) {
        if (x.cols() != d) throw std::invalid_argument("fit_mlp: environments disagree on d");
        if (x.rows() == 0) throw std::invalid_argument("fit_mlp: empty environment");
        total_n += static_cast<double>(x.rows());
    }
    const double mean_n = total_n / static_cast<double>(envs.size());
    for (const auto &x : envs) weights_.push_back(cfg.weight_by_n ? static_cast<double>(x.rows()) / mean_n : 1.0);
    shape_ = MlpSem::zeros(d, cfg.hidden);
}

MlpSem MlpObjective::unpack(const solver::Vector &params) const {
    MlpSem sem = shape_;
    sem.assign(params);
    return sem;
}

solver::Vector MlpObjective::initial_point() const {
    Rng rng(cfg_.seed);
    return MlpSem::glorot(shape_.d, cfg_.hidden, rng).flatten();
}

solver::Evaluation MlpObjective::evaluate(const solver::Vector &params, double penalty_weight) const {
    const MlpSem sem = unpack(params);
    const int d = sem.d;
    MlpSem grad = MlpSem::zeros(d, cfg_.hidden);
    double value = 0.0;

    for (std::size_t e = 0; e < envs_.size(); ++e) {
        const double w = weights_[e];
        MlpRecord rec(sem, envs_[e]);
        value += w * rec.loss();
        const MlpSem &g = rec.gradient();
        for (int j = 0; j < d; ++j) {
            auto &dst = grad.nodes[j];
            const auto &src = g.nodes[j];
            for (std::size_t l = 0; l < dst.weights.size(); ++l) dst.weights[l] += w * src.weights[l];
            for (std::size_t l = 0; l < dst.biases.size(); ++l) dst.biases[l] += w * src.biases[l];
        }
        if (penalty_weight > 0.0) {
            std::vector<Matrix> direction(d);
            for (int j = 0; j < d; ++j) {
                const Matrix &a = sem.nodes[j].weights.front();
                const Matrix &gj = g.nodes[j].weights.front();
                value += penalty_weight * w * a.cwiseProduct(gj).squaredNorm();
                direction[j] = a.cwiseProduct(a).cwiseProduct(gj);
            }
            const auto hv = rec.first_layer_hvp(direction);
            for (int j = 0; j < d; ++j) {
                const Matrix &a = sem.nodes[j].weights.front();
                const Matrix &gj = g.nodes[j].weights.front();
                grad.nodes[j].weights.front() +=
                    penalty_weight * w * (2.0 * a.cwiseProduct(gj).cwiseProduct(gj) + 2.0 * hv[j]);
            }
        }
    }

    // Group l1 on first-layer rows (the entries of W_theta).
    if (cfg_.lambda1 > 0.0) {
        for (int j = 0; j < d; ++j) {
            const Matrix &a = sem.nodes[j].weights.front();
            Matrix &ga = grad.nodes[j].weights.front();
            for (int i = 0; i < d; ++i) {
                if (i == j) continue;
                const double norm = a.row(i).norm();
                value += cfg_.lambda1 * norm;
                if (norm > 0.0) ga.row(i) += cfg_.lambda1 * a.row(i) / norm;
            }
        }
    }
    if (cfg_.lambda2 > 0.0) value += cfg_.lambda2 * params.squaredNorm();
    grad.mask_self_inputs();
    solver::Vector flat = grad.flatten();
    // Self-input rows of `params` are held at zero, so the l2 term adds nothing there.
    if (cfg_.lambda2 > 0.0) flat += 2.0 * cfg_.lambda2 * params;
    return {value, flat};
}

solver::Evaluation MlpObjective::acyclicity(const solver::Vector &params) const {
    const MlpSem sem = unpack(params);
    const Matrix w = wtheta(sem);
    const Matrix e = expm(w.cwiseProduct(w));
    // h depends on W o W, i.e. on squared row norms: dh/dA1_j[i,:] = 2 E_ji A1_j[i,:].
    MlpSem grad = MlpSem::zeros(sem.d, cfg_.hidden);
    for (int j = 0; j < sem.d; ++j) {
        const Matrix &a = sem.nodes[j].weights.front();
        Matrix &ga = grad.nodes[j].weights.front();
        for (int i = 0; i < sem.d; ++i)
            if (i != j) ga.row(i) = 2.0 * e(j, i) * a.row(i);
    }
    return {e.trace() - static_cast<double>(sem.d), grad.flatten()};
}

solver::Diagnostics MlpObjective::diagnostics(const solver::Vector &params) const {
    const MlpSem sem = unpack(params);
    solver::Diagnostics out;
    for (const auto &x : envs_) {
        out.per_env_loss.push_back(loss_env_mlp(sem, x));
        out.per_env_penalty.push_back(penalty_env_mlp(sem, x));
    }
    return out;
}

void MlpObjective::project(solver::Vector &params, double lr) const {
    (void)lr;
    MlpSem sem = unpack(params);
    sem.mask_self_inputs();
    params = sem.flatten();
}

MlpFit fit_mlp(const simdata::MultiEnvDataset &ds, const MlpFitConfig &cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const MlpObjective objective(ds.envs, cfg);
    auto result = solver::augmented_lagrangian_solve(objective, cfg.solver);

    MlpFit fit;
    fit.sem = objective.unpack(result.params);
    fit.wtheta = wtheta(fit.sem);
    fit.h_final = result.h;
    const auto diag = objective.diagnostics(result.params);
    fit.per_env_loss = diag.per_env_loss;
    fit.per_env_penalty = diag.per_env_penalty;
    fit.converged = result.trace.converged;
    fit.trace = std::move(result.trace);
    fit.wall_time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return fit;
}

} // namespace dicd::mlp

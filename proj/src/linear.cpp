#include "dicd/linear.hpp"

#include <chrono>
#include <cmath>

namespace dicd::linear {

namespace {

void check_dims(const Matrix &a_s, const Matrix &x) {
    if (a_s.rows() != a_s.cols() || x.cols() != a_s.rows())
        throw std::invalid_argument("linear: data has " + std::to_string(x.cols()) + " columns but A_S is " +
                                    std::to_string(a_s.rows()) + "x" + std::to_string(a_s.cols()));
    if (x.rows() == 0) throw std::invalid_argument("linear: environment has no samples");
}

Matrix zero_diagonal(Matrix m) {
    m.diagonal().setZero();
    return m;
}

Matrix as_matrix(const solver::Vector &params, int d) {
    return Eigen::Map<const Matrix>(params.data(), d, d);
}

solver::Vector as_vector(const Matrix &m) {
    return Eigen::Map<const solver::Vector>(m.data(), m.size());
}

} // namespace

Matrix second_moment(const Matrix &x) { return x.transpose() * x / static_cast<double>(x.rows()); }

double loss_env(const Matrix &a_s, const Matrix &x, LossScale scale) {
    check_dims(a_s, x);
    const double mse = (x - x * a_s).squaredNorm() / static_cast<double>(x.rows());
    return scale == LossScale::Training ? 0.5 * mse : mse;
}

Matrix grad_loss_env(const Matrix &a_s, const Matrix &x) {
    check_dims(a_s, x);
    return zero_diagonal(x.transpose() * (x * a_s - x) / static_cast<double>(x.rows()));
}

double penalty_env(const Matrix &a_s, const Matrix &x) {
    return a_s.cwiseProduct(grad_loss_env(a_s, x)).squaredNorm();
}

Matrix grad_penalty_env(const Matrix &a_s, const Matrix &x) {
    check_dims(a_s, x);
    return grad_penalty_from_moment(a_s, second_moment(x));
}

double loss_from_moment(const Matrix &a_s, const Matrix &c) {
    const Matrix r = Matrix::Identity(a_s.rows(), a_s.cols()) - a_s;
    return 0.5 * (r.transpose() * c * r).trace();
}

Matrix grad_loss_from_moment(const Matrix &a_s, const Matrix &c) {
    return zero_diagonal(c * a_s - c);
}

double penalty_from_moment(const Matrix &a_s, const Matrix &c) {
    return a_s.cwiseProduct(grad_loss_from_moment(a_s, c)).squaredNorm();
}

Matrix grad_penalty_from_moment(const Matrix &a_s, const Matrix &c) {
    // P = |A o G|^2 with G = C (A - I): dP/dA = 2 M o G + 2 C (M o A), M = A o G.
    const Matrix g = grad_loss_from_moment(a_s, c);
    const Matrix m = a_s.cwiseProduct(g);
    return zero_diagonal(2.0 * m.cwiseProduct(g) + 2.0 * c * m.cwiseProduct(a_s));
}

OlsResult population_ols(const Matrix &sigma, const graphs::Adjacency &mask) {
    const auto d = sigma.rows();
    if (sigma.cols() != d || mask.rows() != d || mask.cols() != d)
        throw std::invalid_argument("population_ols: covariance and mask must be square and of equal size");
    if ((mask.diagonal().array() != 0).any()) throw std::invalid_argument("population_ols: mask has self-loops");
    OlsResult out;
    out.coefficients = Matrix::Zero(d, d);
    out.residual_variances = sigma.diagonal();
    for (Eigen::Index j = 0; j < d; ++j) {
        std::vector<Eigen::Index> parents;
        for (Eigen::Index i = 0; i < d; ++i)
            if (mask(i, j) != 0) parents.push_back(i);
        if (parents.empty()) continue;
        const auto p = static_cast<Eigen::Index>(parents.size());
        Matrix s_pp(p, p);
        Vector s_pj(p);
        for (Eigen::Index a = 0; a < p; ++a) {
            s_pj(a) = sigma(parents[a], j);
            for (Eigen::Index b = 0; b < p; ++b) s_pp(a, b) = sigma(parents[a], parents[b]);
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(s_pp);
        qr.setThreshold(1e-12);
        if (qr.rank() < p)
            throw SingularityError(static_cast<int>(j), "population_ols: parent covariance of node " +
                                                            std::to_string(j) + " is singular");
        const Vector beta = qr.solve(s_pj);
        for (Eigen::Index a = 0; a < p; ++a) out.coefficients(parents[a], j) = beta(a);
        out.residual_variances(j) = sigma(j, j) - s_pj.dot(beta);
    }
    return out;
}

void LinearFitConfig::validate() const {
    if (lambda1 < 0.0) throw std::invalid_argument("linear config: lambda1 must be nonnegative");
    if (threshold < 0.0) throw std::invalid_argument("linear config: threshold must be nonnegative");
    solver.validate();
}

nlohmann::json to_json(const LinearFitConfig &cfg) {
    return {{"model", "linear"},
            {"lambda1", cfg.lambda1},
            {"threshold", cfg.threshold},
            {"weight_by_n", cfg.weight_by_n},
            {"l1_mode", cfg.l1_mode == L1Mode::Subgradient ? "subgradient" : "proximal"},
            {"solver", solver::to_json(cfg.solver)}};
}

LinearFitConfig linear_config_from_json(const nlohmann::json &j, LinearFitConfig cfg) {
    cfg.lambda1 = j.value("lambda1", cfg.lambda1);
    cfg.threshold = j.value("threshold", cfg.threshold);
    cfg.weight_by_n = j.value("weight_by_n", cfg.weight_by_n);
    if (j.contains("l1_mode")) {
        const auto mode = j["l1_mode"].get<std::string>();
        if (mode == "subgradient") cfg.l1_mode = L1Mode::Subgradient;
        else if (mode == "proximal") cfg.l1_mode = L1Mode::Proximal;
        else throw std::invalid_argument("unknown l1_mode '" + mode + "'");
    }
    if (j.contains("solver")) cfg.solver = solver::solver_config_from_json(j["solver"], cfg.solver);
    return cfg;
}

LinearObjective::LinearObjective(const std::vector<Matrix> &envs, const LinearFitConfig &cfg) : cfg_(cfg) {
    if (envs.empty()) throw std::invalid_argument("fit_linear: dataset has no environments");
    d_ = static_cast<int>(envs.front().cols());
    double total_n = 0.0;
    for (const auto &x : envs) {
        if (x.cols() != d_) throw std::invalid_argument("fit_linear: environments disagree on d");
        if (x.rows() == 0) throw std::invalid_argument("fit_linear: empty environment");
        moments_.push_back(second_moment(x));
        total_n += static_cast<double>(x.rows());
    }
    const double mean_n = total_n / static_cast<double>(envs.size());
    for (const auto &x : envs)
        weights_.push_back(cfg.weight_by_n ? static_cast<double>(x.rows()) / mean_n : 1.0);
}

solver::Vector LinearObjective::initial_point() const { return solver::Vector::Zero(d_ * d_); }

solver::Evaluation LinearObjective::evaluate(const solver::Vector &params, double penalty_weight) const {
    const Matrix a = as_matrix(params, d_);
    double value = 0.0;
    Matrix grad = Matrix::Zero(d_, d_);
    for (std::size_t e = 0; e < moments_.size(); ++e) {
        const Matrix &c = moments_[e];
        const double w = weights_[e];
        const Matrix g = grad_loss_from_moment(a, c);
        value += w * loss_from_moment(a, c);
        grad += w * g;
        if (penalty_weight > 0.0) {
            const Matrix m = a.cwiseProduct(g);
            value += penalty_weight * w * m.squaredNorm();
            grad += penalty_weight * w * (2.0 * m.cwiseProduct(g) + 2.0 * c * m.cwiseProduct(a));
        }
    }
    if (cfg_.l1_mode == L1Mode::Subgradient && cfg_.lambda1 > 0.0) {
        value += cfg_.lambda1 * a.cwiseAbs().sum();
        grad += cfg_.lambda1 * a.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    }
    grad.diagonal().setZero();
    return {value, as_vector(grad)};
}

solver::Evaluation LinearObjective::acyclicity(const solver::Vector &params) const {
    auto h = acyclicity_h(as_matrix(params, d_));
    h.gradient.diagonal().setZero();
    return {h.value, as_vector(h.gradient)};
}

solver::Diagnostics LinearObjective::diagnostics(const solver::Vector &params) const {
    const Matrix a = as_matrix(params, d_);
    solver::Diagnostics out;
    for (const auto &c : moments_) {
        out.per_env_loss.push_back(loss_from_moment(a, c));
        out.per_env_penalty.push_back(penalty_from_moment(a, c));
    }
    return out;
}

void LinearObjective::project(solver::Vector &params, double lr) const {
    Eigen::Map<Matrix> a(params.data(), d_, d_);
    if (cfg_.l1_mode == L1Mode::Proximal && cfg_.lambda1 > 0.0 && lr > 0.0) {
        const double shrink = lr * cfg_.lambda1;
        a = a.unaryExpr([shrink](double v) { return std::copysign(std::max(std::abs(v) - shrink, 0.0), v); });
    }
    a.diagonal().setZero();
}

LinearFit fit_linear(const simdata::MultiEnvDataset &ds, const LinearFitConfig &cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const LinearObjective objective(ds.envs, cfg);
    auto result = solver::augmented_lagrangian_solve(objective, cfg.solver);

    LinearFit fit;
    fit.params.a_s = as_matrix(result.params, objective.d());
    fit.h_final = result.h;
    const auto diag = objective.diagnostics(result.params);
    fit.per_env_loss = diag.per_env_loss;
    fit.per_env_penalty = diag.per_env_penalty;
    fit.converged = result.trace.converged;
    fit.trace = std::move(result.trace);
    fit.wall_time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return fit;
}

} // namespace dicd::linear

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dicd/acyclicity.hpp"
#include "dicd/graphs.hpp"
#include "dicd/simdata.hpp"
#include "dicd/solver.hpp"

namespace dicd::linear {

/// Training loss uses 1/(2 n_e); table mode reports the sum over nodes of
/// mean squared residuals (1/n_e, no 1/2).
enum class LossScale { Training, Table };

/// Fused structure-and-coefficient matrix A_S (zero diagonal).
struct LinearParams {
    Matrix a_s;
};

/// Uncentered second moment X^T X / n.
Matrix second_moment(const Matrix &x);

double loss_env(const Matrix &a_s, const Matrix &x, LossScale scale = LossScale::Training);
/// (1/n) X^T (X A_S - X), diagonal zeroed.
Matrix grad_loss_env(const Matrix &a_s, const Matrix &x);
/// || A_S o grad_loss_env ||_F^2, the squared B-derivative at B = 1.
double penalty_env(const Matrix &a_s, const Matrix &x);
Matrix grad_penalty_env(const Matrix &a_s, const Matrix &x);

/// Same quantities from a precomputed second moment C = X^T X / n.
double loss_from_moment(const Matrix &a_s, const Matrix &c);
Matrix grad_loss_from_moment(const Matrix &a_s, const Matrix &c);
double penalty_from_moment(const Matrix &a_s, const Matrix &c);
Matrix grad_penalty_from_moment(const Matrix &a_s, const Matrix &c);

class SingularityError : public std::runtime_error {
  public:
    SingularityError(int node, const std::string &what) : std::runtime_error(what), node_(node) {}
    int node() const { return node_; }

  private:
    int node_;
};

struct OlsResult {
    Matrix coefficients;              ///< column j holds node j's regression on its mask parents
    Vector residual_variances;
    double total() const { return residual_variances.sum(); }
};

/// Per-node least squares against the covariance `sigma`, restricted to the
/// parents given by `mask` (mask(i, j) = 1 allows i -> j).
OlsResult population_ols(const Matrix &sigma, const graphs::Adjacency &mask);

enum class L1Mode { Subgradient, Proximal };

struct LinearFitConfig {
    double lambda1 = 0.1;
    double threshold = 0.3;
    bool weight_by_n = false;
    L1Mode l1_mode = L1Mode::Subgradient;
    solver::SolverConfig solver;

    void validate() const;
};

nlohmann::json to_json(const LinearFitConfig &cfg);
LinearFitConfig linear_config_from_json(const nlohmann::json &j, LinearFitConfig base = {});

struct LinearFit {
    LinearParams params;
    solver::FitTrace trace;
    double h_final = 0.0;
    std::vector<double> per_env_loss;
    std::vector<double> per_env_penalty;
    bool converged = false;
    double wall_time_sec = 0.0;
};

/// Objective bundle over vec(A_S) (column-major), shared with the solver.
class LinearObjective : public solver::Objective {
  public:
    LinearObjective(const std::vector<Matrix> &envs, const LinearFitConfig &cfg);

    solver::Vector initial_point() const override;
    solver::Evaluation evaluate(const solver::Vector &params, double penalty_weight) const override;
    solver::Evaluation acyclicity(const solver::Vector &params) const override;
    solver::Diagnostics diagnostics(const solver::Vector &params) const override;
    void project(solver::Vector &params, double lr) const override;

    int d() const { return d_; }

  private:
    int d_;
    std::vector<Matrix> moments_;
    std::vector<double> weights_;
    LinearFitConfig cfg_;
};

/// Minimizes sum_e L^e + lambda1 |A_S|_1 + lambda(k) sum_e penalty_e subject to
/// h(A_S) = 0. lambda_d = 0 gives the plain continuous-acyclicity baseline.
LinearFit fit_linear(const simdata::MultiEnvDataset &ds, const LinearFitConfig &cfg);

} // namespace dicd::linear

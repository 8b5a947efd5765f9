#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace dicd::solver {

using Vector = Eigen::VectorXd;

/// Ramp-up / hold / ramp-down weight for the invariance penalty.
/// `total_steps` is rounded up to a multiple of 3 on construction.
class Schedule {
  public:
    Schedule(long total_steps, double peak);

    long total_steps() const { return total_steps_; }
    double peak() const { return peak_; }

  private:
    long total_steps_;
    double peak_;
};

/// Piecewise-linear schedule value at cumulative step k. Steps past the end
/// (k > K) and negative steps return 0.
double lambda_schedule(long k, const Schedule &sched);

struct AdamState {
    Vector m;
    Vector v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(Eigen::Index n, double lr);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(Vector &params, const Vector &grads, AdamState &state);

struct SolverConfig {
    double h_tol = 1e-8;
    double rho_init = 1.0;
    double rho_mult = 10.0;
    double rho_max = 1e16;
    double progress_ratio = 0.25;
    double adam_lr = 1e-3;
    long inner_steps = 3000;
    int max_outer = 100;
    /// Number of outer iterations assumed when sizing the penalty schedule.
    int max_outer_expected = 15;
    /// Peak invariance-penalty weight; 0 disables the penalty.
    double lambda_d = 0.0;

    void validate() const;
};

nlohmann::json to_json(const SolverConfig &cfg);
SolverConfig solver_config_from_json(const nlohmann::json &j, SolverConfig base = {});

/// Per-outer-iteration record.
struct TraceRecord {
    int outer_iter = 0;
    long inner_steps_done = 0;
    double h = 0.0;
    double total_loss = 0.0;
    std::vector<double> per_env_loss;
    std::vector<double> per_env_penalty;
    double alpha = 0.0;
    double rho = 0.0;
    double lambda = 0.0;
    double wall_time_sec = 0.0;
};

struct FitTrace {
    std::vector<TraceRecord> records;
    bool converged = false;
    /// Set when the loop stopped because rho exceeded rho_max.
    bool rho_exhausted = false;
};

nlohmann::json to_json(const TraceRecord &r);
/// One JSON object per line, one line per outer iteration.
std::string to_json_lines(const FitTrace &trace);

/// Smooth terms evaluated for the solver at one parameter vector.
struct Evaluation {
    double value = 0.0;  ///< data loss + regularizers + lambda * penalty
    Vector gradient;
};

struct Diagnostics {
    std::vector<double> per_env_loss;
    std::vector<double> per_env_penalty;
};

/// Objective bundle. `evaluate` covers everything except the
/// augmented-Lagrangian terms, which the solver adds from `acyclicity`.
class Objective {
  public:
    virtual ~Objective() = default;
    virtual Vector initial_point() const = 0;
    virtual Evaluation evaluate(const Vector &params, double penalty_weight) const = 0;
    /// h and dh/dparams.
    virtual Evaluation acyclicity(const Vector &params) const = 0;
    virtual Diagnostics diagnostics(const Vector &params) const = 0;
    /// Re-imposes hard structural zeros (and optional proximal steps) after an
    /// Adam update with learning rate `lr`.
    virtual void project(Vector &params, double lr) const { (void)params, (void)lr; }
};

struct SolveResult {
    Vector params;
    double h = 0.0;
    FitTrace trace;
};

class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string &what, FitTrace trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const FitTrace &trace() const { return trace_; }

  private:
    FitTrace trace_;
};

/// Minimizes objective + alpha*h + rho/2*h^2 by `inner_steps` Adam iterations
/// per outer round. After each round: if h > progress_ratio * h_prev then
/// rho *= rho_mult, else alpha += rho * h. Stops when h <= h_tol, rho > rho_max
/// or max_outer rounds have run. Returns the iterate with the smallest h.
SolveResult augmented_lagrangian_solve(const Objective &objective, const SolverConfig &cfg);

} // namespace dicd::solver

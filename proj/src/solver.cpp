#include "dicd/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace dicd::solver {

Schedule::Schedule(long total_steps, double peak) : total_steps_(total_steps), peak_(peak) {
    if (total_steps <= 0) throw std::invalid_argument("Schedule: total steps must be positive");
    if (peak < 0.0) throw std::invalid_argument("Schedule: peak must be nonnegative");
    total_steps_ = (total_steps + 2) / 3 * 3;
}

double lambda_schedule(long k, const Schedule &sched) {
    const long total = sched.total_steps();
    if (k < 0 || k > total) return 0.0;
    const long third = total / 3;
    if (k <= third) return static_cast<double>(k) / static_cast<double>(third) * sched.peak();
    if (k <= 2 * third) return sched.peak();
    return static_cast<double>(total - k) / static_cast<double>(third) * sched.peak();
}

AdamState::AdamState(Eigen::Index n, double lr_) : m(Vector::Zero(n)), v(Vector::Zero(n)), lr(lr_) {}

void adam_step(Vector &params, const Vector &grads, AdamState &state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.array() -= state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

void SolverConfig::validate() const {
    if (!(h_tol > 0 && rho_init > 0 && rho_max > 0 && adam_lr > 0 && inner_steps > 0 && max_outer > 0 &&
          max_outer_expected > 0))
        throw std::invalid_argument("solver config: tolerances, rates and step counts must be positive");
    if (!(rho_mult > 1.0)) throw std::invalid_argument("solver config: rho_mult must exceed 1");
    if (!(progress_ratio > 0.0 && progress_ratio < 1.0))
        throw std::invalid_argument("solver config: progress_ratio must lie in (0, 1)");
    if (lambda_d < 0.0) throw std::invalid_argument("solver config: lambda_d must be nonnegative");
}

nlohmann::json to_json(const SolverConfig &cfg) {
    return {{"h_tol", cfg.h_tol},
            {"rho_init", cfg.rho_init},
            {"rho_mult", cfg.rho_mult},
            {"rho_max", cfg.rho_max},
            {"progress_ratio", cfg.progress_ratio},
            {"adam_lr", cfg.adam_lr},
            {"inner_steps", cfg.inner_steps},
            {"max_outer", cfg.max_outer},
            {"max_outer_expected", cfg.max_outer_expected},
            {"lambda_d", cfg.lambda_d}};
}

SolverConfig solver_config_from_json(const nlohmann::json &j, SolverConfig cfg) {
    cfg.h_tol = j.value("h_tol", cfg.h_tol);
    cfg.rho_init = j.value("rho_init", cfg.rho_init);
    cfg.rho_mult = j.value("rho_mult", cfg.rho_mult);
    cfg.rho_max = j.value("rho_max", cfg.rho_max);
    cfg.progress_ratio = j.value("progress_ratio", cfg.progress_ratio);
    cfg.adam_lr = j.value("adam_lr", cfg.adam_lr);
    cfg.inner_steps = j.value("inner_steps", cfg.inner_steps);
    cfg.max_outer = j.value("max_outer", cfg.max_outer);
    cfg.max_outer_expected = j.value("max_outer_expected", cfg.max_outer_expected);
    cfg.lambda_d = j.value("lambda_d", cfg.lambda_d);
    return cfg;
}

nlohmann::json to_json(const TraceRecord &r) {
    return {{"outer_iter", r.outer_iter},
            {"inner_steps_done", r.inner_steps_done},
            {"h", r.h},
            {"total_loss", r.total_loss},
            {"per_env_loss", r.per_env_loss},
            {"per_env_penalty", r.per_env_penalty},
            {"alpha", r.alpha},
            {"rho", r.rho},
            {"lambda", r.lambda},
            {"wall_time_sec", r.wall_time_sec}};
}

std::string to_json_lines(const FitTrace &trace) {
    std::ostringstream out;
    for (const auto &r : trace.records) out << to_json(r).dump() << '\n';
    return out.str();
}

SolveResult augmented_lagrangian_solve(const Objective &objective, const SolverConfig &cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const Schedule schedule(static_cast<long>(cfg.max_outer_expected) * cfg.inner_steps,
                            cfg.lambda_d);

    Vector params = objective.initial_point();
    objective.project(params, 0.0);
    double alpha = 0.0;
    double rho = cfg.rho_init;
    double h_prev = std::numeric_limits<double>::infinity();
    long k = 0;

    SolveResult best;
    best.h = std::numeric_limits<double>::infinity();
    FitTrace trace;

    for (int outer = 1; outer <= cfg.max_outer; ++outer) {
        AdamState adam(params.size(), cfg.adam_lr);
        double lambda = 0.0;
        double total = 0.0;
        for (long t = 0; t < cfg.inner_steps; ++t, ++k) {
            lambda = lambda_schedule(k, schedule);
            const Evaluation smooth = objective.evaluate(params, lambda);
            const Evaluation h = objective.acyclicity(params);
            total = smooth.value + alpha * h.value + 0.5 * rho * h.value * h.value;
            Vector grad = smooth.gradient + (alpha + rho * h.value) * h.gradient;
            if (!std::isfinite(total) || !grad.allFinite()) {
                throw DivergenceError("solver diverged at outer iteration " + std::to_string(outer) +
                                          ", inner step " + std::to_string(t),
                                      std::move(trace));
            }
            adam_step(params, grad, adam);
            objective.project(params, cfg.adam_lr);
        }

        const double h = objective.acyclicity(params).value;
        const Diagnostics diag = objective.diagnostics(params);
        TraceRecord rec;
        rec.outer_iter = outer;
        rec.inner_steps_done = k;
        rec.h = h;
        rec.total_loss = total;
        rec.per_env_loss = diag.per_env_loss;
        rec.per_env_penalty = diag.per_env_penalty;
        rec.lambda = lambda;
        rec.wall_time_sec = std::chrono::duration<double>(clock::now() - start).count();
        if (!std::isfinite(h)) {
            trace.records.push_back(rec);
            throw DivergenceError("acyclicity value became non-finite", std::move(trace));
        }

        if (h <= best.h) {
            best.h = h;
            best.params = params;
        }
        if (h <= cfg.h_tol) {
            rec.alpha = alpha;
            rec.rho = rho;
            trace.records.push_back(rec);
            trace.converged = true;
            break;
        }
        if (h > cfg.progress_ratio * h_prev) {
            rho *= cfg.rho_mult;
        } else {
            alpha += rho * h;
            h_prev = h;
        }
        rec.alpha = alpha;
        rec.rho = rho;
        trace.records.push_back(rec);
        if (rho > cfg.rho_max) {
            trace.rho_exhausted = true;
            break;
        }
    }
    best.trace = std::move(trace);
    return best;
}

} // namespace dicd::solver

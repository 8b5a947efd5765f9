#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstring>
#include <limits>

#include "dicd/linear.hpp"
#include "dicd/solver.hpp"
#include "test_util.hpp"

using namespace dicd;
using namespace dicd::solver;

namespace {

// f(x) = 0.5 (x - c)^T Q (x - c), with an h that is identically zero.
class Quadratic : public Objective {
  public:
    Quadratic(Eigen::MatrixXd q, Vector c) : q_(std::move(q)), c_(std::move(c)) {}
    Vector initial_point() const override { return Vector::Zero(c_.size()); }
    Evaluation evaluate(const Vector &x, double) const override {
        const Vector r = x - c_;
        return {0.5 * r.dot(q_ * r), q_ * r};
    }
    Evaluation acyclicity(const Vector &x) const override { return {0.0, Vector::Zero(x.size())}; }
    Diagnostics diagnostics(const Vector &) const override { return {}; }

  private:
    Eigen::MatrixXd q_;
    Vector c_;
};

// h stays at 1 forever, so rho must run out.
class Stuck : public Objective {
  public:
    Vector initial_point() const override { return Vector::Zero(2); }
    Evaluation evaluate(const Vector &x, double) const override { return {x.squaredNorm(), 2.0 * x}; }
    Evaluation acyclicity(const Vector &x) const override { return {1.0, Vector::Zero(x.size())}; }
    Diagnostics diagnostics(const Vector &) const override { return {}; }
};

class Exploding : public Objective {
  public:
    Vector initial_point() const override { return Vector::Zero(1); }
    Evaluation evaluate(const Vector &x, double) const override {
        return {std::numeric_limits<double>::quiet_NaN(), Vector::Zero(x.size())};
    }
    Evaluation acyclicity(const Vector &x) const override { return {0.0, Vector::Zero(x.size())}; }
    Diagnostics diagnostics(const Vector &) const override { return {}; }
};

} // namespace

TEST_CASE("schedule values are exact") {
    const Schedule s(45000, 0.7);
    const long k = s.total_steps();
    CHECK(k == 45000);
    CHECK(lambda_schedule(0, s) == 0.0);
    CHECK(lambda_schedule(k / 3, s) == 0.7);
    CHECK(lambda_schedule(2 * k / 3, s) == 0.7);
    CHECK(lambda_schedule(k / 2, s) == 0.7);
    CHECK(lambda_schedule(k, s) == 0.0);
    CHECK(lambda_schedule(k + 1, s) == 0.0);
    CHECK(lambda_schedule(k / 6, s) == doctest::Approx(0.35));
    CHECK(lambda_schedule(5 * k / 6, s) == doctest::Approx(0.35));
}

TEST_CASE("schedule rounds K up to a multiple of three") {
    CHECK(Schedule(10, 1.0).total_steps() == 12);
    CHECK(Schedule(12, 1.0).total_steps() == 12);
    CHECK(Schedule(1, 1.0).total_steps() == 3);
    CHECK_THROWS_AS(Schedule(0, 1.0), std::invalid_argument);
}

TEST_CASE("schedule is continuous and symmetric") {
    const Schedule s(3000, 2.0);
    const long k = s.total_steps();
    for (long t = 0; t < k; ++t) {
        CHECK(std::abs(lambda_schedule(t + 1, s) - lambda_schedule(t, s)) <= 2.0 / (k / 3) + 1e-12);
        CHECK(lambda_schedule(t, s) == doctest::Approx(lambda_schedule(k - t, s)));
        CHECK(lambda_schedule(t, s) <= 2.0);
    }
}

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
    Vector p(3);
    p << 1, -2, 3;
    const Vector keep = p;
    AdamState st(3, 1e-3);
    for (int i = 0; i < 10; ++i) adam_step(p, Vector::Zero(3), st);
    CHECK(p == keep);
}

TEST_CASE("Adam: constant gradient moves each coordinate by about lr per step") {
    Vector p = Vector::Zero(3);
    Vector g(3);
    g << 5.0, -0.01, 1e-3;
    AdamState st(3, 1e-3);
    for (int i = 0; i < 500; ++i) {
        const Vector before = p;
        adam_step(p, g, st);
        const Vector step = p - before;
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(step(c)) <= 1e-3 * (1.0 + 1e-6));
            CHECK(step(c) * g(c) < 0);
        }
    }
    CHECK(p(0) == doctest::Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("Adam: identical inputs give bitwise identical runs") {
    Rng rng(4);
    std::vector<Vector> grads;
    for (int i = 0; i < 50; ++i) grads.push_back(testutil::random_matrix(6, 1, rng));
    auto run = [&] {
        Vector p = Vector::Ones(6);
        AdamState st(6, 1e-2);
        for (const auto &g : grads) adam_step(p, g, st);
        return p;
    };
    const Vector a = run(), b = run();
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 6) == 0);
    Vector p = Vector::Zero(2);
    AdamState st(3, 1e-3);
    CHECK_THROWS_AS(adam_step(p, Vector::Zero(2), st), std::invalid_argument);
}

TEST_CASE("with h identically zero the solver is plain Adam minimization") {
    Eigen::MatrixXd q(3, 3);
    q << 2, 0.5, 0, 0.5, 1, 0.2, 0, 0.2, 3;
    Vector c(3);
    c << 1.0, -0.5, 0.25;
    const Quadratic obj(q, c);
    SolverConfig cfg;
    cfg.adam_lr = 1e-2;
    cfg.inner_steps = 5000;
    const auto res = augmented_lagrangian_solve(obj, cfg);
    CHECK((res.params - c).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(res.trace.converged);
    CHECK(res.trace.records.size() == 1);
}

TEST_CASE("rho running out is reported as not converged") {
    SolverConfig cfg;
    cfg.inner_steps = 5;
    cfg.rho_max = 1e4;
    const auto res = augmented_lagrangian_solve(Stuck{}, cfg);
    CHECK_FALSE(res.trace.converged);
    CHECK(res.trace.rho_exhausted);
    CHECK(res.trace.records.back().rho > cfg.rho_max);
    // alpha and rho never decrease.
    for (std::size_t i = 1; i < res.trace.records.size(); ++i) {
        CHECK(res.trace.records[i].rho >= res.trace.records[i - 1].rho);
        CHECK(res.trace.records[i].alpha >= res.trace.records[i - 1].alpha);
    }
}

TEST_CASE("max_outer bounds the number of rounds") {
    SolverConfig cfg;
    cfg.inner_steps = 3;
    cfg.max_outer = 4;
    cfg.rho_mult = 1.5;
    const auto res = augmented_lagrangian_solve(Stuck{}, cfg);
    CHECK(res.trace.records.size() == 4);
    CHECK_FALSE(res.trace.converged);
    CHECK_FALSE(res.trace.rho_exhausted);
}

TEST_CASE("non-finite loss aborts with a divergence error") {
    SolverConfig cfg;
    cfg.inner_steps = 3;
    CHECK_THROWS_AS(augmented_lagrangian_solve(Exploding{}, cfg), DivergenceError);
}

TEST_CASE("trace serializes as one JSON object per line") {
    SolverConfig cfg;
    cfg.inner_steps = 3;
    cfg.max_outer = 3;
    cfg.rho_mult = 1.5;
    const auto res = augmented_lagrangian_solve(Stuck{}, cfg);
    const auto text = to_json_lines(res.trace);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
    for (const char *key : {"outer_iter", "inner_steps_done", "h", "total_loss", "per_env_loss", "per_env_penalty",
                            "alpha", "rho", "lambda", "wall_time_sec"})
        CHECK(first.contains(key));
}

TEST_CASE("solver config validation and JSON round trip") {
    SolverConfig cfg;
    cfg.rho_mult = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.progress_ratio = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.inner_steps = 1234;
    cfg.lambda_d = 0.1;
    const auto back = solver_config_from_json(to_json(cfg));
    CHECK(back.inner_steps == 1234);
    CHECK(back.lambda_d == 0.1);
}

TEST_CASE("two-variable single-edge data: acyclic fit with the right direction") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        Matrix x(500, 2);
        for (int r = 0; r < 500; ++r) {
            x(r, 0) = n(rng);
            x(r, 1) = 0.8 * x(r, 0) + n(rng);
        }
        simdata::MultiEnvDataset ds;
        ds.envs = {x};
        ds.meta.d = 2;
        linear::LinearFitConfig cfg;
        cfg.solver.inner_steps = 1000;
        const auto fit = linear::fit_linear(ds, cfg);
        CHECK(fit.h_final <= 1e-8);
        const auto est = graphs::threshold(fit.params.a_s, cfg.threshold);
        CHECK(est(0, 1) == 1);
        CHECK(est(1, 0) == 0);
    }
}

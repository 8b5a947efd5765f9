// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dicd/acyclicity.hpp"
#include "dicd/linear.hpp"
#include "dicd/mlp.hpp"
#include "dicd/pipeline.hpp"
#include "dicd/solver.hpp"
#include "dicd/toy.hpp"

using namespace dicd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

Matrix numeric_gradient(const std::function<double(const Matrix &)> &f, Matrix x, double step = 1e-5) {
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double keep = x(r, c);
            x(r, c) = keep + step;
            const double up = f(x);
            x(r, c) = keep - step;
            const double down = f(x);
            x(r, c) = keep;
            g(r, c) = (up - down) / (2.0 * step);
        }
    return g;
}

double rel_error(const Matrix &a, const Matrix &b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

Matrix gaussian(int rows, int cols, Rng &rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

// Boolean-power nilpotency: independent of the topological sort.
bool nilpotent(const graphs::Adjacency &adj) {
    const auto d = adj.rows();
    const Matrix a = adj.cast<double>();
    Matrix p = Matrix::Identity(d, d);
    for (Eigen::Index k = 0; k < d; ++k) p = (p * a).unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
    return p.isZero();
}

// Samples X = Z (I - W)^{-1} with independent Gaussian noise.
Matrix sample_sem(const Matrix &w, const Vector &noise_var, int n, Rng &rng) {
    const auto d = w.rows();
    Matrix z = gaussian(n, static_cast<int>(d), rng);
    z = z * noise_var.cwiseSqrt().asDiagonal();
    return z * (Matrix::Identity(d, d) - w).inverse();
}

Verdict toy_criterion(const toy::ToyCase &c) {
    const auto start = Clock::now();
    const auto report = toy::run_toy(c);
    const double elapsed = seconds_since(start);
    int failed = 0;
    double worst = 0.0;
    std::set<std::string> failing;
    for (const auto &row : report.rows) {
        worst = std::max(worst, row.max_abs_error);
        if (!row.pass) {
            ++failed;
            failing.insert(row.structure);
        }
    }
    std::ostringstream msg;
    msg << report.rows.size() - failed << "/" << report.rows.size() << " rows within 0.02, max error " << worst
        << ", " << elapsed << " s";
    for (const auto &s : failing) msg << "; mismatch: " << s;
    return {failed == 0 && elapsed < 5.0, msg.str()};
}

Verdict criterion_penalty_discrimination() {
    const auto c = toy::shortcut_case();
    Rng rng(2024);
    std::vector<Matrix> envs;
    for (const auto &v : c.noise_variances) envs.push_back(sample_sem(c.weights, v, 200000, rng));
    Matrix pooled = Matrix::Zero(5, 5);
    for (const auto &x : envs) pooled += linear::second_moment(x);
    pooled /= static_cast<double>(envs.size());

    bool ok = true;
    std::ostringstream msg;
    for (const auto &s : c.structures) {
        const auto ols = linear::population_ols(pooled, toy::structure_mask(s, 5));
        double worst = 0.0;
        for (const auto &x : envs) worst = std::max(worst, linear::penalty_env(ols.coefficients, x));
        const bool pass = s.ground_truth ? worst < 1e-3 : worst > 1e-2;
        ok = ok && pass;
        msg << "[" << s.label << "] max penalty " << worst << (pass ? "" : " (violates)") << "; ";
    }
    return {ok, msg.str()};
}

Verdict criterion_linear_benchmark() {
    const auto start = Clock::now();
    double shd_base = 0.0, shd_dicd = 0.0;
    std::ostringstream per_seed;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        pipeline::GenConfig gen;  // ER4, d = 10, 5 environments x 200, variances 0.2 .. 1.0
        gen.seed = seed;
        const auto ds = pipeline::generate(gen);
        linear::LinearFitConfig cfg;
        cfg.lambda1 = 0.01;
        const auto base = pipeline::evaluate(pipeline::run_linear(ds, cfg, seed), ds, cfg.threshold);
        cfg.solver.lambda_d = 0.1;
        const auto dicd = pipeline::evaluate(pipeline::run_linear(ds, cfg, seed), ds, cfg.threshold);
        shd_base += base.shd;
        shd_dicd += dicd.shd;
        per_seed << " " << dicd.shd << "/" << base.shd;
    }
    shd_base /= 10.0;
    shd_dicd /= 10.0;
    const double elapsed = seconds_since(start);
    std::ostringstream msg;
    msg << "mean SHD dicd " << shd_dicd << " vs baseline " << shd_base << " (per seed dicd/baseline:"
        << per_seed.str() << "), " << elapsed << " s";
    return {shd_dicd <= 8.0 && shd_dicd < shd_base && elapsed <= 15 * 60, msg.str()};
}

Verdict criterion_mlp_benchmark() {
    const auto start = Clock::now();
    double shd_base = 0.0, shd_dicd = 0.0;
    std::ostringstream per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        pipeline::GenConfig gen;
        gen.seed = seed;
        gen.mechanism = simdata::Mechanism::Mlp;
        gen.env_count = 2;
        gen.n_per_env = 1000;
        gen.noise = {0.2, 0.4};
        const auto ds = pipeline::generate(gen);
        mlp::MlpFitConfig cfg;
        cfg.seed = seed;
        const auto base = pipeline::evaluate(pipeline::run_mlp(ds, cfg), ds, cfg.threshold);
        cfg.solver.lambda_d = 0.1;
        const auto dicd = pipeline::evaluate(pipeline::run_mlp(ds, cfg), ds, cfg.threshold);
        shd_base += base.shd;
        shd_dicd += dicd.shd;
        per_seed << " " << dicd.shd << "/" << base.shd;
        std::fprintf(stderr, "[5] seed %llu dicd %d baseline %d (%.0f s)\n", static_cast<unsigned long long>(seed),
                     dicd.shd, base.shd, seconds_since(start));
    }
    shd_base /= 5.0;
    shd_dicd /= 5.0;
    const double elapsed = seconds_since(start);
    std::ostringstream msg;
    msg << "mean SHD dicd " << shd_dicd << " vs baseline " << shd_base << " (per seed dicd/baseline:"
        << per_seed.str() << "), " << elapsed << " s";
    return {shd_dicd <= shd_base && elapsed <= 90 * 60, msg.str()};
}

Verdict criterion_gradients() {
    Rng rng(6);
    double lin_loss = 0, lin_pen = 0, mlp_first = 0, mlp_second = 0;
    const int sizes[] = {3, 5, 10};
    for (int i = 0; i < 20; ++i) {
        const int d = sizes[i % 3];
        const Matrix x = gaussian(40, d, rng);
        Matrix a = gaussian(d, d, rng, 0.5);
        a.diagonal().setZero();
        auto masked = [](Matrix g) {
            g.diagonal().setZero();
            return g;
        };
        lin_loss = std::max(lin_loss, rel_error(linear::grad_loss_env(a, x),
                                                masked(numeric_gradient([&](const Matrix &m) { return linear::loss_env(m, x); }, a))));
        lin_pen = std::max(lin_pen, rel_error(linear::grad_penalty_env(a, x),
                                              masked(numeric_gradient([&](const Matrix &m) { return linear::penalty_env(m, x); }, a))));
    }
    for (int i = 0; i < 20; ++i) {
        const std::vector<int> hidden = i % 2 ? std::vector<int>{3, 2} : std::vector<int>{4};
        const mlp::MlpSem sem = mlp::MlpSem::glorot(3, hidden, rng);
        const Matrix x = gaussian(30, 3, rng);
        const Vector flat = sem.flatten();
        mlp::MlpSem fd = sem;
        fd.assign(numeric_gradient(
            [&](const Matrix &p) {
                mlp::MlpSem s = sem;
                s.assign(p);
                return mlp::loss_env_mlp(s, x);
            },
            flat));
        fd.mask_self_inputs();
        mlp_first = std::max(mlp_first, rel_error(mlp::grad_loss_env_mlp(sem, x).flatten(), fd.flatten()));

        const auto grad = mlp::grad_penalty_env_mlp(sem, x);
        for (int j = 0; j < 3; ++j) {
            Matrix g = numeric_gradient(
                [&](const Matrix &w1) {
                    mlp::MlpSem s = sem;
                    s.nodes[j].weights.front() = w1;
                    return mlp::penalty_env_mlp(s, x);
                },
                sem.nodes[j].weights.front());
            g.row(j).setZero();
            mlp_second = std::max(mlp_second, rel_error(grad[j], g));
        }
    }
    std::ostringstream msg;
    msg << "max rel err: linear loss " << lin_loss << ", linear penalty " << lin_pen << ", mlp loss " << mlp_first
        << ", mlp penalty " << mlp_second;
    return {lin_loss <= 1e-6 && lin_pen <= 1e-5 && mlp_first <= 1e-4 && mlp_second <= 1e-3, msg.str()};
}

Verdict criterion_acyclicity() {
    long checked = 0, wrong = 0;
    for (int d = 1; d <= 4; ++d) {
        std::vector<std::pair<int, int>> slots;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) slots.push_back({i, j});
        for (long mask = 0; mask < (1L << slots.size()); ++mask) {
            graphs::Adjacency a = graphs::Adjacency::Zero(d, d);
            for (std::size_t s = 0; s < slots.size(); ++s)
                if (mask >> s & 1) a(slots[s].first, slots[s].second) = 1;
            wrong += (std::abs(acyclicity_h(a.cast<double>()).value) <= 1e-8) != nilpotent(a);
            ++checked;
        }
    }
    Rng rng(2024);
    std::uniform_real_distribution<double> mag(0.5, 2.0), coin(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        Matrix w = Matrix::Zero(6, 6);
        graphs::Adjacency a = graphs::Adjacency::Zero(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                if (i != j && coin(rng) < (t % 2 ? 0.5 : 0.2)) {
                    w(i, j) = (coin(rng) < 0.5 ? -1 : 1) * mag(rng);
                    a(i, j) = 1;
                }
        wrong += (std::abs(acyclicity_h(w).value) <= 1e-8) != nilpotent(a);
        ++checked;
    }
    Matrix cyc(2, 2);
    cyc << 0, 1, 1, 0;
    const double err = std::abs(acyclicity_h(cyc).value - (2.0 * std::cosh(1.0) - 2.0));
    std::ostringstream msg;
    msg << checked << " matrices, " << wrong << " disagreements; two-cycle error " << err;
    return {wrong == 0 && err <= 1e-9, msg.str()};
}

Verdict criterion_lemma1() {
    Rng rng(8);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int d = 4 + t % 7;  // at least one environment node
        pipeline::GenConfig gen;
        gen.d = d;
        gen.degree = 1;
        gen.env_count = 3;
        gen.n_per_env = 50000;
        gen.noise = {0.2, 0.6, 1.0};
        gen.seed = 100 + static_cast<std::uint64_t>(t);
        const auto ds = pipeline::generate(gen);
        const Matrix &w = *ds.meta.true_weights;
        for (const auto &x : ds.envs) {
            const auto ols = linear::population_ols(linear::second_moment(x), ds.meta.truth.adj());
            worst = std::max(worst, (ols.coefficients - w).cwiseAbs().maxCoeff());
        }
    }
    std::ostringstream msg;
    msg << "20 SEMs x 3 environments, max |coef - truth| " << worst;
    return {worst <= 1e-2, msg.str()};
}

Verdict criterion_schedule() {
    solver::SolverConfig cfg;
    const solver::Schedule s(static_cast<long>(cfg.max_outer_expected) * cfg.inner_steps, 0.1);
    const long k = s.total_steps();
    const bool ok = solver::lambda_schedule(0, s) == 0.0 && solver::lambda_schedule(k / 3, s) == 0.1 &&
                    solver::lambda_schedule(2 * k / 3, s) == 0.1 && solver::lambda_schedule(k / 2, s) == 0.1 &&
                    solver::lambda_schedule(k, s) == 0.0;
    std::ostringstream msg;
    msg << "K = " << k << ": lambda(0) " << solver::lambda_schedule(0, s) << ", lambda(K/3) "
        << solver::lambda_schedule(k / 3, s) << ", lambda(K/2) " << solver::lambda_schedule(k / 2, s)
        << ", lambda(2K/3) " << solver::lambda_schedule(2 * k / 3, s) << ", lambda(K) "
        << solver::lambda_schedule(k, s);
    return {ok, msg.str()};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"DICD acceptance checks"};
    std::vector<int> only;
    app.add_option("--only", only, "Run only these criteria (comma-separated)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"shortcut toy example", [] { return toy_criterion(toy::shortcut_case()); }},
        {"confounder toy example", [] { return toy_criterion(toy::confounder_case()); }},
        {"invariance-penalty discrimination", criterion_penalty_discrimination},
        {"linear benchmark (ER4, d = 10, 10 seeds)", criterion_linear_benchmark},
        {"nonlinear benchmark (ER4, d = 10, 5 seeds)", criterion_mlp_benchmark},
        {"gradient correctness", criterion_gradients},
        {"acyclicity oracle", criterion_acyclicity},
        {"per-environment regression consistency", criterion_lemma1},
        {"penalty schedule exactness", criterion_schedule},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

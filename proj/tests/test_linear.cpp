#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dicd/linear.hpp"
#include "dicd/toy.hpp"
#include "test_util.hpp"

using namespace dicd;
using namespace dicd::linear;

namespace {

Matrix random_offdiag(int d, Rng &rng, double scale) {
    Matrix a = testutil::random_matrix(d, d, rng, scale);
    a.diagonal().setZero();
    return a;
}

// Population covariance of a random linear SEM over a random DAG.
std::pair<Matrix, graphs::BinaryDag> random_sem(int d, Rng &rng, Matrix &weights) {
    const auto g = graphs::gen_er_dag(d, std::min(2 * d, d * (d - 1) / 2), rng);
    std::uniform_real_distribution<double> mag(0.5, 2.0), coin(0.0, 1.0), var(0.2, 3.0);
    weights = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (g.has_edge(i, j)) weights(i, j) = (coin(rng) < 0.5 ? -1 : 1) * mag(rng);
    Vector noise(d);
    for (int j = 0; j < d; ++j) noise(j) = var(rng);
    return {toy::sem_covariance(weights, noise), g};
}

} // namespace

TEST_CASE("loss at A = 0 and the table scale") {
    Rng rng(1);
    const Matrix x = testutil::random_matrix(50, 4, rng);
    const Matrix zero = Matrix::Zero(4, 4);
    CHECK(loss_env(zero, x) == doctest::Approx(x.squaredNorm() / (2.0 * 50)));
    CHECK(loss_env(zero, x, LossScale::Table) == doctest::Approx(x.squaredNorm() / 50));
    CHECK_THROWS_AS(loss_env(Matrix::Zero(3, 3), x), std::invalid_argument);
}

TEST_CASE("gradient at A = 0 is minus the off-diagonal second moment") {
    Rng rng(2);
    const Matrix x = testutil::random_matrix(30, 5, rng);
    Matrix expected = -x.transpose() * x / 30.0;
    expected.diagonal().setZero();
    CHECK(testutil::rel_error(grad_loss_env(Matrix::Zero(5, 5), x), expected) < 1e-14);
}

TEST_CASE("loss and penalty gradients match finite differences") {
    Rng rng(3);
    int instance = 0;
    for (int d : {3, 5, 10}) {
        for (int rep = 0; rep < 7 && instance < 20; ++rep, ++instance) {
            const Matrix x = testutil::random_matrix(40, d, rng);
            const Matrix a = random_offdiag(d, rng, 0.5);
            auto masked = [](Matrix g) {
                g.diagonal().setZero();
                return g;
            };
            const Matrix fd_loss = masked(testutil::numeric_gradient([&](const Matrix &m) { return loss_env(m, x); }, a));
            CHECK(testutil::rel_error(grad_loss_env(a, x), fd_loss) <= 1e-6);
            const Matrix fd_pen =
                masked(testutil::numeric_gradient([&](const Matrix &m) { return penalty_env(m, x); }, a));
            CHECK(testutil::rel_error(grad_penalty_env(a, x), fd_pen) <= 1e-5);
        }
    }
}

TEST_CASE("penalty is zero at A = 0 with zero gradient") {
    Rng rng(4);
    const Matrix x = testutil::random_matrix(20, 4, rng);
    CHECK(penalty_env(Matrix::Zero(4, 4), x) == 0.0);
    CHECK(grad_penalty_env(Matrix::Zero(4, 4), x).isZero());
}

TEST_CASE("penalty equals the squared B-derivative of the loss") {
    Rng rng(5);
    const Matrix x = testutil::random_matrix(60, 4, rng);
    const Matrix a = random_offdiag(4, rng, 0.7);
    const Matrix db = testutil::numeric_gradient(
        [&](const Matrix &b) { return loss_env(a.cwiseProduct(b), x); }, Matrix::Ones(4, 4));
    CHECK(penalty_env(a, x) == doctest::Approx(db.squaredNorm()).epsilon(1e-7));
}

TEST_CASE("two-node penalty gradient matches the expanded polynomial") {
    // A = [[0, a], [b, 0]], C = [[c11, c12], [c12, c22]]:
    // P = a^2 (c11 a - c12)^2 + b^2 (c22 b - c12)^2.
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = testutil::random_matrix(25, 2, rng);
        const Matrix c = x.transpose() * x / 25.0;
        std::normal_distribution<double> n(0.0, 1.0);
        const double a = n(rng), b = n(rng);
        Matrix m = Matrix::Zero(2, 2);
        m(0, 1) = a;
        m(1, 0) = b;
        const double c11 = c(0, 0), c22 = c(1, 1), c12 = c(0, 1);
        const double p = a * a * std::pow(c11 * a - c12, 2) + b * b * std::pow(c22 * b - c12, 2);
        const double dpa = 2 * a * std::pow(c11 * a - c12, 2) + 2 * a * a * (c11 * a - c12) * c11;
        const double dpb = 2 * b * std::pow(c22 * b - c12, 2) + 2 * b * b * (c22 * b - c12) * c22;
        CHECK(penalty_env(m, x) == doctest::Approx(p).epsilon(1e-12));
        const Matrix g = grad_penalty_env(m, x);
        CHECK(g(0, 1) == doctest::Approx(dpa).epsilon(1e-10));
        CHECK(g(1, 0) == doctest::Approx(dpb).epsilon(1e-10));
    }
}

TEST_CASE("moment-based and data-based quantities agree") {
    Rng rng(7);
    const Matrix x = testutil::random_matrix(33, 5, rng);
    const Matrix a = random_offdiag(5, rng, 0.4);
    const Matrix c = second_moment(x);
    CHECK(loss_from_moment(a, c) == doctest::Approx(loss_env(a, x)).epsilon(1e-12));
    CHECK(penalty_from_moment(a, c) == doctest::Approx(penalty_env(a, x)).epsilon(1e-12));
    CHECK(testutil::rel_error(grad_penalty_from_moment(a, c), grad_penalty_env(a, x)) < 1e-12);
}

TEST_CASE("loss decomposes over per-node regressions") {
    Rng rng(8);
    const Matrix x = testutil::random_matrix(40, 6, rng);
    const Matrix a = random_offdiag(6, rng, 0.5);
    double sum = 0.0;
    for (int j = 0; j < 6; ++j) sum += (x.col(j) - x * a.col(j)).squaredNorm() / (2.0 * 40);
    CHECK(loss_env(a, x) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("single-edge SEM: table-scale loss tends to the noise variances") {
    Rng rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    const int rows = 200000;
    Matrix x(rows, 2);
    for (int r = 0; r < rows; ++r) {
        x(r, 0) = n(rng);
        x(r, 1) = 0.8 * x(r, 0) + 0.5 * n(rng);
    }
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = 0.8;
    // Node 1 keeps its own variance (1), node 2 its noise variance (0.25).
    CHECK(loss_env(a, x, LossScale::Table) == doctest::Approx(1.25).epsilon(0.02));
    CHECK((x.col(1) - 0.8 * x.col(0)).squaredNorm() / rows == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("population OLS: empty mask and confounder examples") {
    const auto c = toy::confounder_case();
    const Matrix s1 = toy::sem_covariance(c.weights, c.noise_variances[0]);
    const auto empty = population_ols(s1, graphs::Adjacency::Zero(3, 3));
    CHECK(empty.coefficients.isZero());
    CHECK(testutil::rel_error(empty.residual_variances, s1.diagonal()) < 1e-15);

    const auto truth = population_ols(s1, toy::structure_mask(c.structures[0], 3));
    CHECK(truth.coefficients(0, 2) == doctest::Approx(1.0));
    CHECK(truth.coefficients(0, 1) == doctest::Approx(0.5));
    CHECK(truth.coefficients(1, 2) == doctest::Approx(0.5));
    CHECK(truth.total() == doctest::Approx(6.0));

    const Matrix s2 = toy::sem_covariance(c.weights, c.noise_variances[1]);
    const auto wrong = population_ols(s2, toy::structure_mask(c.structures[1], 3));  // A->B, A->C, C->B
    CHECK(wrong.coefficients(0, 1) == doctest::Approx(-0.75));
    CHECK(wrong.coefficients(0, 2) == doctest::Approx(1.25));
    CHECK(wrong.coefficients(2, 1) == doctest::Approx(1.0));
    CHECK(wrong.total() == doctest::Approx(8.0));
}

TEST_CASE("population OLS with the true mask returns the generating weights") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix w;
        const auto [sigma, g] = random_sem(3 + trial % 6, rng, w);
        const auto ols = population_ols(sigma, g.adj());
        CHECK((ols.coefficients - w).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("population OLS reports singular parent blocks") {
    Matrix sigma = Matrix::Identity(3, 3);
    sigma(0, 1) = sigma(1, 0) = 1.0;  // X0 and X1 perfectly collinear
    graphs::Adjacency mask = graphs::Adjacency::Zero(3, 3);
    mask(0, 2) = mask(1, 2) = 1;
    try {
        population_ols(sigma, mask);
        FAIL("expected a SingularityError");
    } catch (const SingularityError &e) {
        CHECK(e.node() == 2);
    }
}

TEST_CASE("fit on edgeless data adds few spurious edges") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        simdata::MultiEnvDataset ds;
        ds.meta.d = 5;
        for (int e = 0; e < 2; ++e) ds.envs.push_back(testutil::random_matrix(200, 5, rng));
        LinearFitConfig cfg;
        cfg.solver.inner_steps = 1000;
        const auto fit = fit_linear(ds, cfg);
        CHECK(graphs::threshold(fit.params.a_s, cfg.threshold).sum() <= 2);
        CHECK(fit.params.a_s.diagonal().isZero());
        CHECK(fit.per_env_loss.size() == 2);
    }
}

TEST_CASE("lambda_D = 0 fit is deterministic and records a trace") {
    Rng rng(12);
    const auto g = graphs::gen_er_dag(5, 5, rng);
    const auto aug = simdata::attach_env_nodes(g, 0.4, rng);
    simdata::EnvSpec spec;
    spec.env_count = 2;
    spec.noise_scales = {0.5, 1.0};
    spec.n_per_env = {100, 100};
    const auto ds = simdata::simulate_linear(aug, 0.5, 2.0, spec, rng);
    LinearFitConfig cfg;
    cfg.solver.inner_steps = 500;
    const auto a = fit_linear(ds, cfg), b = fit_linear(ds, cfg);
    CHECK(a.params.a_s == b.params.a_s);
    CHECK_FALSE(a.trace.records.empty());
    CHECK(a.trace.records.back().h == doctest::Approx(a.h_final));
}

TEST_CASE("proximal l1 mode also fits") {
    Rng rng(13);
    Matrix x(300, 2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int r = 0; r < 300; ++r) {
        x(r, 0) = n(rng);
        x(r, 1) = 1.2 * x(r, 0) + n(rng);
    }
    simdata::MultiEnvDataset ds;
    ds.meta.d = 2;
    ds.envs = {x};
    LinearFitConfig cfg;
    cfg.l1_mode = L1Mode::Proximal;
    cfg.solver.inner_steps = 1000;
    const auto fit = fit_linear(ds, cfg);
    CHECK(fit.h_final <= 1e-8);
    CHECK(graphs::threshold(fit.params.a_s, 0.3).sum() == 1);
}

TEST_CASE("config JSON round trip") {
    LinearFitConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.l1_mode = L1Mode::Proximal;
    cfg.solver.lambda_d = 1.0;
    const auto back = linear_config_from_json(to_json(cfg));
    CHECK(back.lambda1 == 0.01);
    CHECK(back.l1_mode == L1Mode::Proximal);
    CHECK(back.solver.lambda_d == 1.0);
}

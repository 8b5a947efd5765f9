#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "dicd/pipeline.hpp"
#include "test_util.hpp"

using namespace dicd;
using namespace dicd::pipeline;
namespace fs = std::filesystem;

TEST_CASE("generate is deterministic and honors the configuration") {
    GenConfig cfg;
    cfg.d = 8;
    cfg.degree = 2;
    cfg.env_count = 3;
    cfg.n_per_env = 50;
    cfg.noise = {0.2, 0.5, 1.0};
    cfg.seed = 4;
    const auto a = generate(cfg), b = generate(cfg);
    CHECK(a.envs.size() == 3);
    CHECK(a.envs[0].rows() == 50);
    CHECK(a.meta.truth.edge_count() == 16);
    for (int e = 0; e < 3; ++e) CHECK(a.envs[e] == b.envs[e]);
    CHECK(a.meta.seed == 4);
    // Variances become standard deviations.
    CHECK(a.meta.spec.noise_scales[0] == doctest::Approx(std::sqrt(0.2)));
    cfg.noise_as_std = true;
    CHECK(generate(cfg).meta.spec.noise_scales[0] == doctest::Approx(0.2));
    cfg.seed = 5;
    CHECK(generate(cfg).envs[0] != a.envs[0]);
}

TEST_CASE("generate validation") {
    GenConfig cfg;
    cfg.d = 5;
    cfg.degree = 3;  // 15 edges > 10 slots
    CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
    cfg = GenConfig{};
    cfg.noise = {1.0};
    CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
    cfg = GenConfig{};
    cfg.graph_type = "tree";
    CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
}

TEST_CASE("FitResult JSON round trip and file IO") {
    Rng rng(2);
    FitResult r;
    r.model = "linear";
    r.weighted_adjacency = testutil::random_matrix(3, 3, rng);
    r.binary_adjacency = graphs::threshold(r.weighted_adjacency, 0.3);
    r.h_final = 1e-9;
    r.per_env_loss = {1.0, 2.0};
    r.per_env_penalty = {0.1, 0.2};
    r.config_echo = {{"lambda1", 0.1}};
    r.seed = 77;
    r.converged = true;
    const auto back = fit_result_from_json(to_json(r));
    CHECK(back.weighted_adjacency == r.weighted_adjacency);
    CHECK(back.binary_adjacency == r.binary_adjacency);
    CHECK(back.per_env_loss == r.per_env_loss);
    CHECK(back.seed == 77);
    CHECK(back.converged);
    CHECK_FALSE(back.mlp_params.has_value());

    const auto file = fs::temp_directory_path() / "dicd_test_pipeline_result.json";
    save_fit_result(r, file);
    CHECK(load_fit_result(file).config_echo == r.config_echo);
    fs::remove(file);
}

TEST_CASE("evaluate: truth scores perfectly, mismatched d is rejected") {
    GenConfig cfg;
    cfg.d = 6;
    cfg.degree = 1;
    cfg.n_per_env = 20;
    cfg.seed = 9;
    const auto ds = generate(cfg);
    FitResult r;
    r.model = "linear";
    r.weighted_adjacency = ds.meta.true_weights.value();
    const auto m = evaluate(r, ds, 0.3);
    CHECK(m.shd == 0);
    CHECK(m.tpr == 1.0);
    CHECK(m.fdr == 0.0);
    r.weighted_adjacency = Matrix::Zero(4, 4);
    CHECK_THROWS_AS(evaluate(r, ds, 0.3), std::invalid_argument);
}

TEST_CASE("run_linear and run_mlp produce complete results") {
    GenConfig cfg;
    cfg.d = 4;
    cfg.degree = 1;
    cfg.env_count = 2;
    cfg.noise = {0.5, 1.0};
    cfg.n_per_env = 80;
    cfg.seed = 3;
    const auto ds = generate(cfg);
    linear::LinearFitConfig lc;
    lc.solver.inner_steps = 300;
    const auto lr = run_linear(ds, lc, 3);
    CHECK(lr.model == "linear");
    CHECK(lr.weighted_adjacency.rows() == 4);
    CHECK(lr.per_env_loss.size() == 2);
    CHECK(lr.binary_adjacency == graphs::threshold(lr.weighted_adjacency, lc.threshold));

    mlp::MlpFitConfig mc;
    mc.hidden = {3};
    mc.solver.inner_steps = 20;
    mc.solver.max_outer = 2;
    const auto mr = run_mlp(ds, mc);
    CHECK(mr.model == "mlp");
    REQUIRE(mr.mlp_params.has_value());
    CHECK(fit_result_from_json(to_json(mr)).mlp_params->flatten() == mr.mlp_params->flatten());
}

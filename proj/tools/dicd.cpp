// dicd: generate multi-environment data, fit, evaluate, check the toy
// examples and run benchmark sweeps.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "dicd/bench.hpp"
#include "dicd/pipeline.hpp"
#include "dicd/toy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dicd;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs a validation step, reporting its failure as a usage error.
template <typename F>
void as_usage(F &&f) {
    try {
        f();
    } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
    }
}

void write_text(const fs::path &file, const std::string &text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

json read_json(const fs::path &file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw std::runtime_error("malformed JSON in " + file.string() + ": " + e.what());
    }
}

struct Globals {
    std::uint64_t seed = 0;
    std::string out;
};

struct GenFlags {
    pipeline::GenConfig cfg;
    std::string mechanism = "linear";
    std::string wiring = "one_to_one";
    double env_fraction = 0.0;
};

struct FitFlags {
    std::string data;
    std::string model = "linear";
    std::string config;
    std::string trace;
    std::string l1_mode = "subgradient";
    double lambda1 = 0.1;
    double lambda2 = 0.01;
    double lambda_d = 0.0;
    double threshold = 0.3;
    std::vector<int> hidden{10};
    long inner_steps = 3000;
    int max_outer = 100;
    int max_outer_expected = 15;
    double lr = 1e-3;
    double h_tol = 1e-8;
    bool weight_by_n = false;
};

struct EvalFlags {
    std::string result;
    std::string data;
    double threshold = 0.3;
    std::vector<double> sweep;
    bool repair = false;
};

struct ToyFlags {
    std::string which = "all";
    double tol = 0.02;
};

struct BenchFlags {
    std::string config;
    int workers = 0;
};

int cmd_gen(const Globals &g, GenFlags f, CLI::App &sub) {
    if (g.out.empty()) throw UsageError("gen: --out <dir> is required");
    f.cfg.seed = g.seed;
    as_usage([&] {
        f.cfg.mechanism = simdata::parse_mechanism(f.mechanism);
        f.cfg.wiring = simdata::parse_env_wiring(f.wiring);
        if (sub.count("--env-fraction")) f.cfg.env_fraction = f.env_fraction;
        f.cfg.validate();
    });
    const auto ds = pipeline::generate(f.cfg);
    simdata::save_dataset(ds, g.out);
    std::cout << fs::path(g.out).string() << '\n';
    std::cout << "d=" << ds.d() << " edges=" << ds.meta.truth.edge_count() << " envs=" << ds.env_count()
              << " n_per_env=" << f.cfg.n_per_env << " mechanism=" << simdata::to_string(ds.meta.mechanism)
              << " graph=" << ds.meta.graph_type << " seed=" << g.seed << '\n';
    return 0;
}

int cmd_fit(const Globals &g, const FitFlags &f, CLI::App &sub) {
    if (g.out.empty()) throw UsageError("fit: --out <file> is required");
    if (f.model != "linear" && f.model != "mlp") throw UsageError("fit: --model must be linear or mlp");
    std::optional<json> file_cfg;
    if (!f.config.empty()) file_cfg = read_json(f.config);

    solver::SolverConfig sc;
    if (file_cfg && file_cfg->contains("solver")) sc = solver::solver_config_from_json((*file_cfg)["solver"], sc);
    // Explicit flags override the config file.
    auto given = [&](const char *name) { return sub.count(name) > 0 || !file_cfg; };
    if (given("--inner-steps")) sc.inner_steps = f.inner_steps;
    if (given("--max-outer")) sc.max_outer = f.max_outer;
    if (given("--max-outer-expected")) sc.max_outer_expected = f.max_outer_expected;
    if (given("--lr")) sc.adam_lr = f.lr;
    if (given("--h-tol")) sc.h_tol = f.h_tol;
    if (given("--lambdad")) sc.lambda_d = f.lambda_d;

    const auto ds = simdata::load_dataset(f.data);
    pipeline::FitResult result;
    solver::FitTrace trace;
    if (f.model == "linear") {
        linear::LinearFitConfig lc;
        if (file_cfg) lc = linear::linear_config_from_json(*file_cfg, lc);
        if (given("--lambda1")) lc.lambda1 = f.lambda1;
        if (given("--threshold")) lc.threshold = f.threshold;
        if (given("--weight-by-n")) lc.weight_by_n = f.weight_by_n;
        if (given("--l1-mode")) {
            if (f.l1_mode == "subgradient")
                lc.l1_mode = linear::L1Mode::Subgradient;
            else if (f.l1_mode == "proximal")
                lc.l1_mode = linear::L1Mode::Proximal;
            else
                throw UsageError("fit: --l1-mode must be subgradient or proximal");
        }
        lc.solver = sc;
        as_usage([&] { lc.validate(); });
        result = pipeline::run_linear(ds, lc, g.seed, &trace);
    } else {
        mlp::MlpFitConfig mc;
        if (file_cfg) mc = mlp::mlp_config_from_json(*file_cfg, mc);
        if (given("--lambda1")) mc.lambda1 = sub.count("--lambda1") ? f.lambda1 : 0.01;
        if (given("--lambda2")) mc.lambda2 = f.lambda2;
        if (given("--threshold")) mc.threshold = f.threshold;
        if (given("--hidden")) mc.hidden = f.hidden;
        if (given("--weight-by-n")) mc.weight_by_n = f.weight_by_n;
        mc.seed = g.seed;
        mc.solver = sc;
        as_usage([&] { mc.validate(); });
        result = pipeline::run_mlp(ds, mc, &trace);
    }
    pipeline::save_fit_result(result, g.out);
    if (!f.trace.empty()) write_text(f.trace, solver::to_json_lines(trace));
    std::cout << g.out << '\n';
    std::cout << "h_final=" << result.h_final << " converged=" << (result.converged ? "true" : "false")
              << " edges=" << result.binary_adjacency.sum() << " wall_time_sec=" << result.wall_time_sec << '\n';
    return 0;
}

int cmd_eval(const Globals &g, const EvalFlags &f) {
    const auto result = pipeline::load_fit_result(f.result);
    const auto ds = simdata::load_dataset(f.data);
    json out;
    if (f.sweep.empty()) {
        out = graphs::to_json(pipeline::evaluate(result, ds, f.threshold, f.repair));
        out["threshold"] = f.threshold;
    } else {
        out = json::array();
        for (double omega : f.sweep) {
            auto row = graphs::to_json(pipeline::evaluate(result, ds, omega, f.repair));
            row["threshold"] = omega;
            out.push_back(row);
        }
    }
    const std::string text = out.dump(2) + "\n";
    if (!g.out.empty()) write_text(g.out, text);
    std::cout << text;
    return 0;
}

int cmd_toy(const Globals &g, const ToyFlags &f) {
    std::vector<toy::ToyCase> cases;
    if (f.which == "shortcut" || f.which == "all") cases.push_back(toy::shortcut_case());
    if (f.which == "confounder" || f.which == "all") cases.push_back(toy::confounder_case());
    if (cases.empty()) throw UsageError("toy: --case must be shortcut, confounder or all");

    json reports = json::array();
    for (const auto &c : cases) {
        const auto report = toy::run_toy(c, f.tol);
        std::cout << "== " << c.name << " ==\n";
        for (const auto &row : report.rows) {
            std::printf("%-28s e%d loss %6.2f (%5.2f, %5.2f, %5.2f)  expected %6.2f (%5.2f, %5.2f, %5.2f)  %s\n",
                        row.structure.c_str(), row.env + 1, row.loss, row.coefficients[0], row.coefficients[1],
                        row.coefficients[2], row.expected.loss, row.expected.coefficients[0],
                        row.expected.coefficients[1], row.expected.coefficients[2], row.pass ? "PASS" : "FAIL");
        }
        std::cout << c.name << ": " << (report.all_pass() ? "PASS" : "FAIL") << '\n';
        reports.push_back(toy::to_json(report));
    }
    if (!g.out.empty()) write_text(g.out, reports.dump(2) + "\n");
    return 0;
}

int cmd_bench(const Globals &g, const BenchFlags &f) {
    bench::BenchConfig cfg;
    as_usage([&] {
        try {
            cfg = bench::bench_config_from_json(read_json(f.config));
        } catch (const json::exception &e) {
            throw std::invalid_argument(std::string("bench config: ") + e.what());
        }
        if (!g.out.empty()) cfg.output = g.out;
        if (f.workers > 0) cfg.workers = f.workers;
        cfg.validate();
    });
    const auto outcome = bench::run_bench(cfg);
    std::cout << "rows: " << outcome.rows.size() << " (computed " << outcome.computed << ", reused "
              << outcome.reused << ")\n";
    for (const auto &a : outcome.aggregates) {
        std::printf("%s d=%d k=%d lambda1=%g lambda2=%g lambda_d=%g  SHD %.1f±%.1f  FDR %.2f±%.2f  TPR %.2f±%.2f  (%d runs, %d failed)\n",
                    a.coords.method.c_str(), a.coords.d, a.coords.degree, a.coords.lambda1, a.coords.lambda2,
                    a.coords.lambda_d, a.shd_mean, a.shd_std, a.fdr_mean, a.fdr_std, a.tpr_mean, a.tpr_std, a.runs,
                    a.failed);
    }
    std::cout << (cfg.output / "raw.csv").string() << '\n' << (cfg.output / "aggregate.csv").string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Differentiable invariant causal discovery"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out, "Output path (directory for gen/bench, file otherwise)");

    GenFlags gen;
    auto *gen_cmd = app.add_subcommand("gen", "Generate a multi-environment dataset");
    gen_cmd->fallthrough();
    gen_cmd->add_option("--graph", gen.cfg.graph_type, "er or sf")->capture_default_str();
    gen_cmd->add_option("--d", gen.cfg.d, "Observed nodes")->capture_default_str();
    gen_cmd->add_option("--degree", gen.cfg.degree, "Expected degree k (ERk: k*d edges; SFk: k per node)")
        ->capture_default_str();
    gen_cmd->add_option("--envs", gen.cfg.env_count, "Number of environments")->capture_default_str();
    gen_cmd->add_option("--n", gen.cfg.n_per_env, "Samples per environment")->capture_default_str();
    gen_cmd->add_option("--noise", gen.cfg.noise, "Environment-node noise variance per environment")
        ->delimiter(',')
        ->capture_default_str();
    gen_cmd->add_flag("--noise-as-std", gen.cfg.noise_as_std, "Read --noise as standard deviations");
    gen_cmd->add_option("--mechanism", gen.mechanism, "linear or mlp")->capture_default_str();
    gen_cmd->add_option("--env-fraction", gen.env_fraction, "Fraction of nodes receiving an env node (default 0.3 linear, 0.5 mlp)");
    gen_cmd->add_option("--wiring", gen.wiring, "one_to_one or complete")->capture_default_str();
    gen_cmd->add_option("--weight-low", gen.cfg.weight_low)->capture_default_str();
    gen_cmd->add_option("--weight-high", gen.cfg.weight_high)->capture_default_str();
    gen_cmd->add_option("--gen-hidden", gen.cfg.mlp_hidden, "Hidden width of the generating MLPs")->capture_default_str();

    FitFlags fit;
    auto *fit_cmd = app.add_subcommand("fit", "Fit DICD (or the lambda_D = 0 baseline) to a dataset");
    fit_cmd->fallthrough();
    fit_cmd->add_option("--data", fit.data, "Dataset directory")->required();
    fit_cmd->add_option("--model", fit.model, "linear or mlp")->capture_default_str();
    fit_cmd->add_option("--config", fit.config, "JSON fit config; explicit flags override it");
    fit_cmd->add_option("--lambda1", fit.lambda1, "l1 weight (default 0.1 linear, 0.01 mlp)");
    fit_cmd->add_option("--lambda2", fit.lambda2, "l2 weight (mlp)")->capture_default_str();
    fit_cmd->add_option("--lambdad", fit.lambda_d, "Peak invariance-penalty weight")->capture_default_str();
    fit_cmd->add_option("--threshold", fit.threshold, "Edge threshold omega")->capture_default_str();
    fit_cmd->add_option("--hidden", fit.hidden, "Hidden layer widths (mlp)")->delimiter(',')->capture_default_str();
    fit_cmd->add_option("--inner-steps", fit.inner_steps)->capture_default_str();
    fit_cmd->add_option("--max-outer", fit.max_outer)->capture_default_str();
    fit_cmd->add_option("--max-outer-expected", fit.max_outer_expected, "Outer rounds assumed by the lambda schedule")
        ->capture_default_str();
    fit_cmd->add_option("--lr", fit.lr, "Adam learning rate")->capture_default_str();
    fit_cmd->add_option("--h-tol", fit.h_tol)->capture_default_str();
    fit_cmd->add_option("--l1-mode", fit.l1_mode, "subgradient or proximal (linear)")->capture_default_str();
    fit_cmd->add_flag("--weight-by-n", fit.weight_by_n, "Weight environments by sample size");
    fit_cmd->add_option("--trace", fit.trace, "Write the outer-iteration trace as JSON lines");

    EvalFlags ev;
    auto *eval_cmd = app.add_subcommand("eval", "Score a fit result against the dataset's ground truth");
    eval_cmd->fallthrough();
    eval_cmd->add_option("--result", ev.result, "Fit result JSON")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
    eval_cmd->add_option("--threshold", ev.threshold)->capture_default_str();
    eval_cmd->add_option("--sweep", ev.sweep, "Comma-separated thresholds; one row each")->delimiter(',');
    eval_cmd->add_flag("--repair", ev.repair, "Break cycles left after thresholding");

    ToyFlags ty;
    auto *toy_cmd = app.add_subcommand("toy", "Check the analytic toy examples");
    toy_cmd->fallthrough();
    toy_cmd->add_option("--case", ty.which, "shortcut, confounder or all")->capture_default_str();
    toy_cmd->add_option("--tol", ty.tol)->capture_default_str();

    BenchFlags bf;
    auto *bench_cmd = app.add_subcommand("bench", "Run a multi-seed benchmark sweep");
    bench_cmd->fallthrough();
    bench_cmd->add_option("--config", bf.config, "BenchConfig JSON")->required();
    bench_cmd->add_option("--workers", bf.workers, "Override the config's worker count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen_cmd) return cmd_gen(g, gen, *gen_cmd);
        if (*fit_cmd) return cmd_fit(g, fit, *fit_cmd);
        if (*eval_cmd) return cmd_eval(g, ev);
        if (*toy_cmd) return cmd_toy(g, ty);
        if (*bench_cmd) return cmd_bench(g, bf);
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "dicd/bench.hpp"

using namespace dicd;
using namespace dicd::bench;
namespace fs = std::filesystem;

namespace {

BenchConfig tiny(const std::string &name) {
    BenchConfig cfg;
    cfg.d = {4};
    cfg.degree = {1};
    cfg.env_count = 2;
    cfg.n_per_env = 60;
    cfg.noise = {0.5, 1.0};
    cfg.seeds = {1, 2};
    cfg.lambda1 = {0.1};
    cfg.lambda_d = {0.1, 1.0};
    cfg.solver.inner_steps = 200;
    cfg.solver.max_outer = 10;
    cfg.output = fs::temp_directory_path() / ("dicd_test_bench_" + name);
    fs::remove_all(cfg.output);
    return cfg;
}

int count_lines(const fs::path &file) {
    std::ifstream in(file);
    int n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

BenchRow row(std::string method, double ld, std::uint64_t seed, int shd, double fdr) {
    BenchRow r;
    r.graph_type = "er";
    r.d = 5;
    r.degree = 2;
    r.env_count = 2;
    r.n_per_env = 10;
    r.model = "linear";
    r.method = std::move(method);
    r.lambda1 = 0.1;
    r.lambda_d = ld;
    r.seed = seed;
    r.shd = shd;
    r.fdr = fdr;
    r.tpr = 0.5;
    r.nnz = shd + 1;
    return r;
}

} // namespace

TEST_CASE("tiny sweep: row accounting, files, resume") {
    const auto cfg = tiny("resume");
    const auto first = run_bench(cfg);
    // 2 seeds x (baseline + 2 lambda_D) x 1 lambda1
    CHECK(first.computed == 6);
    CHECK(first.reused == 0);
    CHECK(first.rows.size() == 6);
    for (const auto &r : first.rows) CHECK(r.error.empty());
    CHECK(count_lines(cfg.output / "raw.csv") == 7);
    CHECK(count_lines(cfg.output / "aggregate.csv") == 4);
    CHECK(fs::exists(cfg.output / "config.json"));
    CHECK(fs::exists(cfg.output / "data" / "er_d4_k1_seed2" / "meta.json"));

    const auto second = run_bench(cfg);
    CHECK(second.computed == 0);
    CHECK(second.reused == 6);
    CHECK(count_lines(cfg.output / "raw.csv") == 7);

    // A failed row is retried on the next run.
    {
        auto rows = read_raw_csv(cfg.output / "raw.csv");
        rows[0].error = "simulated failure";
        std::ofstream out(cfg.output / "raw.csv", std::ios::trunc);
        out << kRawHeader << '\n';
        for (const auto &r : rows) out << to_csv_line(r) << '\n';
    }
    const auto third = run_bench(cfg);
    CHECK(third.computed == 1);
    CHECK(third.reused == 5);
    fs::remove_all(cfg.output);
}

TEST_CASE("aggregate: population statistics per group, error rows excluded") {
    std::vector<BenchRow> rows{row("baseline", 0.0, 1, 2, 0.0), row("baseline", 0.0, 2, 4, 0.5),
                               row("dicd", 0.1, 1, 1, 0.25), row("dicd", 0.1, 2, 9, 0.0)};
    rows[3].error = "boom";
    const auto agg = aggregate(rows);
    REQUIRE(agg.size() == 2);
    CHECK(agg[0].coords.method == "baseline");
    CHECK(agg[0].runs == 2);
    CHECK(agg[0].shd_mean == 3.0);
    CHECK(agg[0].shd_std == 1.0);
    CHECK(agg[0].fdr_mean == 0.25);
    CHECK(agg[0].fdr_std == 0.25);
    CHECK(agg[1].runs == 1);
    CHECK(agg[1].failed == 1);
    CHECK(agg[1].shd_mean == 1.0);
    CHECK(agg[1].shd_std == 0.0);
    // Pure function of the rows.
    const auto again = aggregate(rows);
    CHECK(to_csv_line(again[1]) == to_csv_line(agg[1]));
}

TEST_CASE("raw CSV lines round trip; commas in error text are replaced") {
    auto r = row("dicd", 1.0, 7, 3, 1.0 / 3.0);
    r.wall_time_sec = 0.123456789;
    r.error = "bad, \"quoted\" value";
    const auto back = parse_csv_line(to_csv_line(r));
    CHECK(back.key() == r.key());
    CHECK(back.fdr == r.fdr);
    CHECK(back.wall_time_sec == r.wall_time_sec);
    // Commas in error text are replaced so the row stays 19 fields wide.
    CHECK(back.error == "bad; \"quoted\" value");
    CHECK(r.key() != row("dicd", 1.0, 8, 3, 0.0).key());
    CHECK(r.group() == row("dicd", 1.0, 8, 3, 0.0).group());
}

TEST_CASE("run_row records failures instead of throwing") {
    const auto cfg = tiny("error");
    simdata::MultiEnvDataset empty;
    BenchRow coords = row("dicd", 0.1, 1, 0, 0.0);
    const auto out = run_row(cfg, empty, coords);
    CHECK_FALSE(out.error.empty());
}

TEST_CASE("config validation and JSON") {
    auto cfg = tiny("validate");
    cfg.seeds = {1, 1};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny("validate");
    cfg.lambda_d = {0.0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny("validate");
    const auto back = bench_config_from_json(to_json(cfg));
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.lambda_d == cfg.lambda_d);
    CHECK(back.solver.inner_steps == 200);
    CHECK(back.output == cfg.output);
}

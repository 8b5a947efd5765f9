#include "dicd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace dicd::bench {

using nlohmann::json;
using simdata::format_double;

const char *const kRawHeader =
    "graph_type,d,degree,env_count,n_per_env,model,method,lambda1,lambda2,lambda_d,seed,"
    "fdr,tpr,shd,nnz,h_final,converged,wall_time_sec,error";

const char *const kAggregateHeader =
    "graph_type,d,degree,env_count,n_per_env,model,method,lambda1,lambda2,lambda_d,"
    "runs,failed,converged_runs,fdr_mean,fdr_std,tpr_mean,tpr_std,shd_mean,shd_std,nnz_mean,wall_time_mean";

namespace {

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string sanitize(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
    return s;
}

std::string coords_csv(const BenchRow &r) {
    std::ostringstream out;
    out << r.graph_type << ',' << r.d << ',' << r.degree << ',' << r.env_count << ',' << r.n_per_env << ','
        << r.model << ',' << r.method << ',' << format_double(r.lambda1) << ',' << format_double(r.lambda2) << ','
        << format_double(r.lambda_d);
    return out.str();
}

template <typename T>
void require_nonempty(const std::vector<T> &v, const char *name) {
    if (v.empty()) throw std::invalid_argument(std::string("bench config: '") + name + "' must not be empty");
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double> &v) {
    MeanStd out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(v.size()));
    return out;
}

} // namespace

void BenchConfig::validate() const {
    if (graph_type != "er" && graph_type != "sf") throw std::invalid_argument("bench config: graph_type must be er or sf");
    if (model != "linear" && model != "mlp") throw std::invalid_argument("bench config: model must be linear or mlp");
    require_nonempty(d, "d");
    require_nonempty(degree, "degree");
    require_nonempty(seeds, "seeds");
    require_nonempty(lambda1, "lambda1");
    require_nonempty(lambda_d, "lambda_d");
    if (model == "mlp") require_nonempty(lambda2, "lambda2");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw std::invalid_argument("bench config: seeds must be distinct");
    for (double v : lambda_d)
        if (!(v > 0.0)) throw std::invalid_argument("bench config: lambda_d grid values must be positive (the 0 baseline is always run)");
    if (workers < 1) throw std::invalid_argument("bench config: workers must be at least 1");
    if (threshold < 0.0) throw std::invalid_argument("bench config: threshold must be nonnegative");
    for (int dd : d)
        for (int k : degree) gen_config_for(*this, dd, k, seeds.front()).validate();
    solver.validate();
}

BenchConfig bench_config_from_json(const json &j) {
    BenchConfig cfg;
    cfg.graph_type = j.value("graph_type", cfg.graph_type);
    cfg.d = j.value("d", cfg.d);
    cfg.degree = j.value("degree", cfg.degree);
    cfg.env_count = j.value("env_count", cfg.env_count);
    cfg.n_per_env = j.value("n_per_env", cfg.n_per_env);
    cfg.noise = j.value("noise", cfg.noise);
    cfg.noise_as_std = j.value("noise_as_std", cfg.noise_as_std);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.model = j.value("model", cfg.model);
    cfg.lambda1 = j.value("lambda1", cfg.lambda1);
    cfg.lambda2 = j.value("lambda2", cfg.lambda2);
    cfg.lambda_d = j.value("lambda_d", cfg.lambda_d);
    cfg.threshold = j.value("threshold", cfg.threshold);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.mlp_gen_hidden = j.value("mlp_gen_hidden", cfg.mlp_gen_hidden);
    if (j.contains("env_fraction") && !j["env_fraction"].is_null()) cfg.env_fraction = j["env_fraction"].get<double>();
    if (j.contains("solver")) cfg.solver = solver::solver_config_from_json(j["solver"], cfg.solver);
    cfg.output = j.value("output", cfg.output.string());
    cfg.workers = j.value("workers", cfg.workers);
    cfg.save_datasets = j.value("save_datasets", cfg.save_datasets);
    return cfg;
}

json to_json(const BenchConfig &cfg) {
    json j = {{"graph_type", cfg.graph_type},
              {"d", cfg.d},
              {"degree", cfg.degree},
              {"env_count", cfg.env_count},
              {"n_per_env", cfg.n_per_env},
              {"noise", cfg.noise},
              {"noise_as_std", cfg.noise_as_std},
              {"seeds", cfg.seeds},
              {"model", cfg.model},
              {"lambda1", cfg.lambda1},
              {"lambda2", cfg.lambda2},
              {"lambda_d", cfg.lambda_d},
              {"threshold", cfg.threshold},
              {"hidden", cfg.hidden},
              {"mlp_gen_hidden", cfg.mlp_gen_hidden},
              {"solver", solver::to_json(cfg.solver)},
              {"output", cfg.output.string()},
              {"workers", cfg.workers},
              {"save_datasets", cfg.save_datasets}};
    j["env_fraction"] = cfg.env_fraction ? json(*cfg.env_fraction) : json(nullptr);
    return j;
}

std::string BenchRow::key() const { return coords_csv(*this) + ',' + std::to_string(seed); }
std::string BenchRow::group() const { return coords_csv(*this); }

std::string to_csv_line(const BenchRow &r) {
    std::ostringstream out;
    out << r.key() << ',' << format_double(r.fdr) << ',' << format_double(r.tpr) << ',' << r.shd << ',' << r.nnz << ','
        << format_double(r.h_final) << ',' << (r.converged ? 1 : 0) << ',' << format_double(r.wall_time_sec) << ','
        << sanitize(r.error);
    return out.str();
}

BenchRow parse_csv_line(const std::string &line) {
    const auto f = split(line);
    if (f.size() != 19) throw std::runtime_error("bench CSV row has " + std::to_string(f.size()) + " fields, expected 19");
    BenchRow r;
    r.graph_type = f[0];
    r.d = std::stoi(f[1]);
    r.degree = std::stoi(f[2]);
    r.env_count = std::stoi(f[3]);
    r.n_per_env = std::stoi(f[4]);
    r.model = f[5];
    r.method = f[6];
    r.lambda1 = std::stod(f[7]);
    r.lambda2 = std::stod(f[8]);
    r.lambda_d = std::stod(f[9]);
    r.seed = std::stoull(f[10]);
    r.fdr = std::stod(f[11]);
    r.tpr = std::stod(f[12]);
    r.shd = std::stoi(f[13]);
    r.nnz = std::stoi(f[14]);
    r.h_final = std::stod(f[15]);
    r.converged = f[16] == "1";
    r.wall_time_sec = std::stod(f[17]);
    r.error = f[18];
    return r;
}

std::string to_csv_line(const AggregateRow &a) {
    std::ostringstream out;
    out << coords_csv(a.coords) << ',' << a.runs << ',' << a.failed << ',' << a.converged_runs << ','
        << format_double(a.fdr_mean) << ',' << format_double(a.fdr_std) << ',' << format_double(a.tpr_mean) << ','
        << format_double(a.tpr_std) << ',' << format_double(a.shd_mean) << ',' << format_double(a.shd_std) << ','
        << format_double(a.nnz_mean) << ',' << format_double(a.wall_time_mean);
    return out.str();
}

std::vector<BenchRow> read_raw_csv(const std::filesystem::path &file) {
    std::vector<BenchRow> rows;
    std::ifstream in(file);
    if (!in) return rows;
    std::string line;
    if (!std::getline(in, line)) return rows;
    if (line != kRawHeader) throw std::runtime_error(file.string() + " does not have the expected bench header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            rows.push_back(parse_csv_line(line));
        } catch (const std::exception &) {
            // A row cut short by an interrupted run; it is recomputed.
        }
    }
    return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<BenchRow> &rows) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const BenchRow *>> groups;
    for (const auto &r : rows) {
        auto [it, fresh] = groups.try_emplace(r.group());
        if (fresh) order.push_back(r.group());
        it->second.push_back(&r);
    }
    std::vector<AggregateRow> out;
    for (const auto &g : order) {
        const auto &members = groups[g];
        AggregateRow a;
        a.coords = *members.front();
        std::vector<double> fdr, tpr, shd, nnz, wall;
        for (const auto *r : members) {
            if (!r->error.empty()) {
                ++a.failed;
                continue;
            }
            ++a.runs;
            if (r->converged) ++a.converged_runs;
            fdr.push_back(r->fdr);
            tpr.push_back(r->tpr);
            shd.push_back(r->shd);
            nnz.push_back(r->nnz);
            wall.push_back(r->wall_time_sec);
        }
        const auto f = mean_std(fdr), t = mean_std(tpr), s = mean_std(shd);
        a.fdr_mean = f.mean, a.fdr_std = f.std;
        a.tpr_mean = t.mean, a.tpr_std = t.std;
        a.shd_mean = s.mean, a.shd_std = s.std;
        a.nnz_mean = mean_std(nnz).mean;
        a.wall_time_mean = mean_std(wall).mean;
        out.push_back(a);
    }
    return out;
}

pipeline::GenConfig gen_config_for(const BenchConfig &cfg, int d, int degree, std::uint64_t seed) {
    pipeline::GenConfig g;
    g.graph_type = cfg.graph_type;
    g.d = d;
    g.degree = degree;
    g.env_count = cfg.env_count;
    g.n_per_env = cfg.n_per_env;
    g.noise = cfg.noise;
    g.noise_as_std = cfg.noise_as_std;
    g.mechanism = cfg.model == "mlp" ? simdata::Mechanism::Mlp : simdata::Mechanism::Linear;
    g.env_fraction = cfg.env_fraction;
    g.mlp_hidden = cfg.mlp_gen_hidden;
    g.seed = seed;
    return g;
}

BenchRow run_row(const BenchConfig &cfg, const simdata::MultiEnvDataset &ds, BenchRow row) {
    try {
        pipeline::FitResult fit;
        if (cfg.model == "linear") {
            linear::LinearFitConfig lc;
            lc.lambda1 = row.lambda1;
            lc.threshold = cfg.threshold;
            lc.solver = cfg.solver;
            lc.solver.lambda_d = row.lambda_d;
            fit = pipeline::run_linear(ds, lc, row.seed);
        } else {
            mlp::MlpFitConfig mc;
            mc.hidden = cfg.hidden;
            mc.lambda1 = row.lambda1;
            mc.lambda2 = row.lambda2;
            mc.threshold = cfg.threshold;
            mc.seed = row.seed;
            mc.solver = cfg.solver;
            mc.solver.lambda_d = row.lambda_d;
            fit = pipeline::run_mlp(ds, mc);
        }
        const auto m = pipeline::evaluate(fit, ds, cfg.threshold);
        row.fdr = m.fdr;
        row.tpr = m.tpr;
        row.shd = m.shd;
        row.nnz = m.nnz;
        row.h_final = fit.h_final;
        row.converged = fit.converged;
        row.wall_time_sec = fit.wall_time_sec;
        row.error.clear();
    } catch (const std::exception &e) {
        row.error = e.what();
        if (row.error.empty()) row.error = "unknown failure";
    }
    return row;
}

BenchOutcome run_bench(const BenchConfig &cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output);
    const auto raw_path = cfg.output / "raw.csv";
    {
        std::ofstream out(cfg.output / "config.json");
        out << to_json(cfg).dump(2) << '\n';
    }

    // Keep finished rows; drop failed or truncated ones so they are retried.
    BenchOutcome outcome;
    std::set<std::string> done;
    for (auto &r : read_raw_csv(raw_path)) {
        if (!r.error.empty() || !done.insert(r.key()).second) continue;
        outcome.rows.push_back(std::move(r));
    }
    {
        std::ofstream out(raw_path, std::ios::trunc);
        out << kRawHeader << '\n';
        for (const auto &r : outcome.rows) out << to_csv_line(r) << '\n';
    }

    // One task per dataset; each task runs every grid point on that dataset.
    struct Task {
        int d, degree;
        std::uint64_t seed;
        std::vector<BenchRow> pending;
    };
    std::vector<Task> tasks;
    const std::vector<double> lambda2_grid = cfg.model == "mlp" ? cfg.lambda2 : std::vector<double>{0.0};
    for (int d : cfg.d)
        for (int k : cfg.degree)
            for (auto seed : cfg.seeds) {
                Task t{d, k, seed, {}};
                BenchRow base;
                base.graph_type = cfg.graph_type;
                base.d = d;
                base.degree = k;
                base.env_count = cfg.env_count;
                base.n_per_env = cfg.n_per_env;
                base.model = cfg.model;
                base.seed = seed;
                for (double l1 : cfg.lambda1)
                    for (double l2 : lambda2_grid) {
                        base.lambda1 = l1;
                        base.lambda2 = l2;
                        BenchRow row = base;
                        row.method = "baseline";
                        row.lambda_d = 0.0;
                        std::vector<BenchRow> candidates{row};
                        for (double ld : cfg.lambda_d) {
                            row.method = "dicd";
                            row.lambda_d = ld;
                            candidates.push_back(row);
                        }
                        for (auto &c : candidates) {
                            if (done.count(c.key()))
                                ++outcome.reused;
                            else
                                t.pending.push_back(c);
                        }
                    }
                if (!t.pending.empty()) tasks.push_back(std::move(t));
            }

    std::mutex writer;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto &task = tasks[i];
            const auto gen = gen_config_for(cfg, task.d, task.degree, task.seed);
            std::optional<simdata::MultiEnvDataset> ds;
            std::string gen_error;
            try {
                ds = pipeline::generate(gen);
                if (cfg.save_datasets) {
                    const auto dir = cfg.output / "data" /
                                     (cfg.graph_type + "_d" + std::to_string(task.d) + "_k" +
                                      std::to_string(task.degree) + "_seed" + std::to_string(task.seed));
                    simdata::save_dataset(*ds, dir);
                }
            } catch (const std::exception &e) {
                gen_error = std::string("generation failed: ") + e.what();
            }
            for (const auto &coords : task.pending) {
                BenchRow row = coords;
                if (ds)
                    row = run_row(cfg, *ds, coords);
                else
                    row.error = gen_error;
                std::lock_guard<std::mutex> lock(writer);
                std::ofstream out(raw_path, std::ios::app);
                out << to_csv_line(row) << '\n';
                outcome.rows.push_back(row);
                ++outcome.computed;
                std::cerr << "[bench] " << row.method << " d=" << row.d << " seed=" << row.seed
                          << " lambda1=" << row.lambda1 << " lambda_d=" << row.lambda_d << " shd=" << row.shd
                          << (row.error.empty() ? "" : " error: " + row.error) << '\n';
            }
        }
    };
    const int n_threads = std::min<int>(cfg.workers, static_cast<int>(tasks.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto &th : pool) th.join();
    }

    // Aggregates come from the file contents in a canonical order so they do
    // not depend on worker scheduling.
    std::stable_sort(outcome.rows.begin(), outcome.rows.end(), [](const BenchRow &a, const BenchRow &b) {
        return std::tie(a.d, a.degree, a.lambda1, a.lambda2, a.method, a.lambda_d, a.seed) <
               std::tie(b.d, b.degree, b.lambda1, b.lambda2, b.method, b.lambda_d, b.seed);
    });
    outcome.aggregates = aggregate(outcome.rows);
    std::ofstream agg(cfg.output / "aggregate.csv", std::ios::trunc);
    agg << kAggregateHeader << '\n';
    for (const auto &a : outcome.aggregates) agg << to_csv_line(a) << '\n';
    return outcome;
}

} // namespace dicd::bench

#include "dicd/simdata.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dicd::simdata {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

json matrix_to_json(const Matrix &m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json &j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) throw DatasetError("ragged matrix in meta.json");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

std::string env_file_name(int k) { return "env_" + std::to_string(k) + ".csv"; }

void write_csv(const Matrix &x, const fs::path &path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot open " + path.string() + " for writing");
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << 'X' << (j + 1);
    out << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
        out << '\n';
    }
    if (!out) throw DatasetError("write failed for " + path.string());
}

Matrix read_csv(const fs::path &path, int d, int expected_rows) {
    std::ifstream in(path);
    if (!in) throw DatasetError("missing dataset file " + path.filename().string() + " in " +
                                path.parent_path().string());
    std::string line;
    if (!std::getline(in, line)) throw DatasetError(path.filename().string() + ": empty file");
    std::string expected_header;
    for (int j = 0; j < d; ++j) expected_header += (j ? ",X" : "X") + std::to_string(j + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header) throw DatasetError(path.filename().string() + ": unexpected header");

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(expected_rows) * d);
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char *p = line.data();
        const char *end = line.data() + line.size();
        for (int j = 0; j < d; ++j) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc())
                throw DatasetError(path.filename().string() + ": bad number on row " + std::to_string(rows + 1));
            if (!std::isfinite(v))
                throw DatasetError(path.filename().string() + ": non-finite value on row " +
                                   std::to_string(rows + 1));
            values.push_back(v);
            p = next;
            if (j + 1 < d) {
                if (p == end || *p != ',')
                    throw DatasetError(path.filename().string() + ": too few columns on row " +
                                       std::to_string(rows + 1));
                ++p;
            }
        }
        if (p != end)
            throw DatasetError(path.filename().string() + ": too many columns on row " + std::to_string(rows + 1));
        ++rows;
    }
    if (rows != expected_rows)
        throw DatasetError(path.filename().string() + ": expected " + std::to_string(expected_rows) +
                           " rows, found " + std::to_string(rows));
    Matrix x(rows, d);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = values[static_cast<std::size_t>(i) * d + j];
    return x;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

void save_dataset(const MultiEnvDataset &ds, const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DatasetError("cannot create " + dir.string() + ": " + ec.message());
    const auto &meta = ds.meta;
    json j;
    j["schema_version"] = kSchemaVersion;
    j["d"] = meta.d;
    j["env_count"] = ds.env_count();
    j["n_per_env"] = meta.spec.n_per_env;
    j["seed"] = meta.seed;
    j["noise_scales"] = meta.spec.noise_scales;
    j["base_noise_scale"] = meta.spec.base_noise_scale;
    j["env_wiring"] = to_string(meta.wiring);
    j["graph_type"] = meta.graph_type;
    j["true_adjacency"] = graphs::to_json(meta.truth.adj());
    if (meta.true_weights) j["true_weights"] = matrix_to_json(*meta.true_weights);
    j["mechanism"] = to_string(meta.mechanism);

    std::ofstream out(dir / "meta.json");
    if (!out) throw DatasetError("cannot write meta.json in " + dir.string());
    out << j.dump(2) << '\n';
    for (int k = 0; k < ds.env_count(); ++k) write_csv(ds.envs[k], dir / env_file_name(k));
}

MultiEnvDataset load_dataset(const fs::path &dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw DatasetError("missing dataset file meta.json in " + dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw DatasetError(std::string("meta.json: ") + e.what());
    }
    MultiEnvDataset ds;
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion)
            throw DatasetError("meta.json: schema_version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kSchemaVersion) + ")");
        auto &meta = ds.meta;
        meta.schema_version = version;
        meta.d = j.at("d").get<int>();
        meta.spec.env_count = j.at("env_count").get<int>();
        meta.spec.n_per_env = j.at("n_per_env").get<std::vector<int>>();
        meta.spec.noise_scales = j.at("noise_scales").get<std::vector<double>>();
        meta.spec.base_noise_scale = j.value("base_noise_scale", 1.0);
        meta.seed = j.at("seed").get<std::uint64_t>();
        meta.wiring = parse_env_wiring(j.at("env_wiring").get<std::string>());
        meta.graph_type = j.at("graph_type").get<std::string>();
        meta.mechanism = parse_mechanism(j.at("mechanism").get<std::string>());
        meta.truth = graphs::BinaryDag(graphs::adjacency_from_json(j.at("true_adjacency")));
        if (j.contains("true_weights")) meta.true_weights = matrix_from_json(j["true_weights"]);
        meta.spec.validate();
        if (meta.truth.size() != meta.d) throw DatasetError("meta.json: true_adjacency does not have d nodes");
    } catch (const json::exception &e) {
        throw DatasetError(std::string("meta.json: ") + e.what());
    } catch (const std::invalid_argument &e) {
        throw DatasetError(std::string("meta.json: ") + e.what());
    }
    for (int k = 0; k < ds.meta.spec.env_count; ++k)
        ds.envs.push_back(read_csv(dir / env_file_name(k), ds.meta.d, ds.meta.spec.n_per_env[k]));
    return ds;
}

} // namespace dicd::simdata

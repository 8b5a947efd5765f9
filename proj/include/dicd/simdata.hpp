#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dicd/graphs.hpp"

namespace dicd::simdata {

using graphs::BinaryDag;

enum class EnvWiring { OneToOne, Complete };
enum class Mechanism { Linear, Mlp };

std::string to_string(EnvWiring w);
std::string to_string(Mechanism m);
EnvWiring parse_env_wiring(const std::string &s);
Mechanism parse_mechanism(const std::string &s);

/// Observed DAG plus parentless environment nodes. Environment node k has
/// index base.size() + k in `full`.
struct AugmentedGraph {
    BinaryDag base;
    int env_nodes = 0;
    std::vector<std::pair<int, int>> env_edges;  ///< (env node index in full, observed node)
    EnvWiring wiring = EnvWiring::OneToOne;
    BinaryDag full;
};

/// Selects m = floor(fraction * d) distinct observed nodes and wires m fresh
/// environment nodes into them (pairwise, or every env node to every selected
/// node with EnvWiring::Complete).
AugmentedGraph attach_env_nodes(const BinaryDag &base, double fraction, Rng &rng,
                                EnvWiring wiring = EnvWiring::OneToOne);

struct EnvSpec {
    int env_count = 1;
    std::vector<double> noise_scales;  ///< std dev of environment-node noise, per environment
    std::vector<int> n_per_env;
    double base_noise_scale = 1.0;     ///< std dev of every other node's noise

    void validate() const;
};

/// Ground-truth two-layer perceptron of one node: x_j = sigmoid(x_pa W1) w2 + z.
struct TrueMlp {
    std::vector<int> parents;
    Matrix w1;  ///< |parents| x hidden
    Vector w2;  ///< hidden
};

struct DatasetMeta {
    int schema_version = 1;
    int d = 0;
    BinaryDag truth;
    std::optional<Matrix> true_weights;  ///< observed block, linear only
    EnvSpec spec;
    std::uint64_t seed = 0;
    EnvWiring wiring = EnvWiring::OneToOne;
    std::string graph_type = "unknown";
    Mechanism mechanism = Mechanism::Linear;
};

struct MultiEnvDataset {
    std::vector<Matrix> envs;  ///< n_e x d each
    DatasetMeta meta;
    /// Full (d + m) generating weights; in-memory only.
    std::optional<Matrix> full_weights;
    std::vector<TrueMlp> mechanisms;  ///< in-memory only, indexed by full node

    int d() const { return meta.d; }
    int env_count() const { return static_cast<int>(envs.size()); }
};

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Linear SEM X_j = sum_k W_kj X_k + z_j over the augmented graph; weights
/// uniform on +-[weight_low, weight_high], shared by every environment.
MultiEnvDataset simulate_linear(const AugmentedGraph &aug, double weight_low, double weight_high,
                                const EnvSpec &spec, Rng &rng);

/// Additive-noise SEM with one random sigmoid hidden layer per non-source
/// node, weights uniform on +-[0.5, 2.0].
MultiEnvDataset simulate_mlp(const AugmentedGraph &aug, int hidden, const EnvSpec &spec, Rng &rng);

/// Writes meta.json and env_<k>.csv into `dir` (created if missing).
void save_dataset(const MultiEnvDataset &ds, const std::filesystem::path &dir);
MultiEnvDataset load_dataset(const std::filesystem::path &dir);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

} // namespace dicd::simdata

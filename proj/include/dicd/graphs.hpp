#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace dicd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using Rng = std::mt19937_64;

namespace graphs {

/// 0/1 adjacency matrix, adj(i, j) = 1 means an edge i -> j. May contain
/// cycles; use BinaryDag when acyclicity is required.
using Adjacency = IntMatrix;

/// Directed acyclic graph over `size()` nodes. Construction validates a zero
/// diagonal, 0/1 entries and acyclicity.
class BinaryDag {
  public:
    BinaryDag() = default;
    explicit BinaryDag(int d);
    explicit BinaryDag(Adjacency adj);

    int size() const { return static_cast<int>(adj_.rows()); }
    const Adjacency &adj() const { return adj_; }
    bool has_edge(int from, int to) const { return adj_(from, to) != 0; }
    int edge_count() const { return adj_.sum(); }
    std::vector<int> parents(int node) const;
    std::vector<int> topological_order() const;

    bool operator==(const BinaryDag &other) const { return adj_ == other.adj_; }

  private:
    Adjacency adj_;
};

struct MetricsReport {
    double fdr = 0.0;
    double tpr = 0.0;
    int shd = 0;
    int nnz = 0;
};

/// Erdos-Renyi DAG with exactly `edges` edges placed uniformly among the
/// pairs that respect a uniformly random node order.
BinaryDag gen_er_dag(int d, int edges, Rng &rng);

/// Barabasi-Albert DAG: node t (in arrival order) picks min(k, t) distinct
/// earlier nodes with probability proportional to degree + 1 and adds edges
/// from each of them to t. Node labels are shuffled afterwards.
BinaryDag gen_sf_dag(int d, int k, Rng &rng);

/// Kahn's algorithm on the support of `w` (nonzero entries, self-loops count
/// as cycles).
bool is_acyclic(const Matrix &w);
bool is_acyclic(const Adjacency &adj);

/// Kahn order of the support, or empty when cyclic.
std::vector<int> topological_order(const Adjacency &adj);

/// Support of |w| > omega. With `repair`, repeatedly drops the
/// smallest-magnitude kept edge that lies on a directed cycle until acyclic.
Adjacency threshold(const Matrix &w, double omega, bool repair = false);

MetricsReport metrics(const Adjacency &pred, const BinaryDag &truth);

nlohmann::json to_json(const Adjacency &adj);
Adjacency adjacency_from_json(const nlohmann::json &j);
nlohmann::json to_json(const MetricsReport &m);

} // namespace graphs
} // namespace dicd

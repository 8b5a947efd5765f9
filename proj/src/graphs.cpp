#include "dicd/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dicd::graphs {

namespace {

std::vector<int> random_permutation(int d, Rng &rng) {
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

// reach(i, j) = 1 when j is reachable from i by a path of length >= 1.
Adjacency transitive_closure(const Adjacency &adj) {
    const auto d = adj.rows();
    Adjacency reach = (adj.array() != 0).cast<int>();
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index i = 0; i < d; ++i)
            if (reach(i, k))
                for (Eigen::Index j = 0; j < d; ++j)
                    if (reach(k, j)) reach(i, j) = 1;
    return reach;
}

} // namespace

BinaryDag::BinaryDag(int d) : adj_(Adjacency::Zero(d, d)) {}

BinaryDag::BinaryDag(Adjacency adj) : adj_(std::move(adj)) {
    if (adj_.rows() != adj_.cols()) throw std::invalid_argument("BinaryDag: adjacency must be square");
    if (((adj_.array() != 0) && (adj_.array() != 1)).any())
        throw std::invalid_argument("BinaryDag: entries must be 0 or 1");
    if (!is_acyclic(adj_)) throw std::invalid_argument("BinaryDag: graph has a cycle");
}

std::vector<int> BinaryDag::parents(int node) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (adj_(i, node)) out.push_back(i);
    return out;
}

std::vector<int> BinaryDag::topological_order() const { return graphs::topological_order(adj_); }

BinaryDag gen_er_dag(int d, int edges, Rng &rng) {
    if (d < 0) throw std::invalid_argument("gen_er_dag: negative node count");
    const long max_edges = static_cast<long>(d) * (d - 1) / 2;
    if (edges < 0 || edges > max_edges)
        throw std::invalid_argument("gen_er_dag: edge count " + std::to_string(edges) + " outside [0, " +
                                    std::to_string(max_edges) + "]");
    std::vector<std::pair<int, int>> slots;
    slots.reserve(max_edges);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) slots.emplace_back(i, j);
    // Partial Fisher-Yates: the first `edges` slots are a uniform subset.
    for (int k = 0; k < edges; ++k) {
        std::uniform_int_distribution<long> pick(k, max_edges - 1);
        std::swap(slots[k], slots[pick(rng)]);
    }
    const auto perm = random_permutation(d, rng);
    Adjacency adj = Adjacency::Zero(d, d);
    for (int k = 0; k < edges; ++k) adj(perm[slots[k].first], perm[slots[k].second]) = 1;
    return BinaryDag(std::move(adj));
}

BinaryDag gen_sf_dag(int d, int k, Rng &rng) {
    if (k < 1 || k >= d)
        throw std::invalid_argument("gen_sf_dag: attachment degree must satisfy 1 <= k < d");
    Adjacency adj = Adjacency::Zero(d, d);
    std::vector<double> degree(d, 0.0);
    for (int t = 1; t < d; ++t) {
        const int take = std::min(k, t);
        std::vector<int> chosen;
        std::vector<double> weight(degree.begin(), degree.begin() + t);
        for (auto &w : weight) w += 1.0;
        for (int c = 0; c < take; ++c) {
            std::discrete_distribution<int> pick(weight.begin(), weight.end());
            const int s = pick(rng);
            chosen.push_back(s);
            weight[s] = 0.0;
        }
        for (int s : chosen) {
            adj(s, t) = 1;
            degree[s] += 1.0;
            degree[t] += 1.0;
        }
    }
    const auto perm = random_permutation(d, rng);
    Adjacency relabeled = Adjacency::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) relabeled(perm[i], perm[j]) = adj(i, j);
    return BinaryDag(std::move(relabeled));
}

std::vector<int> topological_order(const Adjacency &adj) {
    const int d = static_cast<int>(adj.rows());
    std::vector<int> indegree(d, 0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (adj(i, j) != 0) ++indegree[j];
    std::vector<int> ready, order;
    for (int j = 0; j < d; ++j)
        if (indegree[j] == 0) ready.push_back(j);
    while (!ready.empty()) {
        const int u = ready.back();
        ready.pop_back();
        order.push_back(u);
        for (int v = 0; v < d; ++v)
            if (adj(u, v) != 0 && --indegree[v] == 0) ready.push_back(v);
    }
    if (static_cast<int>(order.size()) != d) return {};
    return order;
}

bool is_acyclic(const Adjacency &adj) {
    return adj.rows() == 0 || !topological_order(adj).empty();
}

bool is_acyclic(const Matrix &w) { return is_acyclic(Adjacency((w.array() != 0.0).cast<int>())); }

Adjacency threshold(const Matrix &w, double omega, bool repair) {
    if (omega < 0.0) throw std::invalid_argument("threshold: omega must be nonnegative");
    Adjacency adj = (w.array().abs() > omega).cast<int>();
    if (!repair) return adj;
    while (true) {
        const Adjacency reach = transitive_closure(adj);
        int best_from = -1, best_to = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < adj.rows(); ++i)
            for (int j = 0; j < adj.cols(); ++j)
                if (adj(i, j) && reach(j, i) && std::abs(w(i, j)) < best) {
                    best = std::abs(w(i, j));
                    best_from = i;
                    best_to = j;
                }
        if (best_from < 0) break;
        adj(best_from, best_to) = 0;
    }
    return adj;
}

MetricsReport metrics(const Adjacency &pred, const BinaryDag &truth) {
    const int d = truth.size();
    if (pred.rows() != d || pred.cols() != d)
        throw std::invalid_argument("metrics: prediction is " + std::to_string(pred.rows()) + "x" +
                                    std::to_string(pred.cols()) + ", truth has " + std::to_string(d) +
                                    " nodes");
    const auto &t = truth.adj();
    int n_pred = 0, n_true = t.sum(), tp = 0, reversed = 0, false_pos = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (pred(i, j) == 0) continue;
            ++n_pred;
            if (t(i, j)) ++tp;
            else if (t(j, i)) ++reversed;
            else ++false_pos;
        }
    }
    // Skeleton comparison: each unordered pair contributes at most one unit.
    int shd = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const bool p_ij = pred(i, j) != 0, p_ji = pred(j, i) != 0;
            const bool t_ij = t(i, j) != 0, t_ji = t(j, i) != 0;
            if (p_ij == t_ij && p_ji == t_ji) continue;
            ++shd;
        }
    }
    MetricsReport report;
    report.nnz = n_pred;
    report.fdr = static_cast<double>(reversed + false_pos) / std::max(n_pred, 1);
    report.tpr = static_cast<double>(tp) / std::max(n_true, 1);
    report.shd = shd;
    return report;
}

nlohmann::json to_json(const Adjacency &adj) {
    auto rows = nlohmann::json::array();
    for (int i = 0; i < adj.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (int j = 0; j < adj.cols(); ++j) row.push_back(adj(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Adjacency adjacency_from_json(const nlohmann::json &j) {
    const auto d = static_cast<int>(j.size());
    Adjacency adj(d, d);
    for (int r = 0; r < d; ++r) {
        if (j[r].size() != static_cast<std::size_t>(d))
            throw std::invalid_argument("adjacency JSON is not square");
        for (int c = 0; c < d; ++c) adj(r, c) = j[r][c].get<int>();
    }
    return adj;
}

nlohmann::json to_json(const MetricsReport &m) {
    return {{"fdr", m.fdr}, {"tpr", m.tpr}, {"shd", m.shd}, {"nnz", m.nnz}};
}

} // namespace dicd::graphs

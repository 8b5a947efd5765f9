#pragma once

#include <array>
#include <string>
#include <vector>

#include "dicd/linear.hpp"

namespace dicd::toy {

struct Edge {
    int from;
    int to;
};

struct Expected {
    double loss;
    std::array<double, 3> coefficients;
};

/// Candidate structure of a toy SEM. `reported` lists the three node pairs
/// whose fitted coefficient (in whichever direction the edge points) is
/// compared; `expected` has one entry per environment.
struct Structure {
    std::string label;
    std::vector<Edge> edges;
    std::array<Edge, 3> reported;
    std::vector<Expected> expected;
    bool ground_truth = false;
};

struct ToyCase {
    std::string name;
    std::vector<std::string> node_names;
    Matrix weights;                       ///< weights(i, j): coefficient of node i in node j
    std::vector<Vector> noise_variances;  ///< per environment
    std::vector<Structure> structures;
};

/// Five-node example (X, A, B, C, Y) over three environments.
ToyCase shortcut_case();
/// Three-node confounder example (A, B, C) over two environments.
ToyCase confounder_case();

/// Covariance of X = X W + z with independent z of the given variances.
Matrix sem_covariance(const Matrix &weights, const Vector &noise_variances);

graphs::Adjacency structure_mask(const Structure &s, int d);

struct ToyRow {
    std::string structure;
    int env = 0;
    double loss = 0.0;
    std::array<double, 3> coefficients{};
    Expected expected{};
    double max_abs_error = 0.0;
    bool pass = false;
};

struct ToyReport {
    std::string name;
    std::vector<ToyRow> rows;
    bool all_pass() const;
};

/// Exact population least squares for every structure and environment; the
/// loss is the sum of per-node residual variances.
ToyReport run_toy(const ToyCase &c, double tol = 0.02);

nlohmann::json to_json(const ToyReport &r);

} // namespace dicd::toy

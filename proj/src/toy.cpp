#include "dicd/toy.hpp"

#include <algorithm>
#include <cmath>

namespace dicd::toy {

namespace {

Vector variances(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

} // namespace

ToyCase shortcut_case() {
    enum { X, A, B, C, Y };
    ToyCase c;
    c.name = "shortcut";
    c.node_names = {"X", "A", "B", "C", "Y"};
    c.weights = Matrix::Zero(5, 5);
    c.weights(X, A) = 1.0;
    c.weights(X, B) = 1.0;
    c.weights(X, C) = 0.5;
    c.weights(A, Y) = 0.25;
    c.weights(Y, B) = 0.5;
    for (double v : {1.0, 2.0, 4.0}) c.noise_variances.push_back(variances({1.0, 1.0, v, v, 1.0}));

    const std::vector<Edge> common{{X, A}, {X, B}, {X, C}};
    const std::array<Edge, 3> pairs{Edge{Y, A}, Edge{Y, B}, Edge{Y, C}};
    auto add = [&](std::string label, std::vector<Edge> extra, std::vector<Expected> expected, bool truth = false) {
        Structure s;
        s.label = std::move(label);
        s.edges = common;
        s.edges.insert(s.edges.end(), extra.begin(), extra.end());
        s.reported = pairs;
        s.expected = std::move(expected);
        s.ground_truth = truth;
        c.structures.push_back(std::move(s));
    };
    add("truth: A->Y, Y->B", {{A, Y}, {Y, B}},
        {{5.00, {0.25, 0.50, 0.00}}, {7.00, {0.25, 0.50, 0.00}}, {11.00, {0.25, 0.50, 0.00}}}, true);
    add("Y->A, B->Y, C->Y", {{Y, A}, {B, Y}, {C, Y}},
        {{4.57, {0.24, 1.14, -1.32}}, {6.59, {0.24, 1.09, -1.19}}, {10.60, {0.24, 1.07, -1.12}}});
    add("B->Y, Y->A, Y->C", {{B, Y}, {Y, A}, {Y, C}},
        {{5.07, {0.24, 0.32, 0.00}}, {7.14, {0.24, 0.23, 0.00}}, {11.21, {0.24, 0.15, 0.00}}});
    add("Y->A, Y->B, Y->C", {{Y, A}, {Y, B}, {Y, C}},
        {{5.07, {0.24, 0.50, 0.00}}, {7.07, {0.24, 0.50, 0.00}}, {11.07, {0.24, 0.50, 0.00}}});
    add("Y->A, Y->B, C->Y", {{Y, A}, {Y, B}, {C, Y}},
        {{5.05, {0.24, 0.50, 0.10}}, {7.06, {0.24, 0.50, 0.06}}, {11.06, {0.24, 0.50, 0.03}}});
    add("A->Y, B->Y, C->Y", {{A, Y}, {B, Y}, {C, Y}},
        {{4.57, {-0.23, 1.38, -1.54}}, {6.59, {-0.24, 1.36, -1.44}}, {10.59, {-0.24, 1.35, -1.39}}});
    add("A->Y, B->Y, Y->C", {{A, Y}, {B, Y}, {Y, C}},
        {{5.12, {0.07, 0.29, 0.00}}, {7.17, {0.14, 0.18, 0.00}}, {11.21, {0.18, 0.11, 0.00}}});
    return c;
}

ToyCase confounder_case() {
    enum { A, B, C };
    ToyCase c;
    c.name = "confounder";
    c.node_names = {"A", "B", "C"};
    c.weights = Matrix::Zero(3, 3);
    c.weights(A, B) = 0.5;
    c.weights(A, C) = 1.0;
    c.weights(B, C) = 0.5;
    // Only z_B changes between the two environments.
    c.noise_variances.push_back(variances({4.0, 1.0, 1.0}));
    c.noise_variances.push_back(variances({4.0, 4.0, 1.0}));

    const std::array<Edge, 3> pairs{Edge{A, B}, Edge{A, C}, Edge{B, C}};
    auto add = [&](std::string label, std::vector<Edge> edges, std::array<Edge, 3> reported,
                   std::vector<Expected> expected, bool truth = false) {
        c.structures.push_back({std::move(label), std::move(edges), reported, std::move(expected), truth});
    };
    add("truth: A->B, A->C, B->C", {{A, B}, {A, C}, {B, C}}, {Edge{A, C}, Edge{A, B}, Edge{B, C}},
        {{6.00, {1.00, 0.50, 0.50}}, {9.00, {1.00, 0.50, 0.50}}}, true);
    add("A->B, A->C, C->B", {{A, B}, {A, C}, {C, B}}, pairs,
        {{6.05, {0.00, 1.25, 0.40}}, {8.00, {-0.75, 1.25, 1.00}}});
    add("A->B, C->A, C->B", {{A, B}, {C, A}, {C, B}}, pairs,
        {{8.97, {0.00, 0.67, 0.40}}, {11.22, {-0.75, 0.61, 1.00}}});
    add("B->A, C->A, B->C", {{B, A}, {C, A}, {B, C}}, pairs,
        {{5.67, {0.00, 0.67, 1.50}}, {9.96, {-0.29, 0.76, 0.90}}});
    add("B->A, C->A, C->B", {{B, A}, {C, A}, {C, B}}, pairs,
        {{8.97, {0.00, 0.67, 0.40}}, {11.56, {-0.29, 0.76, 0.55}}});
    add("B->A, A->C, B->C", {{B, A}, {A, C}, {B, C}}, pairs,
        {{5.00, {1.00, 1.00, 0.50}}, {9.20, {0.40, 1.00, 0.50}}});
    return c;
}

Matrix sem_covariance(const Matrix &weights, const Vector &noise_variances) {
    // Row-sample convention: x = x W + z  =>  x = z (I - W)^{-1}.
    const auto d = weights.rows();
    const Matrix inv = (Matrix::Identity(d, d) - weights).inverse();
    return inv.transpose() * noise_variances.asDiagonal() * inv;
}

graphs::Adjacency structure_mask(const Structure &s, int d) {
    graphs::Adjacency mask = graphs::Adjacency::Zero(d, d);
    for (auto e : s.edges) mask(e.from, e.to) = 1;
    return mask;
}

bool ToyReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ToyRow &r) { return r.pass; });
}

ToyReport run_toy(const ToyCase &c, double tol) {
    ToyReport report;
    report.name = c.name;
    const auto d = static_cast<int>(c.weights.rows());
    for (const auto &s : c.structures) {
        const auto mask = structure_mask(s, d);
        for (std::size_t e = 0; e < c.noise_variances.size(); ++e) {
            const auto ols = linear::population_ols(sem_covariance(c.weights, c.noise_variances[e]), mask);
            ToyRow row;
            row.structure = s.label;
            row.env = static_cast<int>(e);
            row.loss = ols.total();
            row.expected = s.expected.at(e);
            row.max_abs_error = std::abs(row.loss - row.expected.loss);
            for (int k = 0; k < 3; ++k) {
                const auto [u, v] = s.reported[k];
                row.coefficients[k] = ols.coefficients(u, v) + ols.coefficients(v, u);
                row.max_abs_error =
                    std::max(row.max_abs_error, std::abs(row.coefficients[k] - row.expected.coefficients[k]));
            }
            row.pass = row.max_abs_error <= tol;
            report.rows.push_back(row);
        }
    }
    return report;
}

nlohmann::json to_json(const ToyReport &r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &row : r.rows) {
        rows.push_back({{"structure", row.structure},
                        {"env", row.env},
                        {"loss", row.loss},
                        {"coefficients", row.coefficients},
                        {"expected_loss", row.expected.loss},
                        {"expected_coefficients", row.expected.coefficients},
                        {"max_abs_error", row.max_abs_error},
                        {"pass", row.pass}});
    }
    return {{"name", r.name}, {"all_pass", r.all_pass()}, {"rows", rows}};
}

} // namespace dicd::toy

#pragma once

#include <cmath>
#include <functional>

#include "dicd/graphs.hpp"

namespace testutil {

using dicd::Matrix;

// Central finite-difference gradient of f at x.
inline Matrix numeric_gradient(const std::function<double(const Matrix &)> &f, Matrix x, double step = 1e-5) {
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double keep = x(r, c);
            x(r, c) = keep + step;
            const double up = f(x);
            x(r, c) = keep - step;
            const double down = f(x);
            x(r, c) = keep;
            g(r, c) = (up - down) / (2.0 * step);
        }
    return g;
}

inline double rel_error(const Matrix &a, const Matrix &b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

inline Matrix random_matrix(int rows, int cols, dicd::Rng &rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

// Acyclicity oracle independent of Kahn's algorithm: the boolean support is
// acyclic iff its d-th power vanishes.
inline bool nilpotent_support(const dicd::graphs::Adjacency &adj) {
    const auto d = adj.rows();
    Matrix a = adj.cast<double>();
    Matrix p = Matrix::Identity(d, d);
    for (Eigen::Index k = 0; k < d; ++k) p = (p * a).unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
    return p.isZero();
}

} // namespace testutil

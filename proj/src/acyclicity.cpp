#include "dicd/acyclicity.hpp"

#include <cmath>
#include <stdexcept>

namespace dicd {

Matrix expm(const Matrix &a, double tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
    const auto d = a.rows();
    if (d == 0) return a;
    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Matrix scaled = a / std::ldexp(1.0, squarings);
    const double scaled_norm = norm / std::ldexp(1.0, squarings);

    // Error of exp(B) after squaring s times grows roughly by 2^s, so the
    // series is truncated against a correspondingly tighter target.
    const double target = tol / std::ldexp(1.0, squarings);
    Matrix result = Matrix::Identity(d, d);
    Matrix term = Matrix::Identity(d, d);
    double term_bound = 1.0;
    for (int k = 1; k < 64; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
        term_bound *= scaled_norm / k;
        // Remainder after term k is bounded by a geometric tail.
        const double tail = term_bound * scaled_norm / (k + 1) / (1.0 - scaled_norm / (k + 2));
        if (tail < target) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

AcyclicityValue acyclicity_h(const Matrix &w) {
    const Matrix e = expm(w.cwiseProduct(w));
    AcyclicityValue out;
    out.value = e.trace() - static_cast<double>(w.rows());
    out.gradient = e.transpose().cwiseProduct(2.0 * w);
    return out;
}

} // namespace dicd

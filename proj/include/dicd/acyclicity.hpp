#pragma once

#include "dicd/graphs.hpp"

namespace dicd {

/// Matrix exponential by scaling and squaring over a truncated Taylor
/// series. The scaled argument has 1-norm <= 1/2 and the series is cut once
/// the tail bound drops below `tol`.
Matrix expm(const Matrix &a, double tol = 1e-12);

struct AcyclicityValue {
    double value = 0.0;
    Matrix gradient;
};

/// h(W) = tr(exp(W o W)) - d and its gradient exp(W o W)^T o 2W.
AcyclicityValue acyclicity_h(const Matrix &w);

} // namespace dicd

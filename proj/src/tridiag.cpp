#include "degenctrl/tridiag.hpp"

#include <cmath>
#include <limits>

namespace degenctrl {

void Tridiagonal::apply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t k = 0; k < n; ++k) {
        double v = diag[k] * x[k];
        if (k > 0) v += lower[k] * x[k - 1];
        if (k + 1 < n) v += upper[k] * x[k + 1];
        y[k] = v;
    }
}

Tridiagonal Tridiagonal::transposed() const {
    const std::size_t n = size();
    Tridiagonal t(n);
    t.diag = diag;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        t.upper[k] = lower[k + 1];
        t.lower[k + 1] = upper[k];
    }
    return t;
}

Tridiagonal Tridiagonal::shifted(double alpha, double beta) const {
    Tridiagonal t(size());
    for (std::size_t k = 0; k < size(); ++k) {
        t.lower[k] = beta * lower[k];
        t.diag[k] = alpha + beta * diag[k];
        t.upper[k] = beta * upper[k];
    }
    return t;
}

bool solve_tridiagonal(const Tridiagonal& m, std::span<double> rhs, std::vector<double>& scratch) {
    const std::size_t n = m.size();
    if (n == 0) return true;
    scratch.resize(n);
    constexpr double tiny = std::numeric_limits<double>::min() * 16;
    double pivot = m.diag[0];
    if (!(std::abs(pivot) > tiny)) return false;
    rhs[0] /= pivot;
    for (std::size_t k = 1; k < n; ++k) {
        scratch[k] = m.upper[k - 1] / pivot;
        pivot = m.diag[k] - m.lower[k] * scratch[k];
        if (!(std::abs(pivot) > tiny) || !std::isfinite(pivot)) return false;
        rhs[k] = (rhs[k] - m.lower[k] * rhs[k - 1]) / pivot;
    }
    for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= scratch[k + 1] * rhs[k + 1];
    return true;
}

}  // namespace degenctrl

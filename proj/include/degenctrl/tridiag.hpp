#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace degenctrl {

// Tridiagonal matrix of order n. lower[k] multiplies x[k-1] in row k (lower[0]
// unused), upper[k] multiplies x[k+1] (upper[n-1] unused).
struct Tridiagonal {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    Tridiagonal() = default;
    explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const noexcept { return diag.size(); }

    void apply(std::span<const double> x, std::span<double> y) const;
    Tridiagonal transposed() const;

    // this <- alpha * I + beta * this
    Tridiagonal shifted(double alpha, double beta) const;
};

// Thomas algorithm without pivoting. Returns false on a zero (or tiny) pivot;
// rhs is overwritten with the solution on success.
bool solve_tridiagonal(const Tridiagonal& m, std::span<double> rhs,
                       std::vector<double>& scratch);

}  // namespace degenctrl

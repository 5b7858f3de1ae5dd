#pragma once

// Space/time grids, the discrete degenerate operators (a u_x)_x and a u_xx,
// and the weighted inner products they are symmetric in.

#include "degenctrl/coeff.hpp"
#include "degenctrl/tridiag.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace degenctrl::mesh {

using coeff::CoefficientProfile;
using coeff::Form;

struct SpaceGrid {
    std::vector<double> nodes;        // strictly increasing, nodes.front() = lo, nodes.back() = hi
    std::vector<double> half_points;  // midpoints of the cells
    std::optional<std::size_t> x0_index;
    double grading = 1.0;

    std::size_t intervals() const noexcept { return nodes.size() - 1; }
    std::size_t size() const noexcept { return nodes.size(); }
    double lo() const noexcept { return nodes.front(); }
    double hi() const noexcept { return nodes.back(); }
    double cell(std::size_t j) const { return nodes[j + 1] - nodes[j]; }
    // Length of the dual cell around node i (half cells at the ends).
    double dual(std::size_t i) const;
};

struct TimeGrid {
    double T = 1.0;
    int M = 2;

    TimeGrid() = default;
    TimeGrid(double horizon, int steps);
    double step() const noexcept { return T / M; }
    double time(int k) const noexcept { return T * k / M; }
};

// Grid on [0,1] with n cells and a node exactly at the degeneracy point of p
// (when p is degenerate): round(x0 n) cells to the left of x0 and the rest to
// the right. grading > 1 clusters the nodes at x0 through the map
// x0 -+ d (j/k)^grading.
SpaceGrid build_grid(std::size_t n, const CoefficientProfile& p, double grading = 1.0);

// Same construction on [lo, hi]; x0, when given, must lie strictly inside.
SpaceGrid build_grid_on(double lo, double hi, std::size_t n, std::optional<double> x0,
                        double grading = 1.0);

// Operator restricted to the interior nodes 1..N-1 (homogeneous Dirichlet
// conditions at both ends). Row k of the band is node k+1.
struct DiscreteOperator {
    Form form = Form::Divergence;
    SpaceGrid grid;
    Tridiagonal band;
    // Coefficients of u at the two boundary nodes in the first/last interior row.
    double left_coupling = 0.0;
    double right_coupling = 0.0;
    std::vector<double> weight;     // pointwise inner-product weight per node (size N+1)
    std::vector<double> mass;       // weight x dual-cell length per interior node
    std::vector<bool> dirichlet;    // interior rows pinned to zero
    std::vector<double> half_coef;  // a at the half points
    std::vector<double> node_coef;  // a at the nodes

    std::size_t interior() const noexcept { return band.size(); }

    // y = A u on interior rows, u given on all N+1 nodes (boundary values included).
    std::vector<double> apply_full(std::span<const double> u) const;
};

DiscreteOperator assemble_divergence_operator(const CoefficientProfile& p, const SpaceGrid& g);
DiscreteOperator assemble_nondivergence_operator(const CoefficientProfile& p, const SpaceGrid& g);
DiscreteOperator assemble_operator(const CoefficientProfile& p, const SpaceGrid& g, Form form);

enum class NormKind { L2, L2_inv_a, H1_a, H1_inv_a };

struct WeightedNorm {
    NormKind kind = NormKind::L2;
    std::vector<double> node_weights;      // trapezoid weights (size N+1), all >= 0
    std::vector<double> gradient_weights;  // per cell, c/h multiplying the jumps of u and v; empty for L2 kinds
};

WeightedNorm make_norm(NormKind kind, const CoefficientProfile& p, const SpaceGrid& g);

// Quadrature of u v (plus the gradient part for H1 kinds) over node values.
double inner_product(std::span<const double> u, std::span<const double> v, const WeightedNorm& norm);

// |<A u, v>_mass + int coef u' v'| where the second term is the trapezoid rule
// applied to nodal central differences (coef = a in divergence form, 1 in
// non-divergence form). The two quadratures agree to O(h^2) for smooth data.
double summation_by_parts_defect(std::span<const double> u, std::span<const double> v,
                                 const DiscreteOperator& op);

// Eigenvalues of M^(1/2) A M^(-1/2) over the non-Dirichlet interior nodes, ascending.
std::vector<double> dense_eigenvalues(const DiscreteOperator& op);

// max |m_i A_ij - m_j A_ji| relative to max |m_i A_ij| over the off-diagonals.
double weighted_asymmetry(const DiscreteOperator& op);

// "row col value" per line, global node indices, preceded by a header line.
void write_coo(const DiscreteOperator& op, std::ostream& out);

}  // namespace degenctrl::mesh

#include "degenctrl/mesh.hpp"

#include "degenctrl/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace degenctrl::mesh {

double SpaceGrid::dual(std::size_t i) const {
    const std::size_t n = intervals();
    if (i == 0) return 0.5 * cell(0);
    if (i == n) return 0.5 * cell(n - 1);
    return 0.5 * (cell(i - 1) + cell(i));
}

TimeGrid::TimeGrid(double horizon, int steps) : T(horizon), M(steps) {
    if (!(horizon > 0.0)) throw PreconditionError("time grid: T must be positive");
    if (steps < 2) throw PreconditionError("time grid: at least 2 steps are required");
}

SpaceGrid build_grid_on(double lo, double hi, std::size_t n, std::optional<double> x0, double grading) {
    if (n < 8) throw PreconditionError("grid: at least 8 cells are required, got " + std::to_string(n));
    if (!(lo < hi)) throw PreconditionError("grid: empty interval");
    if (!(grading >= 1.0)) throw PreconditionError("grid: grading exponent must be >= 1");
    SpaceGrid g;
    g.grading = grading;
    g.nodes.resize(n + 1);
    if (x0 && !(*x0 > lo && *x0 < hi)) x0.reset();
    if (!x0) {
        for (std::size_t j = 0; j <= n; ++j)
            g.nodes[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n);
        g.grading = 1.0;
    } else {
        const double c = *x0;
        long k = std::lround((c - lo) / (hi - lo) * static_cast<double>(n));
        k = std::clamp<long>(k, 1, static_cast<long>(n) - 1);
        const std::size_t kl = static_cast<std::size_t>(k);
        const std::size_t kr = n - kl;
        for (std::size_t j = 0; j <= kl; ++j) {
            const double s = static_cast<double>(kl - j) / static_cast<double>(kl);
            g.nodes[j] = c - (c - lo) * std::pow(s, grading);
        }
        for (std::size_t j = 1; j <= kr; ++j) {
            const double s = static_cast<double>(j) / static_cast<double>(kr);
            g.nodes[kl + j] = c + (hi - c) * std::pow(s, grading);
        }
        g.nodes[kl] = c;
        g.x0_index = kl;
    }
    g.nodes.front() = lo;
    g.nodes.back() = hi;
    g.half_points.resize(n);
    for (std::size_t j = 0; j < n; ++j) g.half_points[j] = 0.5 * (g.nodes[j] + g.nodes[j + 1]);
    return g;
}

SpaceGrid build_grid(std::size_t n, const CoefficientProfile& p, double grading) {
    return build_grid_on(0.0, 1.0, n, p.x0(), grading);
}

namespace {

void fill_coefficients(const CoefficientProfile& p, const SpaceGrid& g, DiscreteOperator& op) {
    op.grid = g;
    op.node_coef.resize(g.size());
    op.half_coef.resize(g.intervals());
    for (std::size_t i = 0; i < g.size(); ++i) op.node_coef[i] = p(g.nodes[i]);
    if (g.x0_index && p.degenerate()) op.node_coef[*g.x0_index] = 0.0;
    for (std::size_t j = 0; j < g.intervals(); ++j) op.half_coef[j] = p(g.half_points[j]);
    const std::size_t m = g.intervals() - 1;
    op.band = Tridiagonal(m);
    op.mass.assign(m, 0.0);
    op.dirichlet.assign(m, false);
    op.weight.assign(g.size(), 1.0);
}

}  // namespace

std::vector<double> DiscreteOperator::apply_full(std::span<const double> u) const {
    const std::size_t m = interior();
    if (u.size() != m + 2) throw ShapeError("operator: expected " + std::to_string(m + 2) + " node values");
    std::vector<double> y(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (dirichlet[k]) continue;
        const double left = (k == 0) ? left_coupling : band.lower[k];
        const double right = (k + 1 == m) ? right_coupling : band.upper[k];
        y[k] = left * u[k] + band.diag[k] * u[k + 1] + right * u[k + 2];
    }
    return y;
}

DiscreteOperator assemble_divergence_operator(const CoefficientProfile& p, const SpaceGrid& g) {
    DiscreteOperator op;
    op.form = Form::Divergence;
    fill_coefficients(p, g, op);
    const std::size_t m = op.interior();
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        const double d = g.dual(i);
        const double wl = op.half_coef[i - 1] / g.cell(i - 1);
        const double wr = op.half_coef[i] / g.cell(i);
        op.band.lower[k] = (k == 0) ? 0.0 : wl / d;
        op.band.upper[k] = (k + 1 == m) ? 0.0 : wr / d;
        op.band.diag[k] = -(wl + wr) / d;
        if (k == 0) op.left_coupling = wl / d;
        if (k + 1 == m) op.right_coupling = wr / d;
        op.mass[k] = d;
    }
    return op;
}

DiscreteOperator assemble_nondivergence_operator(const CoefficientProfile& p, const SpaceGrid& g) {
    DiscreteOperator op;
    op.form = Form::NonDivergence;
    fill_coefficients(p, g, op);
    const std::size_t m = op.interior();
    std::optional<std::size_t> ix0;
    if (p.degenerate()) ix0 = g.x0_index;
    const bool strong = p.kind() == coeff::Kind::StronglyDegenerate;

    for (std::size_t i = 0; i < g.size(); ++i)
        op.weight[i] = op.node_coef[i] > 0.0 ? 1.0 / op.node_coef[i] : 0.0;

    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        const double d = g.dual(i);
        double ai = op.node_coef[i];
        if (ix0 && i == *ix0) {
            if (strong) {
                op.dirichlet[k] = true;
                op.weight[i] = 0.0;
                continue;
            }
            // 1/a is integrable: use its average over the dual cell.
            const double integral =
                p.integral_of_inverse_power(g.nodes[i] - 0.5 * g.cell(i - 1), g.nodes[i] + 0.5 * g.cell(i), 1.0);
            ai = d / integral;
            op.weight[i] = integral / d;
        }
        const double wl = ai / g.cell(i - 1);
        const double wr = ai / g.cell(i);
        op.band.lower[k] = (k == 0) ? 0.0 : wl / d;
        op.band.upper[k] = (k + 1 == m) ? 0.0 : wr / d;
        op.band.diag[k] = -(wl + wr) / d;
        if (k == 0) op.left_coupling = wl / d;
        if (k + 1 == m) op.right_coupling = wr / d;
        op.mass[k] = d / ai;
    }
    if (ix0 && strong && *ix0 >= 1 && *ix0 <= m) {
        const std::size_t k = *ix0 - 1;
        if (k > 0) op.band.upper[k - 1] = 0.0;
        if (k + 1 < m) op.band.lower[k + 1] = 0.0;
    }
    return op;
}

DiscreteOperator assemble_operator(const CoefficientProfile& p, const SpaceGrid& g, Form form) {
    return form == Form::Divergence ? assemble_divergence_operator(p, g)
                                    : assemble_nondivergence_operator(p, g);
}

WeightedNorm make_norm(NormKind kind, const CoefficientProfile& p, const SpaceGrid& g) {
    WeightedNorm w;
    w.kind = kind;
    w.node_weights.resize(g.size());
    const bool inv_a = kind == NormKind::L2_inv_a || kind == NormKind::H1_inv_a;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double wi = g.dual(i);
        if (inv_a) {
            const bool at_x0 = p.degenerate() && g.x0_index && *g.x0_index == i;
            const double a = p(g.nodes[i]);
            wi = (at_x0 || !(a > 0.0)) ? 0.0 : wi / a;
        }
        w.node_weights[i] = wi;
    }
    if (kind == NormKind::H1_a || kind == NormKind::H1_inv_a) {
        w.gradient_weights.resize(g.intervals());
        for (std::size_t j = 0; j < g.intervals(); ++j)
            w.gradient_weights[j] = (kind == NormKind::H1_a ? p(g.half_points[j]) : 1.0) / g.cell(j);
    }
    return w;
}

double inner_product(std::span<const double> u, std::span<const double> v, const WeightedNorm& norm) {
    const std::size_t n = norm.node_weights.size();
    if (u.size() != n || v.size() != n)
        throw ShapeError("inner_product: expected " + std::to_string(n) + " node values");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += norm.node_weights[i] * u[i] * v[i];
    if (!norm.gradient_weights.empty()) {
        for (std::size_t j = 0; j + 1 < n; ++j)
            s += norm.gradient_weights[j] * (u[j + 1] - u[j]) * (v[j + 1] - v[j]);
    }
    return s;
}

double summation_by_parts_defect(std::span<const double> u, std::span<const double> v,
                                 const DiscreteOperator& op) {
    const auto& g = op.grid;
    const std::size_t n = g.size();
    if (u.size() != n || v.size() != n) throw ShapeError("summation_by_parts_defect: size mismatch");
    const auto au = op.apply_full(u);
    double lhs = 0.0;
    for (std::size_t k = 0; k < au.size(); ++k) lhs += op.mass[k] * au[k] * v[k + 1];

    auto nodal_derivative = [&](std::span<const double> f, std::size_t i) {
        if (i == 0) return (f[1] - f[0]) / g.cell(0);
        if (i + 1 == n) return (f[n - 1] - f[n - 2]) / g.cell(n - 2);
        return (f[i + 1] - f[i - 1]) / (g.nodes[i + 1] - g.nodes[i - 1]);
    };
    double grad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = op.form == Form::Divergence ? op.node_coef[i] : 1.0;
        grad += g.dual(i) * c * nodal_derivative(u, i) * nodal_derivative(v, i);
    }
    return std::abs(lhs + grad);
}

std::vector<double> dense_eigenvalues(const DiscreteOperator& op) {
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < op.interior(); ++k)
        if (!op.dirichlet[k]) active.push_back(k);
    const std::size_t m = active.size();
    if (m > 4000) throw PreconditionError("dense_eigenvalues: operator too large for a dense solve");
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t k = active[r];
        S(r, r) = op.band.diag[k];
        if (r + 1 < m && active[r + 1] == k + 1) {
            const double mk = op.mass[k], ml = op.mass[k + 1];
            S(r, r + 1) = std::sqrt(mk / ml) * op.band.upper[k];
            S(r + 1, r) = std::sqrt(ml / mk) * op.band.lower[k + 1];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::vector<double>(ev.data(), ev.data() + ev.size());
}

double weighted_asymmetry(const DiscreteOperator& op) {
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k + 1 < op.interior(); ++k) {
        const double up = op.mass[k] * op.band.upper[k];
        const double lo = op.mass[k + 1] * op.band.lower[k + 1];
        worst = std::max(worst, std::abs(up - lo));
        scale = std::max({scale, std::abs(up), std::abs(lo)});
    }
    return scale > 0.0 ? worst / scale : 0.0;
}

void write_coo(const DiscreteOperator& op, std::ostream& out) {
    out << "row col value\n";
    char buf[96];
    auto emit = [&](std::size_t r, std::size_t c, double v) {
        if (v == 0.0) return;
        std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", r, c, v);
        out << buf;
    };
    const std::size_t m = op.interior();
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        if (k > 0) emit(i, i - 1, op.band.lower[k]);
        emit(i, i, op.band.diag[k]);
        if (k + 1 < m) emit(i, i + 1, op.band.upper[k]);
    }
}

}  // namespace degenctrl::mesh

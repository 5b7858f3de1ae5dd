#pragma once

// Time stepping of u_t = A u - c u - b u_x + h chi_omega and of the discrete
// adjoint, plus discrete versions of the well-posedness estimates.

#include "degenctrl/coeff.hpp"
#include "degenctrl/mesh.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace degenctrl::pde {

using coeff::CoefficientProfile;
using coeff::Form;
using coeff::Interval;
using mesh::SpaceGrid;
using mesh::TimeGrid;

using SpaceTimeFn = std::function<double(double t, double x)>;

// (M+1) x (N+1) array, row k = time level k. Boundary columns stay zero.
struct Field {
    std::size_t steps = 0;  // M
    std::size_t nodes = 0;  // N+1
    std::vector<double> values;
    Form form = Form::Divergence;
    double T = 1.0;

    Field() = default;
    Field(std::size_t M, std::size_t n_nodes, Form f, double horizon);

    std::span<double> row(std::size_t k) { return {values.data() + k * nodes, nodes}; }
    std::span<const double> row(std::size_t k) const { return {values.data() + k * nodes, nodes}; }
    double& at(std::size_t k, std::size_t i) { return values[k * nodes + i]; }
    double at(std::size_t k, std::size_t i) const { return values[k * nodes + i]; }
    double max_abs() const;
};

struct ProblemSpec {
    CoefficientProfile profile;
    Form form = Form::Divergence;
    SpaceTimeFn c;  // reaction, optional
    SpaceTimeFn b;  // advection, optional
    std::vector<Interval> omega;
    double theta = 1.0;
    std::function<double(double)> u0;  // optional data for the free functions below
    std::function<double(double)> vT;
    SpaceTimeFn h;

    void validate() const;
};

// Nodal: the step n -> n+1 uses theta h^{n+1} + (1-theta) h^n.
// StepWise: the step n -> n+1 uses h^{n+1} (the convention of the control module).
enum class SourceTiming { Nodal, StepWise };

struct AdjointSolution {
    Field v;  // v^0 .. v^M, v^M = vT
    Field z;  // stage values z^n = B_n^{-*} v^{n+1}, rows 0..M-1 (row M zero)
};

class Solver {
public:
    Solver(ProblemSpec spec, SpaceGrid grid, TimeGrid tgrid);

    const ProblemSpec& spec() const noexcept { return spec_; }
    const SpaceGrid& grid() const noexcept { return op_.grid; }
    const TimeGrid& time_grid() const noexcept { return tgrid_; }
    const mesh::DiscreteOperator& op() const noexcept { return op_; }
    // Interior-node mass (0 on pinned rows) used by all inner products.
    const std::vector<double>& mass() const noexcept { return op_.mass; }
    // 1 at nodes strictly inside omega, 0 elsewhere (all N+1 nodes).
    const std::vector<double>& control_mask() const noexcept { return mask_; }
    // Nodes forced to zero: boundary nodes and pinned interior rows.
    bool pinned(std::size_t node) const;

    Field forward(std::span<const double> u0, const Field* h = nullptr,
                  SourceTiming timing = SourceTiming::Nodal) const;
    AdjointSolution adjoint(std::span<const double> vT) const;

    // <f, g> with the interior mass (natural inner product of the form).
    double inner(std::span<const double> f, std::span<const double> g) const;
    double norm(std::span<const double> f) const;

    // Nodal samples of a function with pinned nodes set to zero.
    std::vector<double> sample(const std::function<double(double)>& f) const;

    // Source that makes (u_n, u_next) one step of the scheme from level n:
    // (B_n u_next - C_n u_n) / dt on free nodes, 0 on pinned nodes.
    std::vector<double> step_residual(std::size_t n, std::span<const double> u_n,
                                      std::span<const double> u_next) const;

    // Largest |b(t,x)| / sqrt(a(x)) over nodes and time levels (inf if b != 0 where a = 0).
    double advection_bound() const;

private:
    Tridiagonal generator(std::size_t level) const;  // L(t_level)

    ProblemSpec spec_;
    TimeGrid tgrid_;
    mesh::DiscreteOperator op_;
    std::vector<double> mask_;
    bool time_dependent_ = false;
    // I - theta dt L and I + (1-theta) dt L per time level (one entry when time independent)
    std::vector<Tridiagonal> implicit_;
    std::vector<Tridiagonal> explicit_;
};

Field solve_forward(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid);
Field solve_adjoint(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid);

struct EnergyReport {
    double sup_norm_sq = 0.0;        // sup_t ||u(t)||^2
    double integrated_h1 = 0.0;      // int_0^T ||u||^2 + ||sqrt(a) u_x||^2 (or the 1/a analogue)
    double rhs = 0.0;                // ||u0||^2 + ||h||^2
    double lhs = 0.0;
    std::optional<double> constant;  // lhs / rhs; empty for 0/0, +inf for x/0
};

EnergyReport energy_estimate_check(const Field& u, const Solver& solver, const Field* h = nullptr);

struct MonotonicityReport {
    bool pass = true;
    double worst_defect = 0.0;  // max_k (E(t_k) - E(t_{k+1}))_+
    double tolerance = 0.0;     // 1e-8 E(T)
    std::vector<double> energy;
};

// E(t) = sum a_{j+1/2} (D v)^2 h_j in divergence form, sum (D v)^2 h_j in
// non-divergence form; must be nondecreasing in time for the homogeneous adjoint.
MonotonicityReport gradient_monotonicity_check(const Field& v, const mesh::DiscreteOperator& op);

// One row per time level: t,u_0,...,u_N.
void write_field_csv(const Field& f, std::ostream& out, int precision = 6);
// "DGF1", uint64 rows, uint64 cols, row-major little-endian doubles.
void write_field_binary(const Field& f, std::ostream& out);
Field read_field_binary(std::istream& in);

// sum_{k=1}^{terms} xi_k sin(k pi x), xi_k uniform in [-1, 1] drawn from a
// 64-bit Mersenne twister seeded with `seed`.
std::vector<double> random_sine_series(const SpaceGrid& grid, std::uint64_t seed, int terms = 8);

}  // namespace degenctrl::pde

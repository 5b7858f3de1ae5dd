#pragma once

// Observability constants of the discrete adjoint problem and null controls
// by penalized HUM, plus the cutoff (regional) and semilinear variants.
//
// Notation, all inner products in the solver mass (1/a-weighted in
// non-divergence form):
//   O vT = (chi_omega z^n)_n     observation of the adjoint stages
//   S vT = v^0                   adjoint value at t = 0
//   G = O*O                      Gramian; O* h is the final state reached from 0 with source h
// The control for u0 is h^{n+1} = chi_omega z^n with vT solving
// (G + eps) vT = -S* u0, and then u(T) = -eps vT.

#include "degenctrl/pde.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace degenctrl::control {

using pde::Field;
using pde::ProblemSpec;
using pde::Solver;
using mesh::SpaceGrid;
using mesh::TimeGrid;

struct CgOptions {
    double tol = 1e-10;  // relative residual
    int max_iters = 2000;
};

struct PowerOptions {
    double tol = 1e-6;  // relative change of the Rayleigh quotient
    int max_iters = 500;
    std::uint64_t seed = 1;
    CgOptions cg{1e-14, 4000};
};

struct ObservabilityReport {
    double C_T = 0.0;
    std::string method;  // "power-iteration" or "dense-svd"
    std::vector<double> trace;
    std::size_t nodes = 0;
    int steps = 0;
    double T = 0.0;
    std::optional<double> epsilon;
    int iterations = 0;
    bool converged = true;
};

// Largest ratio ||v(0)||^2 / int_0^T int_omega v^2 over final data, by power
// iteration on G^{-1} S*S with an inner conjugate gradient solve.
// Throws ConvergenceError (carrying the last quotient) after max_iters.
ObservabilityReport estimate_observability_constant(const ProblemSpec& spec, const SpaceGrid& grid,
                                                    const TimeGrid& tgrid, PowerOptions options = {});

// Same constant from the modal form of the scheme: with the M-orthonormal
// eigenvectors of the generator, O is assembled column by column in closed form,
// S = diag(r_k^M), and C_T = ||S R^{-1}||^2 after a QR of O. Needs a generator
// without reaction or advection (PreconditionError otherwise).
ObservabilityReport dense_observability_constant(const ProblemSpec& spec, const SpaceGrid& grid,
                                                 const TimeGrid& tgrid, std::size_t max_intervals = 60);

struct ControlResult {
    Field h;  // row n+1 holds the source of step n; zero outside omega
    Field u;  // controlled state
    std::vector<double> vT;
    double final_residual = 0.0;  // ||u(T)||
    double initial_norm = 0.0;    // ||u0||
    double cost = 0.0;            // dt sum ||h^{n+1}||^2
    double epsilon = 0.0;
    double cost_bound_constant = 0.0;  // cost / ||u0||^2
    double duality_defect = 0.0;       // relative
    int cg_iterations = 0;
    bool converged = true;
    std::vector<double> cg_trace;  // relative residuals
    std::vector<std::string> warnings;
};

// Penalized HUM. epsilon defaults to 1e-6 ||u0||^2. Stagnation or max_iters
// returns the best iterate with converged = false.
ControlResult hum_null_control(const Solver& solver, const std::vector<double>& u0,
                               std::optional<double> epsilon = {}, CgOptions cg = {});
ControlResult hum_null_control(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid,
                               std::optional<double> epsilon = {}, CgOptions cg = {});

// HUM for omega = omega_1 u omega_2; warns when the pieces do not straddle x0.
ControlResult two_piece_control(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid,
                                std::optional<double> epsilon = {}, CgOptions cg = {});

// Minimal-norm control with u(T) = 0 up to rounding, from the modal observation
// operator (QR). Small grids, no reaction or advection.
ControlResult exact_null_control(const Solver& solver, const std::vector<double>& u0);

struct RegionalTrace {
    double r_inner = 0.0;
    double r_outer = 0.0;
    std::size_t left_end = 0;     // last node of the left side problem
    std::size_t right_start = 0;  // first node of the right side problem
    std::size_t middle_lo = 0;
    std::size_t middle_hi = 0;
    double h_norm = 0.0;           // sqrt(dt sum ||h||^2) in the plain L2 mass
    double h_max_near_x0 = 0.0;    // max |h| over |x - x0| <= r_outer
    double dropped_outside = 0.0;  // largest |residual| zeroed outside omega
    double replay_residual = 0.0;  // ||u(T)|| when the forward solver is driven by h
    double left_residual = 0.0;
    double right_residual = 0.0;
    std::vector<double> phi0, phi1, phi2;
};

struct RegionalResult {
    ControlResult control;
    RegionalTrace trace;
};

// u = phi1 v1 + phi2 v2 + (T-t)/T phi0 v0 with v1, v2 null-controlled on
// (0, x0 - r_inner) and (x0 + r_inner, 1) and v0 free on (x0 - r_outer, x0 + r_outer).
// h is the discrete source that makes u a solution; u(T) = 0 exactly.
RegionalResult regional_control_cutoff(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid,
                                       double r_outer, double r_inner);

// C-infinity step: 0 for tau <= 0, 1 for tau >= 1.
double smooth_step(double tau);

struct Nonlinearity {
    std::function<double(double t, double x, double u)> f;
    std::function<double(double t, double x, double u)> fq;  // derivative in u
    double fq_bound = 0.0;
};

struct PicardOptions {
    double tol = 1e-8;  // relative change of the control between iterations
    int max_iters = 20;
};

struct SemilinearResult {
    ControlResult control;
    std::vector<double> increments;  // relative change of h per iteration
    std::vector<double> residuals;   // ||u(T)|| per iteration
    int iterations = 0;
    bool converged = false;
    bool diverging = false;  // residual increased three times in a row
};

// Picard iteration on c = f(u)/u for u_t - A u + f(t,x,u) = h chi_omega.
// Weakly degenerate profiles only.
SemilinearResult semilinear_null_control(const ProblemSpec& spec, const Nonlinearity& nl, const SpaceGrid& grid,
                                         const TimeGrid& tgrid, std::optional<double> epsilon = {},
                                         CgOptions cg = {}, PicardOptions picard = {});

}  // namespace degenctrl::control

#pragma once

// Carleman weights phi = Theta(t) psi(x) and discrete evaluation of the
// weighted inequalities (Carleman, Hardy-Poincare, Caccioppoli).

#include "degenctrl/coeff.hpp"
#include "degenctrl/mesh.hpp"
#include "degenctrl/pde.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace degenctrl::weights {

using coeff::CoefficientProfile;
using coeff::Form;
using coeff::Interval;
using mesh::SpaceGrid;
using mesh::TimeGrid;

// Theta(t) = 1 / [t (T - t)]^4 for 0 < t < T.
double eval_theta(double t, double T);
double log_theta(double t, double T);

// Theta(t)^power exp(2 s Theta(t) psi) computed in log space; 0 when the
// exponent falls below -700. `shift` is subtracted from the exponent first.
double clamped_weight(double t, double T, double s, double psi, double power = 1.0, double shift = 0.0);

enum class Variant { DegDiv, DegNonDiv, NonDegA1, NonDegA2 };
std::string_view to_string(Variant v);

struct CarlemanWeight {
    Variant variant = Variant::DegDiv;
    int theta_exponent = 4;
    SpaceGrid grid;
    std::vector<double> psi;       // at the nodes
    std::vector<double> psi_half;  // at the half points

    // degenerate variants: c1, c2 (d1, d2 for the non-divergence form) and R
    double c1 = 0.0;
    double c2 = 0.0;
    double c2_required = 0.0;
    double R = 0.0;
    std::optional<double> x0;
    std::vector<double> a_dpsi;  // a psi_x at the nodes, = c1 (x - x0) for DegDiv

    // non-degenerate variants
    double r = 0.0;
    double cfrak = 0.0;
    double dfrak = 0.0;
    double h0 = 0.0;
    std::vector<double> zeta;   // A2, at the nodes
    std::vector<double> zeta_half;
    std::vector<double> G;      // A1, int_x^B g at the nodes
    Interval interval{0.0, 1.0};

    bool valid = false;
    std::string certificate;  // why the weight is (not) admissible

    double psi_min() const;
    double psi_max() const;
};

// psi = c1 [ int_{x0}^x (y-x0)/a dy - c2 ] (divergence) or
// psi = d1 [ int_{x0}^x (y-x0)/a e^{R (y-x0)^2} dy - d2 ] (non-divergence),
// with c2 = (1 + margin) times the smallest admissible value.
CarlemanWeight build_degenerate_weight(const CoefficientProfile& p, const SpaceGrid& g, Form form,
                                       double c1, double margin, double R = 1.0);

// Weight of the non-degenerate estimate on pair.interval (or `interval` for A2).
CarlemanWeight build_nondegenerate_weight(const CoefficientProfile& p, const SpaceGrid& g,
                                          const coeff::NonDegeneratePair* pair, Variant variant,
                                          double r, Interval interval, double cfrak = 1.0);

// Lower bound on c1 needed to glue a degenerate weight to a non-degenerate one
// on (A, B) = (lambda, 1) (side = +1) or (0, beta) (side = -1):
// -psi_nd(end) / (c2 - required_side).
double c1_lower_bound(const CarlemanWeight& deg, const CarlemanWeight& nondeg, const CoefficientProfile& p,
                      int side);

// 16 log-spaced values over [1e-2, 1e2] s*, s* = 1 / (Theta(T/2) max |psi|).
std::vector<double> default_s_grid(const CarlemanWeight& w, double T, int points = 16);
std::vector<double> log_spaced(double lo, double hi, int points);

enum class InequalityVerdict { Pass, Fail, Indeterminate };
std::string_view to_string(InequalityVerdict v);

struct InequalityReport {
    std::string variant;
    std::vector<double> s;
    std::vector<double> lhs;  // scaled by exp(-log_scale)
    std::vector<double> rhs;
    std::vector<double> ratio;
    std::vector<double> log_scale;
    std::vector<double> boundary_left;  // boundary contributions to rhs (same scaling)
    std::vector<double> boundary_right;
    double s0 = 0.0;
    bool s0_found = false;
    double sup_ratio = 0.0;  // over s >= s0
    InequalityVerdict verdict = InequalityVerdict::Pass;
};

// Both sides of the Carleman estimate matching w.variant for the homogeneous
// adjoint solution v on the grid of w. The first and last time levels are
// skipped. s0 is the first s at which consecutive ratios differ by < 5%
// (the last s, with s0_found false, when none does).
InequalityReport carleman_ratio(const pde::Field& v, const CarlemanWeight& w, const CoefficientProfile& p,
                                const TimeGrid& tgrid, const std::vector<double>& s_grid, Form form);

// Smallest C with int p/(x-x0)^2 w^2 <= C int p (w')^2 over grid functions
// vanishing at both ends: the largest generalized eigenvalue of the two
// quadratic forms. The weight p/(x-x0)^2 is integrated exactly over each dual cell.
struct HardyResult {
    double constant = 0.0;
    bool certified = false;   // p/|x-x0|^q monotone for some q > 1 on the grid
    double min_log_quotient = 0.0;
    std::vector<double> eigenvector;  // maximizer at the nodes
};
HardyResult hardy_poincare_constant(const coeff::ScalarFn& p, double x0, const SpaceGrid& g);

// Ratio of int p/(x-x0)^2 w^2 to int p (w')^2 for a node function w.
double hardy_ratio(const coeff::ScalarFn& p, double x0, const SpaceGrid& g, const std::vector<double>& w);

// Smallest C with int v^2/a <= C int (v')^2; for strongly degenerate a the
// functions also vanish at x0.
double inverse_weight_poincare_constant(const CoefficientProfile& a, const SpaceGrid& g);

// Both sides of int_0^T int_{omega'} v_x^2 e^{2 s phi} <= C int_0^T int_omega v^2.
InequalityReport caccioppoli_check(const pde::Field& v, const CarlemanWeight& w, const TimeGrid& tgrid,
                                   Interval omega_inner, Interval omega, const std::vector<double>& s_grid,
                                   std::optional<double> x0);

// s,lhs,rhs,ratio,log_scale
void write_inequality_csv(const InequalityReport& r, std::ostream& out);

}  // namespace degenctrl::weights

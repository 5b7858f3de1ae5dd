#include "degenctrl/weights.hpp"

#include "degenctrl/error.hpp"
#include "degenctrl/kernels.hpp"
#include "degenctrl/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace degenctrl::weights {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kClamp = -700.0;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Nodes and half points interleaved: q[2i] = node i, q[2i+1] = half point i.
std::vector<double> merged_points(const SpaceGrid& g) {
    std::vector<double> q(2 * g.intervals() + 1);
    for (std::size_t i = 0; i < g.size(); ++i) q[2 * i] = g.nodes[i];
    for (std::size_t j = 0; j < g.intervals(); ++j) q[2 * j + 1] = g.half_points[j];
    return q;
}

void split_merged(const std::vector<double>& merged, std::vector<double>& nodes, std::vector<double>& half) {
    const std::size_t n = (merged.size() - 1) / 2;
    nodes.assign(n + 1, 0.0);
    half.assign(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) nodes[i] = merged[2 * i];
    for (std::size_t j = 0; j < n; ++j) half[j] = merged[2 * j + 1];
}

double exp_clamped(double e) { return e < kClamp ? 0.0 : std::exp(e); }

}  // namespace

double log_theta(double t, double T) {
    if (!(t > 0.0 && t < T)) throw DomainError("Theta: t=" + fmt(t) + " outside (0, " + fmt(T) + ")");
    return -4.0 * std::log(t * (T - t));
}

double eval_theta(double t, double T) { return std::exp(log_theta(t, T)); }

double clamped_weight(double t, double T, double s, double psi, double power, double shift) {
    const double lt = log_theta(t, T);
    return exp_clamped(power * lt + 2.0 * s * std::exp(lt) * psi - shift);
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::DegDiv: return "degenerate_divergence";
        case Variant::DegNonDiv: return "degenerate_non_divergence";
        case Variant::NonDegA1: return "non_degenerate_a1";
        case Variant::NonDegA2: return "non_degenerate_a2";
    }
    return "?";
}

std::string_view to_string(InequalityVerdict v) {
    switch (v) {
        case InequalityVerdict::Pass: return "pass";
        case InequalityVerdict::Fail: return "fail";
        case InequalityVerdict::Indeterminate: return "indeterminate";
    }
    return "?";
}

double CarlemanWeight::psi_min() const { return *std::min_element(psi.begin(), psi.end()); }
double CarlemanWeight::psi_max() const { return *std::max_element(psi.begin(), psi.end()); }

// ---------------------------------------------------------------------------

namespace {

double required_side(const CoefficientProfile& p, Form form, double R, int side) {
    const double x0 = *p.x0();
    const double d = side > 0 ? 1.0 - x0 : x0;
    const double a_end = p(side > 0 ? 1.0 : 0.0);
    double v = d * d / (a_end * (2.0 - p.K()));
    if (form == Form::NonDivergence) v *= std::exp(R * d * d);
    return v;
}

}  // namespace

CarlemanWeight build_degenerate_weight(const CoefficientProfile& p, const SpaceGrid& g, Form form, double c1,
                                       double margin, double R) {
    if (!p.degenerate()) throw DomainError("degenerate weight: the coefficient does not degenerate");
    if (!(p.K() < 2.0)) throw DomainError("degenerate weight: needs K < 2, got K=" + fmt(p.K()));
    if (!g.x0_index) throw ConfigError("degenerate weight: the grid has no node at x0");
    if (!(c1 > 0.0)) throw ConstraintError("degenerate weight: c1 must be positive");
    if (!(margin > 0.0))
        throw ConstraintError("degenerate weight: c2 must exceed its lower bound (margin=" + fmt(margin) + ")");
    if (form == Form::NonDivergence && !(R > 0.0)) throw ConstraintError("degenerate weight: R must be positive");

    CarlemanWeight w;
    w.variant = form == Form::Divergence ? Variant::DegDiv : Variant::DegNonDiv;
    w.grid = g;
    w.c1 = c1;
    w.R = form == Form::Divergence ? 0.0 : R;
    w.x0 = p.x0();
    w.c2_required = std::max(required_side(p, form, R, +1), required_side(p, form, R, -1));
    w.c2 = (1.0 + margin) * w.c2_required;

    const double x0 = *p.x0();
    const double Rw = w.R;
    const double sing = std::max(0.0, p.K() - 1.0);
    // |y| / a(x0 + y) e^{R y^2}, the integrand of psi / c1 in the offset variable
    auto integrand = [&](double y) { return std::abs(y) / p.at_offset(y) * std::exp(Rw * y * y); };

    const auto q = merged_points(g);
    const std::size_t centre = 2 * *g.x0_index;
    std::vector<double> I(q.size(), 0.0);
    for (std::size_t m = centre + 1; m < q.size(); ++m) {
        const double lo = q[m - 1] - x0, hi = q[m] - x0;
        const double seg = (m - 1 == centre)
                               ? quad::integrate_singular_at_zero(integrand, hi, sing)
                               : quad::integrate(integrand, lo, hi);
        I[m] = I[m - 1] + seg;
    }
    for (std::size_t m = centre; m-- > 0;) {
        const double lo = x0 - q[m + 1], hi = x0 - q[m];
        auto mirrored = [&](double y) { return integrand(-y); };
        const double seg = (m + 1 == centre)
                               ? quad::integrate_singular_at_zero(mirrored, hi, sing)
                               : quad::integrate(mirrored, lo, hi);
        I[m] = I[m + 1] + seg;
    }
    std::vector<double> psi(q.size());
    for (std::size_t m = 0; m < q.size(); ++m) psi[m] = c1 * (I[m] - w.c2);
    split_merged(psi, w.psi, w.psi_half);

    w.a_dpsi.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i == *g.x0_index) {
            w.a_dpsi[i] = 0.0;
            continue;
        }
        const double y = g.nodes[i] - x0;
        const double a = p(g.nodes[i]);
        const double dpsi = c1 * y / a * std::exp(Rw * y * y);
        w.a_dpsi[i] = a * dpsi;
    }

    const double lower = -c1 * w.c2;
    bool negative = true, bounded = true;
    for (double v : w.psi) {
        negative = negative && v < 0.0;
        bounded = bounded && v >= lower * (1.0 + 1e-12);
    }
    w.valid = negative && bounded;
    std::ostringstream cert;
    cert << "c2=" << w.c2 << " (required " << w.c2_required << "), max psi=" << w.psi_max()
         << ", min psi=" << w.psi_min() << ", -c1 c2=" << lower;
    if (!negative) cert << "; psi is not negative";
    if (!bounded) cert << "; psi falls below -c1 c2";
    w.certificate = cert.str();
    return w;
}

CarlemanWeight build_nondegenerate_weight(const CoefficientProfile& p, const SpaceGrid& g,
                                          const coeff::NonDegeneratePair* pair, Variant variant, double r,
                                          Interval interval, double cfrak) {
    if (variant != Variant::NonDegA1 && variant != Variant::NonDegA2)
        throw ConfigError("non-degenerate weight: variant must be A1 or A2");
    if (variant == Variant::NonDegA1) {
        if (!pair) throw ConfigError("non-degenerate weight: variant A1 needs a (g, h) pair");
        interval = pair->interval;
        if (!(cfrak > 0.0)) throw ConstraintError("non-degenerate weight: the shift must be positive");
    }
    if (!(r > 0.0)) throw ConstraintError("non-degenerate weight: r must be positive");
    if (!(interval.lo < interval.hi)) throw ConfigError("non-degenerate weight: empty interval");
    if (p.x0() && interval.contains_closed(*p.x0()))
        throw DomainError("non-degenerate weight: [" + fmt(interval.lo) + ", " + fmt(interval.hi) +
                          "] contains the degeneracy point");
    const double scale = std::max(1.0, std::abs(interval.hi));
    if (std::abs(g.lo() - interval.lo) > 1e-12 * scale || std::abs(g.hi() - interval.hi) > 1e-12 * scale)
        throw ConfigError("non-degenerate weight: the grid must span the interval");

    const auto q = merged_points(g);
    for (double x : q)
        if (!(p(x) > 0.0)) throw DomainError("non-degenerate weight: a vanishes at x=" + fmt(x));

    CarlemanWeight w;
    w.variant = variant;
    w.grid = g;
    w.r = r;
    w.interval = interval;
    std::vector<double> psi(q.size());

    if (variant == Variant::NonDegA1) {
        const auto& gf = pair->g;
        w.h0 = pair->h0;
        w.cfrak = cfrak;
        const std::size_t n = g.intervals();
        w.G.assign(n + 1, 0.0);
        for (std::size_t i = n; i-- > 0;)
            w.G[i] = w.G[i + 1] + quad::integrate([&](double t) { return gf(t); }, g.nodes[i], g.nodes[i + 1]);
        // J(x) = int_A^x (G + h0) / sqrt(a), cell by cell with G(t) = G_{j+1} + int_t^{x_{j+1}} g
        auto cell_integral = [&](std::size_t j, double lo, double hi) {
            const double right = g.nodes[j + 1];
            auto f = [&](double t) {
                const double Gt = w.G[j + 1] + quad::integrate([&](double s) { return gf(s); }, t, right, 1e-10);
                return (Gt + w.h0) / std::sqrt(p(t));
            };
            return quad::integrate(f, lo, hi, 1e-10);
        };
        double J = 0.0;
        psi[0] = -cfrak;
        for (std::size_t m = 1; m < q.size(); ++m) {
            J += cell_integral((m - 1) / 2, q[m - 1], q[m]);
            psi[m] = -r * J - cfrak;
        }
    } else {
        double dmax = 0.0;
        for (std::size_t m = 0; m + 1 < q.size(); ++m)
            dmax = std::max(dmax, std::abs(p(q[m + 1]) - p(q[m])) / (q[m + 1] - q[m]));
        w.dfrak = dmax;
        std::vector<double> zeta(q.size(), 0.0);
        for (std::size_t m = q.size() - 1; m-- > 0;)
            zeta[m] = zeta[m + 1] + dmax * p.integral_of_inverse_power(q[m], q[m + 1], 1.0);
        double emax = 0.0;
        for (double z : zeta) emax = std::max(emax, std::exp(r * z));
        w.cfrak = 1.0 + emax;
        for (std::size_t m = 0; m < q.size(); ++m) psi[m] = std::exp(r * zeta[m]) - w.cfrak;
        split_merged(zeta, w.zeta, w.zeta_half);
    }
    split_merged(psi, w.psi, w.psi_half);
    w.valid = w.psi_max() < 0.0;
    std::ostringstream cert;
    cert << "r=" << r << ", shift=" << w.cfrak << ", max psi=" << w.psi_max() << ", min psi=" << w.psi_min();
    if (!w.valid) cert << "; psi is not negative";
    w.certificate = cert.str();
    return w;
}

double c1_lower_bound(const CarlemanWeight& deg, const CarlemanWeight& nondeg, const CoefficientProfile& p,
                      int side) {
    if (deg.variant != Variant::DegDiv && deg.variant != Variant::DegNonDiv)
        throw ConfigError("c1 bound: first weight must be degenerate");
    if (nondeg.variant != Variant::NonDegA1 && nondeg.variant != Variant::NonDegA2)
        throw ConfigError("c1 bound: second weight must be non-degenerate");
    const Form form = deg.variant == Variant::DegDiv ? Form::Divergence : Form::NonDivergence;
    const double gap = deg.c2 - required_side(p, form, deg.R, side);
    if (!(gap > 0.0)) return kInf;
    return -nondeg.psi_min() / gap;
}

std::vector<double> log_spaced(double lo, double hi, int points) {
    if (!(lo > 0.0 && hi >= lo) || points < 1) throw ConfigError("s grid: need 0 < lo <= hi and points >= 1");
    std::vector<double> s(static_cast<std::size_t>(points));
    if (points == 1) {
        s[0] = lo;
        return s;
    }
    const double l0 = std::log(lo), l1 = std::log(hi);
    for (int k = 0; k < points; ++k) s[static_cast<std::size_t>(k)] = std::exp(l0 + (l1 - l0) * k / (points - 1));
    return s;
}

std::vector<double> default_s_grid(const CarlemanWeight& w, double T, int points) {
    double amax = 0.0;
    for (double v : w.psi) amax = std::max(amax, std::abs(v));
    if (!(amax > 0.0)) throw ConfigError("s grid: psi vanishes identically");
    const double star = 1.0 / (eval_theta(0.5 * T, T) * amax);
    return log_spaced(1e-2 * star, 1e2 * star, points);
}

// ---------------------------------------------------------------------------

namespace {

// One-sided second order derivative at the left (side = -1) or right end.
double end_derivative(std::span<const double> v, const SpaceGrid& g, int side) {
    const std::size_t n = g.intervals();
    if (side < 0) {
        const double h1 = g.cell(0), h2 = g.cell(1);
        return -(2 * h1 + h2) / (h1 * (h1 + h2)) * v[0] + (h1 + h2) / (h1 * h2) * v[1] -
               h1 / (h2 * (h1 + h2)) * v[2];
    }
    const double h1 = g.cell(n - 1), h2 = g.cell(n - 2);
    return (2 * h1 + h2) / (h1 * (h1 + h2)) * v[n] - (h1 + h2) / (h1 * h2) * v[n - 1] +
           h1 / (h2 * (h1 + h2)) * v[n - 2];
}

void finish_report(InequalityReport& rep) {
    const std::size_t n = rep.s.size();
    rep.s0 = n ? rep.s.back() : 0.0;
    rep.s0_found = false;
    for (std::size_t k = 1; k < n; ++k) {
        const double a = rep.ratio[k - 1], b = rep.ratio[k];
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        const double scale = std::max(std::abs(a), std::abs(b));
        if (scale == 0.0 || std::abs(b - a) < 0.05 * scale) {
            rep.s0 = rep.s[k - 1];
            rep.s0_found = true;
            break;
        }
    }
    rep.sup_ratio = 0.0;
    rep.verdict = InequalityVerdict::Pass;
    for (std::size_t k = 0; k < n; ++k) {
        if (rep.s[k] < rep.s0) continue;
        if (rep.rhs[k] < 0.0) {
            rep.verdict = InequalityVerdict::Indeterminate;
            continue;
        }
        if (!std::isfinite(rep.ratio[k])) {
            if (rep.verdict == InequalityVerdict::Pass) rep.verdict = InequalityVerdict::Fail;
            rep.sup_ratio = kInf;
            continue;
        }
        rep.sup_ratio = std::max(rep.sup_ratio, rep.ratio[k]);
    }
}

}  // namespace

InequalityReport carleman_ratio(const pde::Field& v, const CarlemanWeight& w, const CoefficientProfile& p,
                                const TimeGrid& tgrid, const std::vector<double>& s_grid, Form form) {
    const SpaceGrid& g = w.grid;
    if (v.nodes != g.size() || v.steps != static_cast<std::size_t>(tgrid.M))
        throw ShapeError("carleman_ratio: field shape does not match the grids");
    if (v.form != form) throw ConfigError("carleman_ratio: field form differs from the requested form");
    if ((w.variant == Variant::DegDiv && form != Form::Divergence) ||
        (w.variant == Variant::DegNonDiv && form != Form::NonDivergence))
        throw ConfigError("carleman_ratio: weight variant " + std::string(to_string(w.variant)) +
                          " does not match the " + std::string(coeff::to_string(form)) + " form");
    if (g.intervals() < 2) throw ShapeError("carleman_ratio: grid too small");

    const std::size_t n = g.intervals();
    const double T = tgrid.T, dt = tgrid.step();
    const double A = g.lo(), B = g.hi();

    // spatial factors of the gradient (per cell) and zero-order (per node) terms
    std::vector<double> gw(n), nw(g.size(), 0.0);
    double left = 0.0, right = 0.0;
    const bool deg = w.variant == Variant::DegDiv || w.variant == Variant::DegNonDiv;
    for (std::size_t j = 0; j < n; ++j) {
        switch (w.variant) {
            case Variant::DegDiv: gw[j] = p(g.half_points[j]); break;
            case Variant::NonDegA2: gw[j] = std::exp(w.r * w.zeta_half[j]); break;
            default: gw[j] = 1.0;
        }
    }
    for (std::size_t i = 1; i < n; ++i) {
        const double x = g.nodes[i];
        switch (w.variant) {
            case Variant::DegDiv:
            case Variant::DegNonDiv: {
                if (g.x0_index && i == *g.x0_index) break;
                const double y = x - *w.x0;
                const double a = p(x);
                nw[i] = w.variant == Variant::DegDiv ? y * y / a : (y / a) * (y / a);
                break;
            }
            case Variant::NonDegA1: nw[i] = 1.0; break;
            case Variant::NonDegA2: nw[i] = std::exp(3.0 * w.r * w.zeta[i]); break;
        }
    }
    switch (w.variant) {
        case Variant::DegDiv:
            left = w.c1 * p(A) * (*w.x0 - A);
            right = w.c1 * p(B) * (B - *w.x0);
            break;
        case Variant::DegNonDiv:
            left = w.c1 * (*w.x0 - A);
            right = w.c1 * (B - *w.x0);
            break;
        case Variant::NonDegA1: {
            const double e = form == Form::Divergence ? 1.5 : 0.5;
            left = w.r * std::pow(p(A), e) * (w.G.front() + w.h0);
            right = -w.r * std::pow(p(B), e) * (w.G.back() + w.h0);
            break;
        }
        case Variant::NonDegA2:
            left = w.r * p(A) * std::exp(w.r * w.zeta.front());
            right = -w.r * p(B) * std::exp(w.r * w.zeta.back());
            break;
    }

    // per level: squared differences and end derivatives
    const int K = tgrid.M;
    std::vector<double> vx0(static_cast<std::size_t>(K + 1)), vxN(static_cast<std::size_t>(K + 1));
    for (int k = 1; k < K; ++k) {
        vx0[static_cast<std::size_t>(k)] = end_derivative(v.row(static_cast<std::size_t>(k)), g, -1);
        vxN[static_cast<std::size_t>(k)] = end_derivative(v.row(static_cast<std::size_t>(k)), g, +1);
    }
    const double pmax = w.psi_max();

    InequalityReport rep;
    rep.variant = std::string(to_string(w.variant));
    rep.s = s_grid;
    const std::size_t ns = s_grid.size();
    rep.lhs.assign(ns, 0.0);
    rep.rhs.assign(ns, 0.0);
    rep.ratio.assign(ns, 0.0);
    rep.log_scale.assign(ns, 0.0);
    rep.boundary_left.assign(ns, 0.0);
    rep.boundary_right.assign(ns, 0.0);

    for (double s : s_grid)
        if (!(s > 0.0)) throw ConfigError("carleman_ratio: s must be positive");
    kernels::parallel_for(ns, [&](std::size_t si) {
        const double s = s_grid[si];
        double shift = -kInf;
        for (int k = 1; k < K; ++k) {
            const double lt = log_theta(tgrid.time(k), T);
            const double e = 2.0 * s * std::exp(lt) * pmax;
            shift = std::max({shift, e + lt, e + 3.0 * lt});
        }
        double lhs = 0.0, bl = 0.0, br = 0.0;
        for (int k = 1; k < K; ++k) {
            const auto row = v.row(static_cast<std::size_t>(k));
            const double lt = log_theta(tgrid.time(k), T);
            const double th = std::exp(lt);
            double grad = 0.0, zero = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = (row[j + 1] - row[j]) / g.cell(j);
                if (d == 0.0) continue;
                grad += gw[j] * d * d * g.cell(j) * exp_clamped(lt + 2.0 * s * th * w.psi_half[j] - shift);
            }
            for (std::size_t i = 1; i < n; ++i) {
                if (nw[i] == 0.0 || row[i] == 0.0) continue;
                zero += nw[i] * row[i] * row[i] * g.dual(i) *
                        exp_clamped(3.0 * lt + 2.0 * s * th * w.psi[i] - shift);
            }
            lhs += dt * (s * grad + s * s * s * zero);
            const double a0 = vx0[static_cast<std::size_t>(k)], aN = vxN[static_cast<std::size_t>(k)];
            bl += dt * s * left * a0 * a0 * exp_clamped(lt + 2.0 * s * th * w.psi.front() - shift);
            br += dt * s * right * aN * aN * exp_clamped(lt + 2.0 * s * th * w.psi.back() - shift);
        }
        const double rhs = bl + br;
        rep.lhs[si] = lhs;
        rep.rhs[si] = rhs;
        rep.boundary_left[si] = bl;
        rep.boundary_right[si] = br;
        rep.log_scale[si] = shift;
        if (lhs == 0.0 && rhs == 0.0) rep.ratio[si] = 0.0;
        else if (rhs > 0.0) rep.ratio[si] = lhs / rhs;
        else rep.ratio[si] = kInf;
    });
    finish_report(rep);
    if (!deg && rep.verdict == InequalityVerdict::Fail) {
        // boundary terms of the non-degenerate estimates have no sign
        bool negative = false;
        for (double r : rep.rhs) negative = negative || r <= 0.0;
        if (negative) rep.verdict = InequalityVerdict::Indeterminate;
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Integral of p(x)/(x - x0)^2 over [lo, hi], which may end at x0.
double hardy_weight_integral(const coeff::ScalarFn& p, double x0, double lo, double hi) {
    if (lo >= x0) {
        return quad::integrate([&](double y) { return p(x0 + y) / (y * y); }, lo - x0, hi - x0);
    }
    if (hi <= x0) {
        return quad::integrate([&](double y) { return p(x0 - y) / (y * y); }, x0 - hi, x0 - lo);
    }
    return hardy_weight_integral(p, x0, lo, x0) + hardy_weight_integral(p, x0, x0, hi);
}

struct HardyForms {
    std::vector<std::size_t> unknowns;  // node indices
    Eigen::MatrixXd Q, K;
};

// Stiffness sum c_j (w_{j+1} - w_j)^2 / h_j restricted to the free nodes.
Eigen::MatrixXd stiffness(const SpaceGrid& g, const std::vector<double>& c, const std::vector<long>& slot,
                          std::size_t m) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<long>(m), static_cast<long>(m));
    for (std::size_t j = 0; j < g.intervals(); ++j) {
        const double k = c[j] / g.cell(j);
        const long a = slot[j], b = slot[j + 1];
        if (a >= 0) K(a, a) += k;
        if (b >= 0) K(b, b) += k;
        if (a >= 0 && b >= 0) {
            K(a, b) -= k;
            K(b, a) -= k;
        }
    }
    return K;
}

double largest_generalized_eigen(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K, Eigen::VectorXd* vec) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, K);
    if (es.info() != Eigen::Success) throw ConvergenceError("generalized eigenproblem failed", 0.0);
    const long last = es.eigenvalues().size() - 1;
    if (vec) *vec = es.eigenvectors().col(last);
    return es.eigenvalues()(last);
}

double min_log_quotient(const coeff::ScalarFn& p, double x0, const SpaceGrid& g) {
    double q = kInf;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double y0 = g.nodes[i] - x0, y1 = g.nodes[i + 1] - x0;
        if (y0 == 0.0 || y1 == 0.0 || (y0 < 0.0) != (y1 < 0.0)) continue;
        const double p0 = p(g.nodes[i]), p1 = p(g.nodes[i + 1]);
        if (!(p0 > 0.0 && p1 > 0.0)) return -kInf;
        q = std::min(q, std::log(p1 / p0) / std::log(std::abs(y1) / std::abs(y0)));
    }
    return q;
}

}  // namespace

HardyResult hardy_poincare_constant(const coeff::ScalarFn& p, double x0, const SpaceGrid& g) {
    if (!(x0 > g.lo() && x0 < g.hi())) throw DomainError("Hardy-Poincare: x0 must lie inside the grid");
    HardyResult res;
    res.min_log_quotient = min_log_quotient(p, x0, g);
    res.certified = res.min_log_quotient > 1.0;

    const std::size_t n = g.intervals();
    std::vector<double> q(g.size(), 0.0);
    for (std::size_t i = 1; i < n; ++i)
        q[i] = hardy_weight_integral(p, x0, 0.5 * (g.nodes[i - 1] + g.nodes[i]), 0.5 * (g.nodes[i] + g.nodes[i + 1]));
    std::vector<long> slot(g.size(), -1);
    std::vector<std::size_t> free;
    for (std::size_t i = 1; i < n; ++i) {
        if (!std::isfinite(q[i])) continue;
        slot[i] = static_cast<long>(free.size());
        free.push_back(i);
    }
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) c[j] = p(g.half_points[j]);
    const auto K = stiffness(g, c, slot, free.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K.rows(), K.cols());
    for (std::size_t k = 0; k < free.size(); ++k) Q(static_cast<long>(k), static_cast<long>(k)) = q[free[k]];
    Eigen::VectorXd vec;
    res.constant = largest_generalized_eigen(Q, K, &vec);
    res.eigenvector.assign(g.size(), 0.0);
    for (std::size_t k = 0; k < free.size(); ++k) res.eigenvector[free[k]] = vec(static_cast<long>(k));
    return res;
}

double hardy_ratio(const coeff::ScalarFn& p, double x0, const SpaceGrid& g, const std::vector<double>& w) {
    if (w.size() != g.size()) throw ShapeError("hardy_ratio: vector size differs from the grid");
    const std::size_t n = g.intervals();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        if (w[i] == 0.0) continue;
        num += w[i] * w[i] *
               hardy_weight_integral(p, x0, 0.5 * (g.nodes[i - 1] + g.nodes[i]), 0.5 * (g.nodes[i] + g.nodes[i + 1]));
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double d = w[j + 1] - w[j];
        den += p(g.half_points[j]) * d * d / g.cell(j);
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : kInf;
    return num / den;
}

double inverse_weight_poincare_constant(const CoefficientProfile& a, const SpaceGrid& g) {
    const std::size_t n = g.intervals();
    std::vector<long> slot(g.size(), -1);
    std::vector<double> q;
    for (std::size_t i = 1; i < n; ++i) {
        const double lo = 0.5 * (g.nodes[i - 1] + g.nodes[i]);
        const double hi = 0.5 * (g.nodes[i] + g.nodes[i + 1]);
        const double qi = a.integral_of_inverse_power(lo, hi, 1.0);
        if (!std::isfinite(qi)) continue;
        slot[i] = static_cast<long>(q.size());
        q.push_back(qi);
    }
    const auto K = stiffness(g, std::vector<double>(n, 1.0), slot, q.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K.rows(), K.cols());
    for (std::size_t k = 0; k < q.size(); ++k) Q(static_cast<long>(k), static_cast<long>(k)) = q[k];
    return largest_generalized_eigen(Q, K, nullptr);
}

// ---------------------------------------------------------------------------

InequalityReport caccioppoli_check(const pde::Field& v, const CarlemanWeight& w, const TimeGrid& tgrid,
                                   Interval omega_inner, Interval omega, const std::vector<double>& s_grid,
                                   std::optional<double> x0) {
    const SpaceGrid& g = w.grid;
    if (v.nodes != g.size() || v.steps != static_cast<std::size_t>(tgrid.M))
        throw ShapeError("caccioppoli_check: field shape does not match the grids");
    if (!(omega.lo < omega_inner.lo && omega_inner.lo < omega_inner.hi && omega_inner.hi < omega.hi))
        throw ConfigError("caccioppoli_check: the inner set must be compactly contained in omega");
    if (x0 && omega_inner.contains_closed(*x0))
        throw ConfigError("caccioppoli_check: the inner set must not contain x0");

    const std::size_t n = g.intervals();
    const int K = tgrid.M;
    const double T = tgrid.T, dt = tgrid.step();
    double rhs = 0.0;
    for (int k = 1; k < K; ++k) {
        const auto row = v.row(static_cast<std::size_t>(k));
        for (std::size_t i = 1; i < n; ++i)
            if (omega.contains_open(g.nodes[i])) rhs += dt * row[i] * row[i] * g.dual(i);
    }

    InequalityReport rep;
    rep.variant = "caccioppoli";
    rep.s = s_grid;
    const std::size_t ns = s_grid.size();
    rep.lhs.assign(ns, 0.0);
    rep.rhs.assign(ns, rhs);
    rep.ratio.assign(ns, 0.0);
    rep.log_scale.assign(ns, 0.0);
    rep.boundary_left.assign(ns, 0.0);
    rep.boundary_right.assign(ns, 0.0);
    kernels::parallel_for(ns, [&](std::size_t si) {
        const double s = s_grid[si];
        double lhs = 0.0;
        for (int k = 1; k < K; ++k) {
            const auto row = v.row(static_cast<std::size_t>(k));
            const double th = eval_theta(tgrid.time(k), T);
            for (std::size_t j = 0; j < n; ++j) {
                if (!omega_inner.contains_open(g.half_points[j])) continue;
                const double d = (row[j + 1] - row[j]) / g.cell(j);
                lhs += dt * d * d * g.cell(j) * exp_clamped(2.0 * s * th * w.psi_half[j]);
            }
        }
        rep.lhs[si] = lhs;
        if (lhs == 0.0 && rhs == 0.0) rep.ratio[si] = 0.0;
        else rep.ratio[si] = rhs > 0.0 ? lhs / rhs : kInf;
    });
    finish_report(rep);
    return rep;
}

void write_inequality_csv(const InequalityReport& r, std::ostream& out) {
    out << "s,lhs,rhs,ratio,log_scale\n";
    out.precision(10);
    for (std::size_t k = 0; k < r.s.size(); ++k)
        out << r.s[k] << ',' << r.lhs[k] << ',' << r.rhs[k] << ',' << r.ratio[k] << ',' << r.log_scale[k] << '\n';
}

}  // namespace degenctrl::weights

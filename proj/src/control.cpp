#include "degenctrl/control.hpp"

#include "degenctrl/error.hpp"
#include "degenctrl/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

namespace degenctrl::control {

namespace {

using Vec = std::vector<double>;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::size_t steps(const Solver& s) { return static_cast<std::size_t>(s.time_grid().M); }

// h^{n+1} = chi_omega z^n
Field observation(const Solver& s, const pde::AdjointSolution& adj) {
    const std::size_t M = steps(s);
    const auto& mask = s.control_mask();
    Field h(M, s.grid().size(), s.spec().form, s.time_grid().T);
    for (std::size_t n = 0; n < M; ++n)
        for (std::size_t i = 0; i < mask.size(); ++i) h.at(n + 1, i) = mask[i] * adj.z.at(n, i);
    return h;
}

double field_energy(const Solver& s, const Field& h) {
    double e = 0.0;
    for (std::size_t k = 1; k <= h.steps; ++k) e += s.inner(h.row(k), h.row(k));
    return s.time_grid().step() * e;
}

Vec last_row(const Field& f) {
    auto r = f.row(f.steps);
    return Vec(r.begin(), r.end());
}

Vec first_row(const Field& f) {
    auto r = f.row(0);
    return Vec(r.begin(), r.end());
}

// S* y: free evolution of y up to T
Vec propagate(const Solver& s, const Vec& y) { return last_row(s.forward(y)); }

// G x = O* O x
Vec gramian(const Solver& s, const Vec& x) {
    const auto h = observation(s, s.adjoint(x));
    const Vec zero(x.size(), 0.0);
    return last_row(s.forward(zero, &h, pde::SourceTiming::StepWise));
}

struct CgOutcome {
    Vec x;
    int iterations = 0;
    bool converged = false;
    Vec trace;
};

// Conjugate gradients for (G + eps) x = b in the solver inner product.
CgOutcome conjugate_gradient(const Solver& s, const Vec& b, double eps, const CgOptions& opt) {
    CgOutcome out;
    const std::size_t n = b.size();
    out.x.assign(n, 0.0);
    const double bnorm = s.norm(b);
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    Vec r = b, p = b, Ap(n);
    double rr = s.inner(r, r);
    std::vector<Vec> basis;
    basis.reserve(64);
    Vec best = out.x;
    double best_res = 1.0;
    int since_best = 0;
    for (int it = 1; it <= opt.max_iters; ++it) {
        Ap = gramian(s, p);
        for (std::size_t i = 0; i < n; ++i) Ap[i] += eps * p[i];
        const double pAp = s.inner(p, Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rr / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            out.x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        // full reorthogonalization of the residuals (Lanczos vectors)
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) {
                const double c = s.inner(q, r);
                for (std::size_t i = 0; i < n; ++i) r[i] -= c * q[i];
            }
        const double rr_new = s.inner(r, r);
        const double rel = std::sqrt(std::max(rr_new, 0.0)) / bnorm;
        out.trace.push_back(rel);
        out.iterations = it;
        if (rel < best_res) {
            best_res = rel;
            best = out.x;
            since_best = 0;
        } else if (++since_best > 50) {
            break;
        }
        if (rel < opt.tol) {
            out.converged = true;
            return out;
        }
        if (basis.size() + 1 < n) {
            Vec q = r;
            const double qn = std::sqrt(rr_new);
            for (auto& v : q) v /= qn;
            if (basis.empty()) {
                Vec q0 = b;
                for (auto& v : q0) v /= bnorm;
                basis.push_back(std::move(q0));
            }
            basis.push_back(std::move(q));
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    out.x = best;
    return out;
}

void reject_nondivergence_x0(const ProblemSpec& spec) {
    if (spec.form != coeff::Form::NonDivergence || !spec.profile.degenerate()) return;
    const double x0 = *spec.profile.x0();
    for (const auto& w : spec.omega)
        if (w.contains_closed(x0))
            throw ConfigError("non-divergence form with x0=" + fmt(x0) +
                              " inside the control region: the observability route does not apply; "
                              "use regional_control_cutoff");
}

void require_omega(const ProblemSpec& spec) {
    if (spec.omega.empty()) throw ConfigError("control: the control region is empty");
}

// Duality defect of a controlled run, relative to the size of the terms.
double duality_defect(const Solver& s, const Vec& u0, const Field& u, const pde::AdjointSolution& adj,
                      const Field& h) {
    const double dt = s.time_grid().step();
    const double a = s.inner(u.row(u.steps), adj.v.row(adj.v.steps));
    const double b = s.inner(u0, adj.v.row(0));
    double c = 0.0;
    for (std::size_t n = 0; n < h.steps; ++n) c += s.inner(h.row(n + 1), adj.z.row(n));
    c *= dt;
    const double scale = std::abs(a) + std::abs(b) + std::abs(c);
    return scale > 0.0 ? std::abs(a - b - c) / scale : 0.0;
}

ControlResult finish(const Solver& s, const Vec& u0, const Vec& vT, double eps) {
    ControlResult res;
    const auto adj = s.adjoint(vT);
    res.h = observation(s, adj);
    res.u = s.forward(u0, &res.h, pde::SourceTiming::StepWise);
    res.vT = vT;
    res.epsilon = eps;
    res.initial_norm = s.norm(u0);
    res.final_residual = s.norm(res.u.row(res.u.steps));
    res.cost = field_energy(s, res.h);
    res.cost_bound_constant = res.initial_norm > 0.0 ? res.cost / (res.initial_norm * res.initial_norm) : 0.0;
    res.duality_defect = duality_defect(s, u0, res.u, adj, res.h);
    return res;
}

Vec free_copy(const Solver& s, const Vec& v) {
    Vec out(v);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (s.pinned(i)) out[i] = 0.0;
    return out;
}

// Modal form of the discrete problem. The generator is symmetric in the mass
// inner product, so A phi_k = lambda_k phi_k with M-orthonormal phi_k, and for
// vT = sum c_k phi_k the scheme gives exactly
//   z^n = r_k^{M-1-n} / b_k phi_k,  v^0 = r_k^M phi_k,
//   b_k = 1 - theta dt lambda_k,  r_k = (1 + (1-theta) dt lambda_k) / b_k.
// Every column of the observation matrix is then known to full relative
// precision, which a column sweep through the solver cannot deliver when the
// decay factors span hundreds of orders of magnitude.
struct ModalOperators {
    std::vector<std::size_t> free;                          // free node indices
    std::vector<std::pair<std::size_t, std::size_t>> rows;  // (n, i) with i in omega
    Eigen::MatrixXd phi;                                    // node values, free x modes
    Eigen::VectorXd decay;                                  // r_k^M, signed
    Eigen::MatrixXd O;                                      // rows x modes
};

ModalOperators modal_operators(const Solver& s) {
    const auto& spec = s.spec();
    if (spec.c || spec.b)
        throw PreconditionError("modal oracle: needs a generator without reaction or advection terms");
    ModalOperators d;
    const auto& op = s.op();
    const std::size_t nodes = s.grid().size();
    const auto& mass = s.mass();
    for (std::size_t i = 1; i + 1 < nodes; ++i)
        if (!s.pinned(i) && mass[i - 1] > 0.0) d.free.push_back(i);
    const long nf = static_cast<long>(d.free.size());
    std::vector<long> slot(nodes, -1);
    for (long k = 0; k < nf; ++k) slot[d.free[static_cast<std::size_t>(k)]] = k;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nf, nf);
    for (long k = 0; k < nf; ++k) {
        const std::size_t i = d.free[static_cast<std::size_t>(k)];
        const std::size_t r = i - 1;  // band row
        const double si = std::sqrt(mass[r]);
        A(k, k) = op.band.diag[r];
        if (slot[i - 1] >= 0 && r > 0) A(k, slot[i - 1]) = op.band.lower[r] * si / std::sqrt(mass[r - 1]);
        if (slot[i + 1] >= 0 && r + 1 < op.interior()) A(k, slot[i + 1]) = op.band.upper[r] * si / std::sqrt(mass[r + 1]);
    }
    const Eigen::MatrixXd Asym = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Asym);
    if (es.info() != Eigen::Success) throw ConvergenceError("modal oracle: eigensolver failed", 0.0);

    const double dt = s.time_grid().step();
    const double th = spec.theta;
    const int M = s.time_grid().M;
    d.phi.resize(nf, nf);
    d.decay.resize(nf);
    Eigen::VectorXd r(nf), b(nf);
    for (long k = 0; k < nf; ++k) {
        const long src = nf - 1 - k;  // slowest modes first
        const double lam = es.eigenvalues()(src);
        b(k) = 1.0 - th * dt * lam;
        r(k) = (1.0 + (1.0 - th) * dt * lam) / b(k);
        d.decay(k) = std::pow(r(k), M);
        for (long j = 0; j < nf; ++j)
            d.phi(j, k) = es.eigenvectors()(j, src) / std::sqrt(mass[d.free[static_cast<std::size_t>(j)] - 1]);
    }
    const auto& mask = s.control_mask();
    for (int n = 0; n < M; ++n)
        for (std::size_t i = 0; i < nodes; ++i)
            if (mask[i] != 0.0 && slot[i] >= 0) d.rows.emplace_back(static_cast<std::size_t>(n), i);
    if (d.rows.empty()) throw ConfigError("control: no grid node lies inside the control region");
    d.O.resize(static_cast<long>(d.rows.size()), nf);
    kernels::parallel_for(static_cast<std::size_t>(nf), [&](std::size_t kk) {
        const long k = static_cast<long>(kk);
        for (std::size_t q = 0; q < d.rows.size(); ++q) {
            const auto [n, i] = d.rows[q];
            const double amp = std::pow(r(k), M - 1 - static_cast<int>(n)) / b(k);
            d.O(static_cast<long>(q), k) = std::sqrt(dt * mass[i - 1]) * amp * d.phi(slot[i], k);
        }
    });
    return d;
}

}  // namespace

// ---------------------------------------------------------------------------

ObservabilityReport estimate_observability_constant(const ProblemSpec& spec, const SpaceGrid& grid,
                                                    const TimeGrid& tgrid, PowerOptions options) {
    require_omega(spec);
    reject_nondivergence_x0(spec);
    Solver s(spec, grid, tgrid);
    ObservabilityReport rep;
    rep.method = "power-iteration";
    rep.nodes = grid.size();
    rep.steps = tgrid.M;
    rep.T = tgrid.T;

    std::mt19937_64 rng(options.seed);
    Vec x(grid.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x[i] = s.pinned(i) ? 0.0 : 2.0 * u - 1.0;
    }
    double lambda = 0.0;
    for (int it = 1; it <= options.max_iters; ++it) {
        const Vec y = propagate(s, first_row(s.adjoint(x).v));
        auto cg = conjugate_gradient(s, y, 0.0, options.cg);
        const auto adj = s.adjoint(cg.x);
        const double obs = field_energy(s, observation(s, adj));
        if (!(obs > 0.0)) throw ConfigError("observability: the control region observes nothing");
        const double next = s.inner(adj.v.row(0), adj.v.row(0)) / obs;
        rep.trace.push_back(next);
        rep.iterations = it;
        const double scale = 1.0 / std::sqrt(obs);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = cg.x[i] * scale;
        if (it > 1 && std::abs(next - lambda) <= options.tol * std::abs(next)) {
            rep.C_T = next;
            return rep;
        }
        lambda = next;
    }
    throw ConvergenceError("observability: power iteration did not converge in " +
                               std::to_string(options.max_iters) + " iterations",
                           lambda);
}

ObservabilityReport dense_observability_constant(const ProblemSpec& spec, const SpaceGrid& grid,
                                                 const TimeGrid& tgrid, std::size_t max_intervals) {
    require_omega(spec);
    reject_nondivergence_x0(spec);
    if (grid.intervals() > max_intervals)
        throw PreconditionError("dense observability oracle limited to " + std::to_string(max_intervals) +
                                " intervals");
    Solver s(spec, grid, tgrid);
    const auto d = modal_operators(s);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(d.O);
    const long nf = d.O.cols();
    const Eigen::MatrixXd R = qr.matrixQR().topRows(nf).triangularView<Eigen::Upper>();
    // C_T = || D R^{-1} ||^2 with D = diag(r_k^M)
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(nf, nf));
    const Eigen::MatrixXd X = d.decay.asDiagonal() * Rinv;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
    const double sigma = svd.singularValues()(0);
    ObservabilityReport rep;
    rep.method = "dense-svd";
    rep.C_T = sigma * sigma;
    rep.nodes = grid.size();
    rep.steps = tgrid.M;
    rep.T = tgrid.T;
    rep.iterations = 1;
    rep.trace.push_back(rep.C_T);
    return rep;
}

// ---------------------------------------------------------------------------

ControlResult hum_null_control(const Solver& s, const Vec& u0_in, std::optional<double> epsilon, CgOptions cg) {
    require_omega(s.spec());
    reject_nondivergence_x0(s.spec());
    if (u0_in.size() != s.grid().size()) throw ShapeError("hum: initial datum has the wrong length");
    if (epsilon && !(*epsilon > 0.0)) throw ConfigError("hum: epsilon must be positive");
    const Vec u0 = free_copy(s, u0_in);
    const double n0 = s.norm(u0);
    if (n0 == 0.0) return finish(s, u0, Vec(u0.size(), 0.0), epsilon.value_or(0.0));
    const double eps = epsilon.value_or(1e-6 * n0 * n0);

    Vec b = propagate(s, u0);
    for (double& v : b) v = -v;
    auto out = conjugate_gradient(s, b, eps, cg);
    auto res = finish(s, u0, out.x, eps);
    res.cg_iterations = out.iterations;
    res.converged = out.converged;
    res.cg_trace = std::move(out.trace);
    if (!res.converged) res.warnings.push_back("conjugate gradient stopped before reaching the tolerance");
    return res;
}

ControlResult hum_null_control(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid,
                               std::optional<double> epsilon, CgOptions cg) {
    if (!spec.u0) throw ConfigError("hum: the problem has no initial datum");
    Solver s(spec, grid, tgrid);
    return hum_null_control(s, s.sample(spec.u0), epsilon, cg);
}

ControlResult two_piece_control(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid,
                                std::optional<double> epsilon, CgOptions cg) {
    if (spec.omega.size() != 2) throw ConfigError("two-piece control: omega must have two components");
    auto pieces = spec.omega;
    std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    std::vector<std::string> warnings;
    if (pieces[0].hi > pieces[1].lo) throw ConfigError("two-piece control: the components overlap");
    if (spec.profile.x0()) {
        const double x0 = *spec.profile.x0();
        if (!(pieces[0].hi < x0 && x0 < pieces[1].lo))
            warnings.push_back("control region does not straddle x0=" + fmt(x0));
    }
    auto res = hum_null_control(spec, grid, tgrid, epsilon, cg);
    res.warnings.insert(res.warnings.begin(), warnings.begin(), warnings.end());
    return res;
}

ControlResult exact_null_control(const Solver& s, const Vec& u0_in) {
    require_omega(s.spec());
    if (u0_in.size() != s.grid().size()) throw ShapeError("exact control: initial datum has the wrong length");
    const Vec u0 = free_copy(s, u0_in);
    const auto d = modal_operators(s);
    const auto& mass = s.mass();
    const long nf = d.O.cols();
    // O^T h = b with b_k = -<Phi u0, phi_k> = -r_k^M <u0, phi_k>
    Eigen::VectorXd b(nf);
    for (long k = 0; k < nf; ++k) {
        double c = 0.0;
        for (long j = 0; j < nf; ++j) {
            const std::size_t i = d.free[static_cast<std::size_t>(j)];
            c += mass[i - 1] * u0[i] * d.phi(j, k);
        }
        b(k) = -d.decay(k) * c;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(d.O);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(nf).triangularView<Eigen::Upper>();
    for (long k = 0; k < nf; ++k)
        if (R(k, k) == 0.0) throw ConfigError("exact control: the control region does not observe the problem");
    const Eigen::VectorXd w = R.transpose().triangularView<Eigen::Lower>().solve(b);
    Eigen::VectorXd hh = Eigen::VectorXd::Zero(d.O.rows());
    hh.head(nf) = w;
    hh = qr.householderQ() * hh;

    const std::size_t M = steps(s);
    const double dt = s.time_grid().step();
    ControlResult res;
    res.h = Field(M, s.grid().size(), s.spec().form, s.time_grid().T);
    for (std::size_t q = 0; q < d.rows.size(); ++q) {
        const auto [n, i] = d.rows[q];
        res.h.at(n + 1, i) = hh(static_cast<long>(q)) / std::sqrt(dt * mass[i - 1]);
    }
    res.u = s.forward(u0, &res.h, pde::SourceTiming::StepWise);
    res.initial_norm = s.norm(u0);
    res.final_residual = s.norm(res.u.row(M));
    res.cost = field_energy(s, res.h);
    res.cost_bound_constant = res.initial_norm > 0.0 ? res.cost / (res.initial_norm * res.initial_norm) : 0.0;
    const double bn = b.norm();
    res.duality_defect = bn > 0.0 ? (d.O.transpose() * hh - b).norm() / bn : 0.0;
    return res;
}

// ---------------------------------------------------------------------------

double smooth_step(double tau) {
    if (tau <= 0.0) return 0.0;
    if (tau >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / tau), b = std::exp(-1.0 / (1.0 - tau));
    return a / (a + b);
}

namespace {

SpaceGrid slice(const SpaceGrid& g, std::size_t lo, std::size_t hi) {
    SpaceGrid s;
    s.nodes.assign(g.nodes.begin() + static_cast<long>(lo), g.nodes.begin() + static_cast<long>(hi) + 1);
    s.half_points.assign(g.half_points.begin() + static_cast<long>(lo), g.half_points.begin() + static_cast<long>(hi));
    if (g.x0_index && *g.x0_index > lo && *g.x0_index < hi) s.x0_index = *g.x0_index - lo;
    s.grading = g.grading;
    return s;
}

std::vector<coeff::Interval> restrict_omega(const std::vector<coeff::Interval>& omega, double lo, double hi) {
    std::vector<coeff::Interval> out;
    for (const auto& w : omega) {
        const double a = std::max(w.lo, lo), b = std::min(w.hi, hi);
        if (a < b) out.push_back({a, b});
    }
    return out;
}

}  // namespace

RegionalResult regional_control_cutoff(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid,
                                       double r_outer, double r_inner) {
    if (!spec.profile.degenerate() || !grid.x0_index)
        throw ConfigError("regional control: needs a degenerate profile and a grid node at x0");
    if (!(r_inner > 0.0 && r_outer > r_inner)) throw ConfigError("regional control: need r_outer > r_inner > 0");
    if (!spec.u0) throw ConfigError("regional control: the problem has no initial datum");
    const double x0 = *spec.profile.x0();
    if (!(x0 - r_outer > grid.lo() && x0 + r_outer < grid.hi()))
        throw ConfigError("regional control: (x0 - r_outer, x0 + r_outer) must lie inside the domain");
    bool covered = false;
    for (const auto& w : spec.omega) covered = covered || (w.lo <= x0 - r_outer && x0 + r_outer <= w.hi);
    if (!covered) throw ConfigError("regional control: (x0 - r_outer, x0 + r_outer) must lie inside omega");

    const auto& x = grid.nodes;
    const std::size_t N = grid.intervals();
    const std::size_t ix0 = *grid.x0_index;
    // side problems end where phi1 / phi2 vanish, the middle problem where phi0 vanishes
    const std::size_t left_end = static_cast<std::size_t>(
        std::lower_bound(x.begin(), x.end(), x0 - r_inner) - x.begin());
    const std::size_t right_start =
        static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), x0 + r_inner) - x.begin()) - 1;
    const std::size_t mid_lo =
        static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), x0 - r_outer) - x.begin()) - 1;
    const std::size_t mid_hi = static_cast<std::size_t>(
        std::lower_bound(x.begin(), x.end(), x0 + r_outer) - x.begin());
    if (left_end < 3 || left_end >= ix0 || right_start <= ix0 || N - right_start < 3 || mid_lo < 1 ||
        mid_hi >= N || ix0 - mid_lo < 2 || mid_hi - ix0 < 2)
        throw ConfigError("regional control: the radii are not resolved by the grid");

    RegionalResult out;
    auto& tr = out.trace;
    tr.r_inner = r_inner;
    tr.r_outer = r_outer;
    tr.left_end = left_end;
    tr.right_start = right_start;
    tr.middle_lo = mid_lo;
    tr.middle_hi = mid_hi;

    const std::size_t n = grid.size();
    tr.phi1.resize(n);
    tr.phi2.resize(n);
    tr.phi0.resize(n);
    const double width = r_outer - r_inner;
    for (std::size_t i = 0; i < n; ++i) {
        tr.phi1[i] = 1.0 - smooth_step((x[i] - (x0 - r_outer)) / width);
        tr.phi2[i] = smooth_step((x[i] - (x0 + r_inner)) / width);
        tr.phi0[i] = 1.0 - tr.phi1[i] - tr.phi2[i];
    }

    Solver global(spec, grid, tgrid);
    const Vec u0 = free_copy(global, global.sample(spec.u0));

    auto sub_problem = [&](std::size_t lo, std::size_t hi, bool with_control) {
        ProblemSpec sub = spec;
        sub.omega = with_control ? restrict_omega(spec.omega, x[lo], x[hi]) : std::vector<coeff::Interval>{};
        return Solver(sub, slice(grid, lo, hi), tgrid);
    };
    auto sub_data = [&](std::size_t lo, std::size_t hi) {
        return Vec(u0.begin() + static_cast<long>(lo), u0.begin() + static_cast<long>(hi) + 1);
    };

    Solver left = sub_problem(0, left_end, true);
    Solver right = sub_problem(right_start, N, true);
    Solver middle = sub_problem(mid_lo, mid_hi, false);
    const auto cl = exact_null_control(left, sub_data(0, left_end));
    const auto cr = exact_null_control(right, sub_data(right_start, N));
    const Field v0 = middle.forward(sub_data(mid_lo, mid_hi));
    tr.left_residual = cl.final_residual;
    tr.right_residual = cr.final_residual;

    const std::size_t M = static_cast<std::size_t>(tgrid.M);
    Field u(M, n, spec.form, tgrid.T);
    for (std::size_t k = 0; k <= M; ++k) {
        const double decay = k == M ? 0.0 : 1.0 - tgrid.time(static_cast<int>(k)) / tgrid.T;
        for (std::size_t i = 1; i < N; ++i) {
            if (global.pinned(i)) continue;
            double v = 0.0;
            if (i < left_end && k < M) v += tr.phi1[i] * cl.u.at(k, i);
            if (i > right_start && k < M) v += tr.phi2[i] * cr.u.at(k, i - right_start);
            if (i > mid_lo && i < mid_hi) v += decay * tr.phi0[i] * v0.at(k, i - mid_lo);
            u.at(k, i) = v;
        }
    }

    ControlResult& res = out.control;
    res.h = Field(M, n, spec.form, tgrid.T);
    const auto& mask = global.control_mask();
    for (std::size_t k = 0; k < M; ++k) {
        const auto r = global.step_residual(k, u.row(k), u.row(k + 1));
        for (std::size_t i = 0; i < n; ++i) {
            if (mask[i] != 0.0) res.h.at(k + 1, i) = r[i];
            else tr.dropped_outside = std::max(tr.dropped_outside, std::abs(r[i]));
        }
    }
    res.u = std::move(u);
    res.initial_norm = global.norm(u0);
    res.final_residual = global.norm(res.u.row(M));
    res.cost = field_energy(global, res.h);
    res.cost_bound_constant = res.initial_norm > 0.0 ? res.cost / (res.initial_norm * res.initial_norm) : 0.0;
    res.epsilon = 0.0;

    const double dt = tgrid.step();
    double l2 = 0.0;
    for (std::size_t k = 1; k <= M; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const double hv = res.h.at(k, i);
            l2 += dt * grid.dual(i) * hv * hv;
            if (std::abs(x[i] - x0) <= r_outer) tr.h_max_near_x0 = std::max(tr.h_max_near_x0, std::abs(hv));
        }
    tr.h_norm = std::sqrt(l2);
    const Field replay = global.forward(u0, &res.h, pde::SourceTiming::StepWise);
    tr.replay_residual = global.norm(replay.row(M));
    return out;
}

// ---------------------------------------------------------------------------

SemilinearResult semilinear_null_control(const ProblemSpec& spec, const Nonlinearity& nl, const SpaceGrid& grid,
                                         const TimeGrid& tgrid, std::optional<double> epsilon, CgOptions cg,
                                         PicardOptions picard) {
    if (spec.profile.kind() != coeff::Kind::WeaklyDegenerate)
        throw PreconditionError("semilinear control: only weakly degenerate coefficients are supported");
    if (!nl.f || !nl.fq) throw ConfigError("semilinear control: f and its derivative are required");
    if (!spec.u0) throw ConfigError("semilinear control: the problem has no initial datum");

    const Solver base(spec, grid, tgrid);
    const Vec u0 = base.sample(spec.u0);
    SemilinearResult out;
    std::shared_ptr<const Field> state;
    Field previous_h;
    int increases = 0;
    const double dt = tgrid.step();
    for (int it = 1; it <= picard.max_iters; ++it) {
        ProblemSpec frozen = spec;
        if (state) {
            auto f = nl.f;
            auto fq = nl.fq;
            auto extra = spec.c;
            const std::vector<double> nodes = grid.nodes;
            frozen.c = [state, f, fq, extra, nodes, dt](double t, double xv) {
                const auto k = static_cast<std::size_t>(std::lround(t / dt));
                const auto i = static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), xv) - nodes.begin());
                const double uv = state->at(std::min(k, state->steps), std::min(i, state->nodes - 1));
                const double q = std::abs(uv) < 1e-12 ? fq(t, xv, 0.5 * uv) : f(t, xv, uv) / uv;
                return q + (extra ? extra(t, xv) : 0.0);
            };
        }
        Solver s(frozen, grid, tgrid);
        auto res = hum_null_control(s, u0, epsilon, cg);
        out.residuals.push_back(res.final_residual);
        if (it > 1) {
            double diff = 0.0, size = 0.0;
            for (std::size_t k = 1; k <= res.h.steps; ++k) {
                Vec d(res.h.nodes);
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = res.h.at(k, i) - previous_h.at(k, i);
                diff += base.inner(d, d);
                size += base.inner(res.h.row(k), res.h.row(k));
            }
            const double inc = size > 0.0 ? std::sqrt(diff / size) : std::sqrt(diff);
            out.increments.push_back(inc);
            const std::size_t r = out.residuals.size();
            increases = out.residuals[r - 1] > out.residuals[r - 2] ? increases + 1 : 0;
            if (inc < picard.tol) {
                out.converged = true;
                out.iterations = it;
                out.control = std::move(res);
                return out;
            }
            if (increases >= 3) {
                out.diverging = true;
                out.iterations = it;
                res.warnings.push_back("Picard iteration is not contracting");
                out.control = std::move(res);
                return out;
            }
        }
        state = std::make_shared<const Field>(res.u);
        previous_h = res.h;
        out.iterations = it;
        out.control = std::move(res);
    }
    out.control.warnings.push_back("Picard iteration reached max_iters");
    return out;
}

}  // namespace degenctrl::control

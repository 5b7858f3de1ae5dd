#include "degenctrl/pde.hpp"

#include "degenctrl/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <numbers>
#include <random>

namespace degenctrl::pde {

Field::Field(std::size_t M, std::size_t n_nodes, Form f, double horizon)
    : steps(M), nodes(n_nodes), values((M + 1) * n_nodes, 0.0), form(f), T(horizon) {}

double Field::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

void ProblemSpec::validate() const {
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("theta must lie in [1/2, 1]");
    if (omega.size() > 2) throw ConfigError("omega: at most two intervals are supported");
    for (const auto& w : omega)
        if (!(w.lo >= 0.0 && w.lo < w.hi && w.hi <= 1.0))
            throw ConfigError("omega: intervals must be nonempty subsets of (0,1)");
}

Solver::Solver(ProblemSpec spec, SpaceGrid grid, TimeGrid tgrid)
    : spec_(std::move(spec)), tgrid_(tgrid) {
    spec_.validate();
    if (tgrid_.M < 2 || !(tgrid_.T > 0.0)) throw PreconditionError("time grid: need T > 0 and M >= 2");
    op_ = mesh::assemble_operator(spec_.profile, grid, spec_.form);
    const auto& g = op_.grid;
    mask_.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (pinned(i)) continue;
        for (const auto& w : spec_.omega)
            if (w.contains_open(g.nodes[i])) mask_[i] = 1.0;
    }
    time_dependent_ = static_cast<bool>(spec_.c) || static_cast<bool>(spec_.b);
    const std::size_t levels = time_dependent_ ? static_cast<std::size_t>(tgrid_.M) + 1 : 1;
    implicit_.reserve(levels);
    explicit_.reserve(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        const Tridiagonal L = generator(l);
        implicit_.push_back(L.shifted(1.0, -spec_.theta * tgrid_.step()));
        explicit_.push_back(L.shifted(1.0, (1.0 - spec_.theta) * tgrid_.step()));
    }
}

bool Solver::pinned(std::size_t node) const {
    if (node == 0 || node + 1 >= op_.grid.size()) return true;
    return op_.dirichlet[node - 1];
}

Tridiagonal Solver::generator(std::size_t level) const {
    Tridiagonal L = op_.band;
    const auto& g = op_.grid;
    const std::size_t m = L.size();
    const double t = tgrid_.time(static_cast<int>(level));
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        if (op_.dirichlet[k]) continue;
        if (spec_.c) L.diag[k] -= spec_.c(t, g.nodes[i]);
        if (spec_.b) {
            const double bk = spec_.b(t, g.nodes[i]) / (g.nodes[i + 1] - g.nodes[i - 1]);
            if (k > 0 && !op_.dirichlet[k - 1]) L.lower[k] += bk;
            if (k + 1 < m && !op_.dirichlet[k + 1]) L.upper[k] -= bk;
        }
    }
    return L;
}

std::vector<double> Solver::sample(const std::function<double(double)>& f) const {
    const auto& g = op_.grid;
    std::vector<double> v(g.size(), 0.0);
    if (!f) return v;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!pinned(i)) v[i] = f(g.nodes[i]);
    return v;
}

double Solver::inner(std::span<const double> f, std::span<const double> g) const {
    const std::size_t m = op_.interior();
    if (f.size() != m + 2 || g.size() != m + 2) throw ShapeError("inner: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += op_.mass[k] * f[k + 1] * g[k + 1];
    return s;
}

double Solver::norm(std::span<const double> f) const { return std::sqrt(std::max(0.0, inner(f, f))); }

double Solver::advection_bound() const {
    if (!spec_.b) return 0.0;
    const auto& g = op_.grid;
    double C = 0.0;
    for (int k = 0; k <= tgrid_.M; ++k) {
        const double t = tgrid_.time(k);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double b = std::abs(spec_.b(t, g.nodes[i]));
            const double a = op_.node_coef[i];
            if (a > 0.0) {
                C = std::max(C, b / std::sqrt(a));
            } else if (b > 0.0) {
                return std::numeric_limits<double>::infinity();
            }
        }
    }
    return C;
}

Field Solver::forward(std::span<const double> u0, const Field* h, SourceTiming timing) const {
    const auto& g = op_.grid;
    const std::size_t n = g.size();
    const std::size_t m = op_.interior();
    if (u0.size() != n) throw ShapeError("forward: initial datum has the wrong length");
    if (h && (h->nodes != n || h->steps != static_cast<std::size_t>(tgrid_.M)))
        throw ShapeError("forward: source field does not match the grids");
    const double dt = tgrid_.step();
    const double th = spec_.theta;

    Field u(static_cast<std::size_t>(tgrid_.M), n, spec_.form, tgrid_.T);
    for (std::size_t i = 0; i < n; ++i) u.at(0, i) = pinned(i) ? 0.0 : u0[i];

    std::vector<double> rhs(m), scratch;
    for (int step = 0; step < tgrid_.M; ++step) {
        const auto sn = static_cast<std::size_t>(step);
        const Tridiagonal& C = explicit_[time_dependent_ ? sn : 0];
        const Tridiagonal& B = implicit_[time_dependent_ ? sn + 1 : 0];
        auto prev = u.row(sn);
        C.apply(prev.subspan(1, m), rhs);
        if (h) {
            auto hn = h->row(sn);
            auto hn1 = h->row(sn + 1);
            for (std::size_t k = 0; k < m; ++k) {
                const double chi = mask_[k + 1];
                if (chi == 0.0) continue;
                const double src = timing == SourceTiming::StepWise ? hn1[k + 1]
                                                                    : th * hn1[k + 1] + (1.0 - th) * hn[k + 1];
                rhs[k] += dt * chi * src;
            }
        }
        for (std::size_t k = 0; k < m; ++k)
            if (op_.dirichlet[k]) rhs[k] = 0.0;
        if (!solve_tridiagonal(B, rhs, scratch)) throw StepFailure("forward: singular banded system", step + 1);
        auto next = u.row(sn + 1);
        for (std::size_t k = 0; k < m; ++k) next[k + 1] = rhs[k];
    }
    return u;
}

std::vector<double> Solver::step_residual(std::size_t n, std::span<const double> u_n,
                                         std::span<const double> u_next) const {
    const std::size_t nodes = op_.grid.size();
    const std::size_t m = op_.interior();
    if (u_n.size() != nodes || u_next.size() != nodes) throw ShapeError("step_residual: wrong vector length");
    if (n >= static_cast<std::size_t>(tgrid_.M)) throw ShapeError("step_residual: time index out of range");
    std::vector<double> bu(m), cu(m), r(nodes, 0.0);
    implicit_[time_dependent_ ? n + 1 : 0].apply(u_next.subspan(1, m), bu);
    explicit_[time_dependent_ ? n : 0].apply(u_n.subspan(1, m), cu);
    const double dt = tgrid_.step();
    for (std::size_t k = 0; k < m; ++k)
        if (!op_.dirichlet[k]) r[k + 1] = (bu[k] - cu[k]) / dt;
    return r;
}

AdjointSolution Solver::adjoint(std::span<const double> vT) const {
    const auto& g = op_.grid;
    const std::size_t n = g.size();
    const std::size_t m = op_.interior();
    if (vT.size() != n) throw ShapeError("adjoint: final datum has the wrong length");
    const auto M = static_cast<std::size_t>(tgrid_.M);
    AdjointSolution out{Field(M, n, spec_.form, tgrid_.T), Field(M, n, spec_.form, tgrid_.T)};
    for (std::size_t i = 0; i < n; ++i) out.v.at(M, i) = pinned(i) ? 0.0 : vT[i];

    // Transposes of the step matrices, built once per distinct level.
    std::vector<Tridiagonal> BT, CT;
    BT.reserve(implicit_.size());
    CT.reserve(explicit_.size());
    for (const auto& B : implicit_) BT.push_back(B.transposed());
    for (const auto& C : explicit_) CT.push_back(C.transposed());

    const auto& mass = op_.mass;
    std::vector<double> y(m), w(m), scratch;
    for (std::size_t step = M; step-- > 0;) {
        auto next = out.v.row(step + 1);
        for (std::size_t k = 0; k < m; ++k) y[k] = mass[k] * next[k + 1];
        if (!solve_tridiagonal(BT[time_dependent_ ? step + 1 : 0], y, scratch))
            throw StepFailure("adjoint: singular banded system", static_cast<int>(step));
        auto z = out.z.row(step);
        for (std::size_t k = 0; k < m; ++k) z[k + 1] = mass[k] > 0.0 ? y[k] / mass[k] : 0.0;
        // v^n = M^{-1} C^T M z^n; y already holds M z^n
        CT[time_dependent_ ? step : 0].apply(y, w);
        auto v = out.v.row(step);
        for (std::size_t k = 0; k < m; ++k) v[k + 1] = mass[k] > 0.0 ? w[k] / mass[k] : 0.0;
    }
    return out;
}

Field solve_forward(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid) {
    Solver s(spec, grid, tgrid);
    const auto u0 = s.sample(spec.u0);
    if (!spec.h) return s.forward(u0);
    Field h(static_cast<std::size_t>(tgrid.M), grid.size(), spec.form, tgrid.T);
    for (int k = 0; k <= tgrid.M; ++k)
        for (std::size_t i = 0; i < grid.size(); ++i)
            h.at(static_cast<std::size_t>(k), i) = s.control_mask()[i] * spec.h(tgrid.time(k), grid.nodes[i]);
    return s.forward(u0, &h);
}

Field solve_adjoint(const ProblemSpec& spec, const SpaceGrid& grid, const TimeGrid& tgrid) {
    Solver s(spec, grid, tgrid);
    return s.adjoint(s.sample(spec.vT)).v;
}

EnergyReport energy_estimate_check(const Field& u, const Solver& solver, const Field* h) {
    const auto& p = solver.spec().profile;
    const auto& g = solver.grid();
    const bool div = solver.spec().form == Form::Divergence;
    const auto l2 = mesh::make_norm(div ? mesh::NormKind::L2 : mesh::NormKind::L2_inv_a, p, g);
    const auto h1 = mesh::make_norm(div ? mesh::NormKind::H1_a : mesh::NormKind::H1_inv_a, p, g);
    const double dt = solver.time_grid().step();
    EnergyReport r;
    for (std::size_t k = 0; k <= u.steps; ++k) {
        const auto row = u.row(k);
        r.sup_norm_sq = std::max(r.sup_norm_sq, mesh::inner_product(row, row, l2));
        if (k > 0) r.integrated_h1 += dt * mesh::inner_product(row, row, h1);
    }
    r.rhs = mesh::inner_product(u.row(0), u.row(0), l2);
    if (h) {
        std::vector<double> hk(g.size());
        for (std::size_t k = 1; k <= h->steps; ++k) {
            for (std::size_t i = 0; i < g.size(); ++i) hk[i] = solver.control_mask()[i] * h->at(k, i);
            r.rhs += dt * mesh::inner_product(hk, hk, l2);
        }
    }
    r.lhs = r.sup_norm_sq + r.integrated_h1;
    if (r.rhs > 0.0) {
        r.constant = r.lhs / r.rhs;
    } else if (r.lhs > 0.0) {
        r.constant = std::numeric_limits<double>::infinity();
    }
    return r;
}

MonotonicityReport gradient_monotonicity_check(const Field& v, const mesh::DiscreteOperator& op) {
    const auto& g = op.grid;
    if (v.nodes != g.size()) throw ShapeError("gradient_monotonicity_check: grid mismatch");
    MonotonicityReport r;
    r.energy.resize(v.steps + 1);
    for (std::size_t k = 0; k <= v.steps; ++k) {
        double e = 0.0;
        for (std::size_t j = 0; j < g.intervals(); ++j) {
            const double d = (v.at(k, j + 1) - v.at(k, j)) / g.cell(j);
            const double c = op.form == Form::Divergence ? op.half_coef[j] : 1.0;
            e += c * d * d * g.cell(j);
        }
        r.energy[k] = e;
    }
    r.tolerance = 1e-8 * r.energy.back();
    for (std::size_t k = 0; k + 1 < r.energy.size(); ++k)
        r.worst_defect = std::max(r.worst_defect, r.energy[k] - r.energy[k + 1]);
    r.pass = r.worst_defect <= r.tolerance;
    return r;
}

void write_field_csv(const Field& f, std::ostream& out, int precision) {
    out << 't';
    for (std::size_t i = 0; i < f.nodes; ++i) out << ",u_" << i;
    out << '\n';
    char buf[64];
    for (std::size_t k = 0; k <= f.steps; ++k) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, f.T * static_cast<double>(k) / static_cast<double>(f.steps));
        out << buf;
        for (std::size_t i = 0; i < f.nodes; ++i) {
            std::snprintf(buf, sizeof buf, ",%.*g", precision, f.at(k, i) == 0.0 ? 0.0 : f.at(k, i));
            out << buf;
        }
        out << '\n';
    }
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary field dumps assume a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void write_field_binary(const Field& f, std::ostream& out) {
    out.write("DGF1", 4);
    put_u64(out, f.steps + 1);
    put_u64(out, f.nodes);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

Field read_field_binary(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DGF1", 4) != 0) throw ConfigError("field dump: bad magic");
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    if (!in || rows < 2 || cols < 3 || rows * cols > (1ull << 32)) throw ConfigError("field dump: bad dimensions");
    Field f(static_cast<std::size_t>(rows - 1), static_cast<std::size_t>(cols), Form::Divergence, 1.0);
    in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in) throw ConfigError("field dump: truncated data");
    return f;
}

std::vector<double> random_sine_series(const SpaceGrid& grid, std::uint64_t seed, int terms) {
    std::mt19937_64 gen(seed);
    std::vector<double> xi(static_cast<std::size_t>(terms));
    for (auto& c : xi) c = 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0;
    std::vector<double> v(grid.size(), 0.0);
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        double s = 0.0;
        for (int k = 0; k < terms; ++k) s += xi[static_cast<std::size_t>(k)] * std::sin((k + 1) * std::numbers::pi * grid.nodes[i]);
        v[i] = s;
    }
    return v;
}

}  // namespace degenctrl::pde

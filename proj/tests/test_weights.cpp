#include "doctest.h"

#include "degenctrl/error.hpp"
#include "degenctrl/pde.hpp"
#include "degenctrl/weights.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace degenctrl;
using namespace degenctrl::weights;
using coeff::make_constant_profile;
using coeff::make_prototype_profile;

namespace {

// Composite Simpson rule, independent of the library quadrature.
template <class F>
double simpson(F f, double lo, double hi, int n = 2000) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int k = 1; k < n; ++k) s += f(lo + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

pde::Field adjoint_field(const coeff::CoefficientProfile& p, Form form, std::size_t n, int M) {
    pde::ProblemSpec spec{p, form};
    auto g = mesh::build_grid(n, p);
    pde::Solver solver(spec, g, TimeGrid(1.0, M));
    auto vT = solver.sample([](double x) { return std::sin(std::numbers::pi * x) + 0.3 * std::sin(3 * std::numbers::pi * x); });
    return solver.adjoint(vT).v;
}

}  // namespace

TEST_CASE("Theta") {
    CHECK(eval_theta(0.5, 1.0) == doctest::Approx(256.0).epsilon(1e-14));
    CHECK(eval_theta(0.25, 1.0) == doctest::Approx(std::pow(1.0 / (0.25 * 0.75), 4)).epsilon(1e-14));
    CHECK(eval_theta(0.25, 1.0) == doctest::Approx(809.0866).epsilon(1e-6));
    CHECK_THROWS_AS(eval_theta(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(eval_theta(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(eval_theta(-0.1, 1.0), DomainError);
    // the weight vanishes at the ends of the time interval
    CHECK(clamped_weight(1e-3, 1.0, 1.0, -0.1) < 1e-30);
    CHECK(clamped_weight(0.5, 1.0, 1.0, -0.1) == doctest::Approx(256.0 * std::exp(-2.0 * 256.0 * 0.1)));
}

TEST_CASE("degenerate divergence weight for a = |x - 1/2|") {
    auto p = make_prototype_profile(1.0, 0.5, 101);
    auto g = mesh::build_grid(40, p);
    const double c1 = 2.0;
    auto w = build_degenerate_weight(p, g, Form::Divergence, c1, 0.2);
    CHECK(w.c2_required == doctest::Approx(0.5));
    CHECK(w.c2 == doctest::Approx(0.6));
    CHECK(w.valid);
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(w.psi[i] == doctest::Approx(c1 * (std::abs(g.nodes[i] - 0.5) - 0.6)).epsilon(1e-10));
    for (std::size_t j = 0; j < g.intervals(); ++j)
        CHECK(w.psi_half[j] == doctest::Approx(c1 * (std::abs(g.half_points[j] - 0.5) - 0.6)).epsilon(1e-10));
    CHECK(w.psi[*g.x0_index] == doctest::Approx(-c1 * w.c2));
    CHECK(w.psi_max() < 0.0);

    CHECK_THROWS_AS(build_degenerate_weight(p, g, Form::Divergence, c1, 0.0), ConstraintError);
    CHECK_THROWS_AS(build_degenerate_weight(p, g, Form::Divergence, c1, -0.1), ConstraintError);
    CHECK_THROWS_AS(build_degenerate_weight(p, g, Form::Divergence, 0.0, 0.2), ConstraintError);
    auto flat = make_constant_profile(1.0, 11);
    CHECK_THROWS_AS(build_degenerate_weight(flat, mesh::build_grid(20, flat), Form::Divergence, 1.0, 0.2),
                    DomainError);
}

TEST_CASE("a psi_x = c1 (x - x0) on the nodes") {
    for (double alpha : {0.5, 1.5}) {
        auto p = make_prototype_profile(alpha, 0.3, 101);
        auto g = mesh::build_grid(50, p);
        const double c1 = 1.7;
        auto w = build_degenerate_weight(p, g, Form::Divergence, c1, 0.1);
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(std::abs(w.a_dpsi[i] - c1 * (g.nodes[i] - 0.3)) <= 1e-14);
        for (std::size_t i = 0; i + 1 < g.size(); ++i)
            CHECK((w.a_dpsi[i + 1] - w.a_dpsi[i]) / g.cell(i) == doctest::Approx(c1).epsilon(1e-12));
        // psi = c1 (|x-x0|^{2-alpha}/(2-alpha) - c2)
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = std::abs(g.nodes[i] - 0.3);
            CHECK(w.psi[i] == doctest::Approx(c1 * (std::pow(y, 2 - alpha) / (2 - alpha) - w.c2)).epsilon(1e-10));
        }
        // required c2 = max over both ends of d^2 / (a(end)(2-alpha))
        CHECK(w.c2_required == doctest::Approx(std::pow(0.7, 2 - alpha) / (2 - alpha)));
    }
}

TEST_CASE("degenerate non-divergence weight") {
    auto p = make_prototype_profile(0.5, 0.4, 101);
    auto g = mesh::build_grid(30, p);
    const double d1 = 1.0, R = 2.0;
    auto w = build_degenerate_weight(p, g, Form::NonDivergence, d1, 0.25, R);
    CHECK(w.variant == Variant::DegNonDiv);
    const double req = std::max(0.36 * std::exp(R * 0.36) / (1.5 * std::pow(0.6, 0.5)),
                                0.16 * std::exp(R * 0.16) / (1.5 * std::pow(0.4, 0.5)));
    CHECK(w.c2_required == doctest::Approx(req));
    CHECK(w.valid);
    // y^{1/2} e^{R y^2} integrated by Simpson after y = u^2
    for (std::size_t i : {0u, 5u, 29u, 30u}) {
        const double z = std::abs(g.nodes[i] - 0.4);
        const double I = simpson([&](double u) { return 2.0 * u * u * std::exp(R * std::pow(u, 4)); }, 0.0, std::sqrt(z));
        CHECK(w.psi[i] == doctest::Approx(d1 * (I - w.c2)).epsilon(1e-8));
    }
    CHECK(w.psi[*g.x0_index] == doctest::Approx(-d1 * w.c2));
    CHECK_THROWS_AS(build_degenerate_weight(p, g, Form::NonDivergence, d1, 0.25, 0.0), ConstraintError);
}

TEST_CASE("non-degenerate weights") {
    auto flat = make_constant_profile(1.0, 11);
    auto g = mesh::build_grid_on(0.6, 1.0, 20, std::nullopt);
    auto w2 = build_nondegenerate_weight(flat, g, nullptr, Variant::NonDegA2, 1.5, {0.6, 1.0});
    CHECK(w2.dfrak == 0.0);
    CHECK(w2.cfrak == doctest::Approx(2.0));
    for (double v : w2.psi) CHECK(v == doctest::Approx(-1.0));
    CHECK(w2.valid);

    // g = 1, h = 0 on (0.6, 1): G(x) = 1 - x, psi = -r [ (B + h0)(x - A) - (x^2 - A^2)/2 ] - shift
    coeff::NonDegeneratePair pair;
    pair.g = coeff::SampledFunction::from([](double) { return 1.0; }, g.nodes);
    pair.h = coeff::SampledFunction::from([](double) { return 0.0; }, g.nodes);
    pair.g0 = 1.0;
    pair.h0 = 0.5;
    pair.interval = {0.6, 1.0};
    const double r = 2.0, shift = 0.3;
    auto w1 = build_nondegenerate_weight(flat, g, &pair, Variant::NonDegA1, r, {}, shift);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.nodes[i];
        const double expect = -r * ((1.0 + 0.5) * (x - 0.6) - 0.5 * (x * x - 0.36)) - shift;
        CHECK(w1.psi[i] == doctest::Approx(expect).epsilon(1e-10));
    }
    for (std::size_t i = 0; i + 1 < g.size(); ++i) CHECK(w1.psi[i + 1] < w1.psi[i]);
    CHECK(w1.G.front() == doctest::Approx(0.4));

    // A2 for a = 2 - x on (0.6, 1): zeta = int_x^1 1/(2-t) dt = log(2 - x), d = 1
    auto lin = coeff::make_closed_form_profile([](double x) { return 2.0 - x; }, 101, "2-x");
    auto wl = build_nondegenerate_weight(lin, g, nullptr, Variant::NonDegA2, 1.0, {0.6, 1.0});
    CHECK(wl.dfrak == doctest::Approx(1.0));
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(wl.zeta[i] == doctest::Approx(std::log(2.0 - g.nodes[i])).epsilon(1e-10));
    CHECK(wl.cfrak == doctest::Approx(1.0 + 1.4));

    auto p = make_prototype_profile(1.0, 0.5, 101);
    auto gp = mesh::build_grid_on(0.4, 1.0, 20, std::nullopt);
    CHECK_THROWS_AS(build_nondegenerate_weight(p, gp, nullptr, Variant::NonDegA2, 1.0, {0.4, 1.0}), DomainError);
    CHECK_THROWS_AS(build_nondegenerate_weight(flat, g, nullptr, Variant::NonDegA2, 0.0, {0.6, 1.0}),
                    ConstraintError);
    CHECK_THROWS_AS(build_nondegenerate_weight(flat, g, nullptr, Variant::NonDegA2, -1.0, {0.6, 1.0}),
                    ConstraintError);
    CHECK_THROWS_AS(build_nondegenerate_weight(flat, g, nullptr, Variant::NonDegA1, 1.0, {0.6, 1.0}), ConfigError);
}

TEST_CASE("c1 lower bound for gluing") {
    auto p = make_prototype_profile(1.0, 0.5, 101);
    auto g = mesh::build_grid(40, p);
    auto deg = build_degenerate_weight(p, g, Form::Divergence, 1.0, 0.2);
    auto gr = mesh::build_grid_on(0.7, 1.0, 20, std::nullopt);
    auto nd = build_nondegenerate_weight(p, gr, nullptr, Variant::NonDegA2, 1.0, {0.7, 1.0});
    const double bound = c1_lower_bound(deg, nd, p, +1);
    CHECK(bound == doctest::Approx((nd.cfrak - 1.0) / (0.6 - 0.5)));
    CHECK_THROWS_AS(c1_lower_bound(nd, deg, p, +1), ConfigError);
}

TEST_CASE("s grid") {
    auto s = log_spaced(1.0, 100.0, 3);
    CHECK(s[1] == doctest::Approx(10.0));
    auto p = make_prototype_profile(1.0, 0.5, 101);
    auto w = build_degenerate_weight(p, mesh::build_grid(20, p), Form::Divergence, 1.0, 0.2);
    auto sg = default_s_grid(w, 1.0);
    REQUIRE(sg.size() == 16);
    const double star = 1.0 / (256.0 * 0.6);
    CHECK(sg.front() == doctest::Approx(1e-2 * star));
    CHECK(sg.back() == doctest::Approx(1e2 * star));
    CHECK_THROWS_AS(log_spaced(0.0, 1.0, 4), ConfigError);
}

TEST_CASE("Carleman ratio") {
    for (double alpha : {0.5, 1.5}) {
        auto p = make_prototype_profile(alpha, 0.5, 101);
        auto v = adjoint_field(p, Form::Divergence, 40, 40);
        auto g = mesh::build_grid(40, p);
        auto w = build_degenerate_weight(p, g, Form::Divergence, 1.0, 0.2);
        auto rep = carleman_ratio(v, w, p, TimeGrid(1.0, 40), default_s_grid(w, 1.0), Form::Divergence);
        REQUIRE(rep.ratio.size() == 16);
        for (std::size_t k = 0; k < rep.s.size(); ++k) {
            CHECK(rep.rhs[k] > 0.0);
            CHECK(std::isfinite(rep.ratio[k]));
            CHECK(rep.ratio[k] > 0.0);
        }
        CHECK(rep.verdict == InequalityVerdict::Pass);
        CHECK(std::isfinite(rep.sup_ratio));

        pde::Field zero(40, g.size(), Form::Divergence, 1.0);
        auto rz = carleman_ratio(zero, w, p, TimeGrid(1.0, 40), {1.0, 2.0}, Form::Divergence);
        CHECK(rz.ratio[0] == 0.0);
        CHECK(rz.ratio[1] == 0.0);

        pde::Field nd(40, g.size(), Form::NonDivergence, 1.0);
        CHECK_THROWS_AS(carleman_ratio(nd, w, p, TimeGrid(1.0, 40), {1.0}, Form::NonDivergence), ConfigError);
        CHECK_THROWS_AS(carleman_ratio(v, w, p, TimeGrid(1.0, 30), {1.0}, Form::Divergence), ShapeError);
    }
}

TEST_CASE("Carleman ratio, non-divergence form") {
    auto p = make_prototype_profile(0.5, 0.5, 101);
    auto v = adjoint_field(p, Form::NonDivergence, 40, 40);
    auto w = build_degenerate_weight(p, mesh::build_grid(40, p), Form::NonDivergence, 1.0, 0.2, 1.0);
    auto rep = carleman_ratio(v, w, p, TimeGrid(1.0, 40), default_s_grid(w, 1.0), Form::NonDivergence);
    for (double r : rep.ratio) CHECK(std::isfinite(r));
    std::stringstream ss;
    write_inequality_csv(rep, ss);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "s,lhs,rhs,ratio,log_scale");
}

TEST_CASE("Hardy-Poincare constant") {
    const double x0 = 0.5;
    auto quad = [x0](double x) { return (x - x0) * (x - x0); };
    auto p = make_prototype_profile(1.0, x0, 11);
    double prev = 0.0;
    for (std::size_t n : {50u, 100u, 200u}) {
        auto g = mesh::build_grid(n, p);
        auto res = hardy_poincare_constant(quad, x0, g);
        CHECK(res.certified);
        CHECK(res.min_log_quotient == doctest::Approx(2.0));
        // the sharp continuous constant for the weight (x - x0)^2 is 4
        CHECK(res.constant < 4.0);
        CHECK(res.constant > prev);
        prev = res.constant;
        CHECK(hardy_ratio(quad, x0, g, res.eigenvector) == doctest::Approx(res.constant).epsilon(1e-8));
        auto scaled = hardy_poincare_constant([&](double x) { return 7.5 * quad(x); }, x0, g);
        CHECK(scaled.constant == doctest::Approx(res.constant).epsilon(1e-10));
    }
    auto g = mesh::build_grid(100, p);
    auto weak = hardy_poincare_constant([x0](double x) { return std::sqrt(std::abs(x - x0)); }, x0, g);
    CHECK_FALSE(weak.certified);
    CHECK_THROWS_AS(hardy_poincare_constant(quad, 1.5, g), DomainError);
}

TEST_CASE("Poincare constant with weight 1/a") {
    auto flat = make_constant_profile(1.0, 11);
    auto g = mesh::build_grid(200, flat);
    CHECK(inverse_weight_poincare_constant(flat, g) ==
          doctest::Approx(1.0 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-3));
    for (double alpha : {0.5, 1.5}) {
        auto p = make_prototype_profile(alpha, 0.5, 101);
        const double c = inverse_weight_poincare_constant(p, mesh::build_grid(100, p));
        CHECK(std::isfinite(c));
        CHECK(c > 0.0);
    }
}

TEST_CASE("Caccioppoli inequality") {
    auto p = make_prototype_profile(1.0, 0.5, 101);
    auto g = mesh::build_grid(40, p);
    auto v = adjoint_field(p, Form::Divergence, 40, 40);
    auto w = build_degenerate_weight(p, g, Form::Divergence, 1.0, 0.2);
    auto sg = default_s_grid(w, 1.0);
    auto rep = caccioppoli_check(v, w, TimeGrid(1.0, 40), {0.7, 0.85}, {0.6, 0.95}, sg, 0.5);
    for (std::size_t k = 0; k < sg.size(); ++k) {
        CHECK(std::isfinite(rep.ratio[k]));
        if (k > 0) CHECK(rep.ratio[k] <= rep.ratio[k - 1]);
    }
    CHECK_THROWS_AS(caccioppoli_check(v, w, TimeGrid(1.0, 40), {0.55, 0.8}, {0.6, 0.95}, sg, 0.5), ConfigError);
    CHECK_THROWS_AS(caccioppoli_check(v, w, TimeGrid(1.0, 40), {0.4, 0.6}, {0.3, 0.7}, sg, 0.5), ConfigError);
}

#include "doctest.h"

#include "degenctrl/error.hpp"
#include "degenctrl/pde.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace degenctrl;
using namespace degenctrl::pde;
using coeff::make_constant_profile;
using coeff::make_prototype_profile;

namespace {

constexpr double pi = std::numbers::pi;

ProblemSpec heat_spec(double theta = 1.0) {
    return ProblemSpec{.profile = make_constant_profile(1.0, 11), .form = Form::Divergence, .theta = theta};
}

double sinpi(double x) { return std::sin(pi * x); }

}  // namespace

TEST_CASE("zero data gives the zero solution") {
    auto spec = heat_spec();
    auto g = mesh::build_grid(20, spec.profile);
    Solver s(spec, g, TimeGrid(0.5, 10));
    auto u = s.forward(std::vector<double>(g.size(), 0.0));
    CHECK(u.max_abs() == 0.0);
    auto v = s.adjoint(std::vector<double>(g.size(), 0.0));
    CHECK(v.v.max_abs() == 0.0);
}

TEST_CASE("heat equation accuracy") {
    auto spec = heat_spec(0.5);
    auto g = mesh::build_grid(200, spec.profile);
    Solver s(spec, g, TimeGrid(0.1, 400));
    auto u = s.forward(s.sample(sinpi));
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double exact = std::exp(-pi * pi * 0.1) * sinpi(g.nodes[i]);
        err = std::max(err, std::abs(u.at(400, i) - exact));
        ref = std::max(ref, std::abs(exact));
    }
    CHECK(err / ref <= 0.01);
    CHECK(err / ref <= 1e-4);
}

TEST_CASE("adjoint of the heat equation") {
    auto spec = heat_spec(0.5);
    auto g = mesh::build_grid(100, spec.profile);
    const double T = 0.2;
    Solver s(spec, g, TimeGrid(T, 200));
    auto v = s.adjoint(s.sample(sinpi)).v;
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(v.at(0, i) == doctest::Approx(std::exp(-pi * pi * T) * sinpi(g.nodes[i])).epsilon(1e-3).scale(1));
}

TEST_CASE("time reversal: adjoint equals the forward solve for a self-adjoint step") {
    auto spec = ProblemSpec{.profile = make_prototype_profile(0.5, 0.5, 11), .form = Form::NonDivergence};
    auto g = mesh::build_grid(40, spec.profile);
    Solver s(spec, g, TimeGrid(0.3, 30));
    auto vT = random_sine_series(g, 3);
    auto v = s.adjoint(vT).v;
    auto u = s.forward(vT);
    for (std::size_t k = 0; k <= 30; ++k)
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(v.at(30 - k, i) == doctest::Approx(u.at(k, i)).epsilon(1e-12));
}

TEST_CASE("positivity and maximum principle") {
    auto spec = ProblemSpec{.profile = make_prototype_profile(0.5, 0.5, 11), .form = Form::Divergence};
    auto g = mesh::build_grid(80, spec.profile);
    Solver s(spec, g, TimeGrid(0.5, 50));
    auto u = s.forward(s.sample([](double x) { return x < 0.5 ? 1.0 : 0.3; }));
    double lo = 1e300, hi = -1e300;
    for (double x : u.values) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(lo >= -1e-10);
    CHECK(hi <= 1.0 + 1e-10);
}

TEST_CASE("decay with a nonnegative reaction term") {
    auto spec = ProblemSpec{.profile = make_prototype_profile(1.5, 0.5, 11), .form = Form::Divergence};
    spec.c = [](double t, double x) { return 1.0 + t * x; };
    auto g = mesh::build_grid(60, spec.profile);
    Solver s(spec, g, TimeGrid(0.5, 40));
    auto u0 = random_sine_series(g, 5);
    auto u = s.forward(u0);
    CHECK(s.norm(u.row(40)) <= s.norm(u.row(0)));
}

TEST_CASE("discrete duality holds exactly") {
    struct Case {
        double alpha;
        Form form;
        double theta;
        bool lower_order;
    };
    for (auto cs : {Case{0.5, Form::Divergence, 1.0, false}, Case{1.5, Form::Divergence, 0.5, true},
                    Case{0.5, Form::NonDivergence, 0.5, true}, Case{1.5, Form::NonDivergence, 1.0, false}}) {
        CAPTURE(cs.alpha);
        auto spec = ProblemSpec{.profile = make_prototype_profile(cs.alpha, 0.5, 11), .form = cs.form, .theta = cs.theta};
        spec.omega = {{0.1, 0.3}, {0.6, 0.9}};
        if (cs.lower_order) {
            spec.c = [](double t, double x) { return 1.0 + std::sin(3 * x) * t; };
            spec.b = [](double, double x) { return 0.3 * std::sqrt(std::abs(x - 0.5)) * (x - 0.5); };
        }
        auto g = mesh::build_grid(100, spec.profile);
        Solver s(spec, g, TimeGrid(0.5, 200));
        auto u0 = random_sine_series(g, 1);
        auto vT = random_sine_series(g, 2);
        Field h(200, g.size(), cs.form, 0.5);
        for (std::size_t k = 0; k <= 200; ++k)
            for (std::size_t i = 0; i < g.size(); ++i) h.at(k, i) = std::cos(3.0 * k / 200 + 5 * g.nodes[i]);
        for (auto timing : {SourceTiming::Nodal, SourceTiming::StepWise}) {
            auto u = s.forward(u0, &h, timing);
            auto adj = s.adjoint(vT);
            const double lhs = s.inner(u.row(200), vT) - s.inner(u0, adj.v.row(0));
            double rhs = 0.0;
            const double dt = 0.5 / 200;
            std::vector<double> f(g.size());
            for (std::size_t n = 0; n < 200; ++n) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double src = timing == SourceTiming::StepWise
                                           ? h.at(n + 1, i)
                                           : cs.theta * h.at(n + 1, i) + (1 - cs.theta) * h.at(n, i);
                    f[i] = s.control_mask()[i] * src;
                }
                rhs += dt * s.inner(f, adj.z.row(n));
            }
            CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
        }
    }
}

TEST_CASE("SD non-divergence keeps u(x0) = 0") {
    auto spec = ProblemSpec{.profile = make_prototype_profile(1.5, 0.5, 11), .form = Form::NonDivergence};
    auto g = mesh::build_grid(40, spec.profile);
    Solver s(spec, g, TimeGrid(0.2, 20));
    CHECK(s.pinned(*g.x0_index));
    auto u = s.forward(s.sample([](double) { return 1.0; }));
    for (std::size_t k = 0; k <= 20; ++k) CHECK(u.at(k, *g.x0_index) == 0.0);
}

TEST_CASE("energy estimate") {
    auto spec = heat_spec(0.5);
    auto g = mesh::build_grid(200, spec.profile);
    Solver s(spec, g, TimeGrid(0.1, 400));
    auto zero = s.forward(std::vector<double>(g.size(), 0.0));
    auto r0 = energy_estimate_check(zero, s);
    CHECK_FALSE(r0.constant.has_value());
    auto u = s.forward(s.sample(sinpi));
    auto r = energy_estimate_check(u, s);
    REQUIRE(r.constant.has_value());
    CHECK(*r.constant <= 2.0);
    // closed form: 1 + (1 + pi^2)(1 - e^{-2 pi^2 T}) / (2 pi^2)
    const double expected = 1.0 + (1.0 + pi * pi) * (1.0 - std::exp(-2 * pi * pi * 0.1)) / (2 * pi * pi);
    CHECK(*r.constant == doctest::Approx(expected).epsilon(0.02));

    std::vector<double> cs;
    for (std::size_t n : {100u, 200u}) {
        auto sp = ProblemSpec{.profile = make_prototype_profile(1.5, 0.5, 11), .form = Form::Divergence};
        auto gg = mesh::build_grid(n, sp.profile);
        Solver ss(sp, gg, TimeGrid(0.5, static_cast<int>(2 * n)));
        auto uu = ss.forward(random_sine_series(gg, 42));
        cs.push_back(*energy_estimate_check(uu, ss).constant);
    }
    CHECK(std::isfinite(cs[0]));
    CHECK(std::abs(cs[1] / cs[0] - 1.0) <= 0.2);
}

TEST_CASE("gradient energy of the adjoint is nondecreasing") {
    auto spec = heat_spec();
    auto g = mesh::build_grid(50, spec.profile);
    Solver s(spec, g, TimeGrid(0.3, 60));
    auto zero = s.adjoint(std::vector<double>(g.size(), 0.0)).v;
    auto r0 = gradient_monotonicity_check(zero, s.op());
    CHECK(r0.pass);
    CHECK(r0.worst_defect == 0.0);
    auto r1 = gradient_monotonicity_check(s.adjoint(s.sample(sinpi)).v, s.op());
    CHECK(r1.pass);
    CHECK(r1.energy.front() < r1.energy.back());

    auto sp = ProblemSpec{.profile = make_prototype_profile(0.5, 0.5, 11), .form = Form::Divergence};
    auto gp = mesh::build_grid(80, sp.profile);
    Solver sv(sp, gp, TimeGrid(0.5, 100));
    CHECK(gradient_monotonicity_check(sv.adjoint(random_sine_series(gp, 7)).v, sv.op()).pass);
}

TEST_CASE("advection bound") {
    auto spec = ProblemSpec{.profile = make_prototype_profile(1.0, 0.5, 11), .form = Form::Divergence};
    spec.b = [](double, double x) { return 0.7 * std::sqrt(std::abs(x - 0.5)); };
    auto g = mesh::build_grid(20, spec.profile);
    Solver s(spec, g, TimeGrid(0.1, 4));
    CHECK(s.advection_bound() == doctest::Approx(0.7));
    spec.b = [](double, double) { return 1.0; };
    Solver s2(spec, g, TimeGrid(0.1, 4));
    CHECK(std::isinf(s2.advection_bound()));
}

TEST_CASE("singular step reports its time index") {
    auto spec = heat_spec();
    spec.c = [](double t, double) { return t > 0.15 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    auto g = mesh::build_grid(10, spec.profile);
    Solver s(spec, g, TimeGrid(0.4, 4));
    try {
        s.forward(s.sample(sinpi));
        FAIL("expected a step failure");
    } catch (const StepFailure& e) {
        CHECK(e.time_index() == 2);
    }
}

TEST_CASE("spec validation") {
    auto spec = heat_spec();
    spec.theta = 0.3;
    auto g = mesh::build_grid(10, spec.profile);
    CHECK_THROWS_AS(Solver(spec, g, TimeGrid(1.0, 4)), ConfigError);
    spec.theta = 1.0;
    spec.omega = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
    CHECK_THROWS_AS(Solver(spec, g, TimeGrid(1.0, 4)), ConfigError);
    CHECK_THROWS_AS(TimeGrid(1.0, 1), PreconditionError);
}

TEST_CASE("field export") {
    auto spec = heat_spec();
    auto g = mesh::build_grid(8, spec.profile);
    Solver s(spec, g, TimeGrid(1.0, 3));
    auto u = s.forward(s.sample(sinpi));
    std::stringstream csv;
    write_field_csv(u, csv);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,u_0,u_1,u_2,u_3,u_4,u_5,u_6,u_7,u_8");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 4);

    std::stringstream bin;
    write_field_binary(u, bin);
    CHECK(bin.str().substr(0, 4) == "DGF1");
    CHECK(bin.str().size() == 4 + 16 + 4 * 9 * 8);
    auto back = read_field_binary(bin);
    CHECK(back.values == u.values);
    std::stringstream bad("XXXX");
    CHECK_THROWS_AS(read_field_binary(bad), ConfigError);
}

TEST_CASE("random sine series is reproducible") {
    auto g = mesh::build_grid(16, make_constant_profile(1.0, 11));
    CHECK(random_sine_series(g, 11) == random_sine_series(g, 11));
    CHECK(random_sine_series(g, 11) != random_sine_series(g, 12));
    CHECK(random_sine_series(g, 11).front() == 0.0);
}

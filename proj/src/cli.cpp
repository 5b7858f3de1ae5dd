#include "degenctrl/cli.hpp"

#include "degenctrl/control.hpp"
#include "degenctrl/error.hpp"
#include "degenctrl/kernels.hpp"
#include "degenctrl/mesh.hpp"
#include "degenctrl/pde.hpp"
#include "degenctrl/weights.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include "CLI11.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#ifndef DEGENCTRL_VERSION
#define DEGENCTRL_VERSION "0.0.0"
#endif

namespace degenctrl::cli {

namespace fs = std::filesystem;
using config::Table;

namespace {

constexpr std::pair<Task, std::string_view> kTaskNames[] = {
    {Task::Solve, "solve"},       {Task::Observe, "observe"},   {Task::Control, "control"},
    {Task::Carleman, "carleman"}, {Task::Hardy, "hardy"},       {Task::Caccioppoli, "caccioppoli"},
    {Task::Regional, "regional"}, {Task::Semilinear, "semilinear"}, {Task::Suite, "suite"},
};

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Error: return "error";
    }
    return "error";
}

bool needs_time(Task t) { return t != Task::Hardy && t != Task::Suite; }

void check_intervals(const Intervals& w, const std::string& key) {
    if (w.empty()) throw ConfigError("'" + key + "' is empty");
    for (const auto& [lo, hi] : w)
        if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
            throw ConfigError("'" + key + "': intervals must be nonempty subsets of [0,1]");
}

void check_data(const std::string& d, const std::string& key) {
    if (d != "sine" && d != "random" && d != "zero")
        throw ConfigError("'" + key + "' must be \"sine\", \"random\" or \"zero\"");
}

ProfileConfig parse_profile(Table t, const fs::path& base) {
    ProfileConfig p;
    p.type = t.string("type");
    if (p.type == "prototype") {
        p.alpha = t.number("alpha");
        p.x0 = t.number("x0");
        p.samples = static_cast<std::size_t>(t.integer("samples", 1001));
        p.allow_override = t.boolean("allow_override", false);
    } else if (p.type == "constant") {
        p.value = t.number("value", 1.0);
        p.samples = static_cast<std::size_t>(t.integer("samples", 1001));
    } else if (p.type == "csv") {
        p.csv = base / t.string("path");
        if (t.has("x0")) p.csv_x0 = t.number("x0");
        if (t.has("K")) p.csv_K = t.number("K");
    } else {
        throw ConfigError("profile.type must be \"prototype\", \"constant\" or \"csv\"");
    }
    t.finish();
    return p;
}

std::vector<fs::path> toml_files(const fs::path& dir, const fs::path& exclude = {}) {
    if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".toml" &&
            (exclude.empty() || !fs::equivalent(e.path(), exclude)))
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

const Json& empty_table() {
    static const Json e = Json::object();
    return e;
}

// ---------------------------------------------------------------------------
// data

std::function<double(double)> nodal_function(std::vector<double> x, std::vector<double> y) {
    return [x = std::move(x), y = std::move(y)](double t) {
        auto it = std::lower_bound(x.begin(), x.end(), t);
        if (it == x.end()) return y.back();
        const auto k = static_cast<std::size_t>(it - x.begin());
        if (*it == t || k == 0) return y[k];
        const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
        return (1.0 - w) * y[k - 1] + w * y[k];
    };
}

std::function<double(double)> data_function(const Scenario& s, const mesh::SpaceGrid& g, std::uint64_t offset = 0) {
    if (s.data == "zero") return [](double) { return 0.0; };
    if (s.data == "random") return nodal_function(g.nodes, pde::random_sine_series(g, *s.seed + offset, s.terms));
    return [](double x) { return std::sin(std::numbers::pi * x); };
}

std::vector<coeff::Interval> to_intervals(const Intervals& w) {
    std::vector<coeff::Interval> out;
    for (const auto& [lo, hi] : w) out.push_back({lo, hi});
    return out;
}

// ---------------------------------------------------------------------------
// output

Json round_tree(const Json& j) {
    if (j.is_number_float()) return number(j.get<double>());
    if (j.is_array() || j.is_object()) {
        Json out = j.is_array() ? Json::array() : Json::object();
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (j.is_array())
                out.push_back(round_tree(*it));
            else
                out[it.key()] = round_tree(it.value());
        }
        return out;
    }
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

class Artifacts {
public:
    Artifacts(const fs::path& dir, Section& sec) : dir_(dir), sec_(sec) { fs::create_directories(dir); }

    std::ofstream open(const std::string& name, bool binary = false) {
        sec_.artifacts.push_back(name);
        std::ofstream out(dir_ / name, binary ? std::ios::binary : std::ios::out | std::ios::binary);
        if (!out) throw Error("cannot write " + (dir_ / name).string());
        return out;
    }
    void json(const std::string& name, const Json& j) {
        sec_.artifacts.push_back(name);
        write_json(dir_ / name, round_tree(j));
    }

private:
    fs::path dir_;
    Section& sec_;
};

Json control_summary(const control::ControlResult& r) {
    Json j = Json::object();
    j["final_residual"] = number(r.final_residual);
    j["initial_norm"] = number(r.initial_norm);
    j["relative_residual"] = number(r.initial_norm > 0.0 ? r.final_residual / r.initial_norm : 0.0);
    j["cost"] = number(r.cost);
    j["cost_bound_constant"] = number(r.cost_bound_constant);
    j["epsilon"] = number(r.epsilon);
    j["duality_defect"] = number(r.duality_defect);
    j["cg_iterations"] = r.cg_iterations;
    j["converged"] = r.converged;
    return j;
}

Json observability_json(const control::ObservabilityReport& r) {
    Json j = Json::object();
    j["C_T"] = number(r.C_T);
    j["method"] = r.method;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["nodes"] = r.nodes;
    j["steps"] = r.steps;
    j["T"] = number(r.T);
    j["trace"] = numbers(r.trace);
    return j;
}

Json inequality_json(const weights::InequalityReport& r) {
    Json j = Json::object();
    j["variant"] = r.variant;
    j["s0"] = number(r.s0);
    j["s0_found"] = r.s0_found;
    j["sup_ratio"] = number(r.sup_ratio);
    j["verdict"] = std::string(weights::to_string(r.verdict));
    return j;
}

// ---------------------------------------------------------------------------
// tasks

struct Setup {
    coeff::CoefficientProfile profile;
    mesh::SpaceGrid grid;
    mesh::TimeGrid tgrid;
    pde::ProblemSpec spec;
};

Setup make_setup(const Scenario& s) {
    auto p = build_profile(s);
    auto g = mesh::build_grid(s.grid.N, p, s.grid.grading);
    Setup st{p, g, mesh::TimeGrid(s.grid.T, s.grid.M), pde::ProblemSpec{.profile = p, .form = s.form}};
    st.spec.theta = s.grid.theta;
    st.spec.omega = to_intervals(s.omega);
    if (s.reaction != 0.0) st.spec.c = [c = s.reaction](double, double) { return c; };
    st.spec.u0 = data_function(s, g);
    return st;
}

void run_solve(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    pde::Solver solver(st.spec, st.grid, st.tgrid);
    const auto u0 = solver.sample(st.spec.u0);
    const auto u = solver.forward(u0);
    const auto e = pde::energy_estimate_check(u, solver);
    {
        auto f = out.open("field.csv");
        pde::write_field_csv(u, f);
    }
    if (s.binary) {
        auto f = out.open("field.dgf", true);
        pde::write_field_binary(u, f);
    }
    auto& r = sec.results;
    r["nodes"] = st.grid.size();
    r["steps"] = st.tgrid.M;
    r["initial_norm"] = number(solver.norm(u0));
    r["final_norm"] = number(solver.norm(u.row(u.steps)));
    r["energy_lhs"] = number(e.lhs);
    r["energy_rhs"] = number(e.rhs);
    r["energy_constant"] = e.constant ? number(*e.constant) : Json(nullptr);
    sec.verdict = (!e.constant || std::isfinite(*e.constant)) ? Verdict::Pass : Verdict::Fail;
    out.json("solve.json", r);
}

void run_observe(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    Json j = Json::object();
    std::optional<double> power, dense;
    if (s.method == "power" || s.method == "both") {
        control::PowerOptions o;
        o.seed = *s.seed;
        auto r = control::estimate_observability_constant(st.spec, st.grid, st.tgrid, o);
        power = r.C_T;
        j["power"] = observability_json(r);
    }
    if (s.method == "dense" || s.method == "both") {
        auto r = control::dense_observability_constant(st.spec, st.grid, st.tgrid);
        dense = r.C_T;
        j["dense"] = observability_json(r);
    }
    sec.verdict = Verdict::Pass;
    if (power) sec.results["C_T_power"] = number(*power);
    if (dense) sec.results["C_T_dense"] = number(*dense);
    if (power && dense) {
        const double rel = std::abs(*power - *dense) / *dense;
        sec.results["relative_gap"] = number(rel);
        j["relative_gap"] = number(rel);
        if (!(rel <= 0.01)) sec.verdict = Verdict::Fail;
    }
    out.json("observability.json", j);
}

void write_h(const pde::Field& h, Artifacts& out) {
    auto f = out.open("h.csv");
    pde::write_field_csv(h, f);
}

void run_control(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    control::CgOptions cg{s.cg_tol, s.cg_max_iters};
    auto r = st.spec.omega.size() == 2 ? control::two_piece_control(st.spec, st.grid, st.tgrid, s.epsilon, cg)
                                       : control::hum_null_control(st.spec, st.grid, st.tgrid, s.epsilon, cg);
    sec.results = control_summary(r);
    sec.warnings = r.warnings;
    sec.verdict = r.final_residual <= s.residual_tol * r.initial_norm ? Verdict::Pass : Verdict::Fail;
    Json j = sec.results;
    j["cg_trace"] = numbers(r.cg_trace);
    j["warnings"] = r.warnings;
    out.json("control.json", j);
    write_h(r.h, out);
}

void run_carleman(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    if (!st.profile.degenerate()) throw ConfigError("carleman: the profile must be degenerate");
    auto w = weights::build_degenerate_weight(st.profile, st.grid, s.form, s.c1, s.margin, s.R);
    const auto s_grid = weights::default_s_grid(w, st.tgrid.T, s.s_points);
    pde::ProblemSpec free{.profile = st.profile, .form = s.form};
    free.theta = s.grid.theta;
    pde::Solver solver(free, st.grid, st.tgrid);
    Json samples = Json::array();
    double sup = 0.0;
    bool pass = true;
    for (int k = 0; k < s.samples; ++k) {
        const auto vT = pde::random_sine_series(st.grid, *s.seed + static_cast<std::uint64_t>(k), s.terms);
        const auto v = solver.adjoint(vT).v;
        const auto rep = weights::carleman_ratio(v, w, st.profile, st.tgrid, s_grid, s.form);
        auto f = out.open("carleman_" + std::to_string(k) + ".csv");
        weights::write_inequality_csv(rep, f);
        Json e = inequality_json(rep);
        e["sample"] = k;
        samples.push_back(e);
        sup = std::max(sup, rep.sup_ratio);
        pass = pass && rep.verdict == weights::InequalityVerdict::Pass;
    }
    sec.results["variant"] = std::string(weights::to_string(w.variant));
    sec.results["c1"] = number(w.c1);
    sec.results["c2"] = number(w.c2);
    // gluing to an A2 weight on the outer 60% of each side
    const double x0 = *st.profile.x0();
    double bound = 0.0;
    for (int side : {-1, +1}) {
        const coeff::Interval iv = side > 0 ? coeff::Interval{x0 + 0.4 * (1.0 - x0), 1.0}
                                            : coeff::Interval{0.0, 0.6 * x0};
        const auto g = mesh::build_grid_on(iv.lo, iv.hi, 20, std::nullopt);
        const auto nd = weights::build_nondegenerate_weight(st.profile, g, nullptr, weights::Variant::NonDegA2, 1.0, iv);
        bound = std::max(bound, weights::c1_lower_bound(w, nd, st.profile, side));
    }
    sec.results["c1_gluing_bound"] = number(bound);
    sec.results["c1_bound_honored"] = w.c1 >= bound;
    sec.results["samples"] = s.samples;
    sec.results["sup_ratio"] = number(sup);
    sec.verdict = pass ? Verdict::Pass : Verdict::Fail;
    Json j = sec.results;
    j["per_sample"] = samples;
    out.json("carleman.json", j);
}

void run_hardy(const Scenario& s, Section& sec, Artifacts& out) {
    const double x0 = s.hardy_x0, q = s.exponent;
    auto g = mesh::build_grid_on(0.0, 1.0, s.grid.N, x0, s.grid.grading);
    auto p = [x0, q](double x) { return std::pow(std::abs(x - x0), q); };
    auto res = weights::hardy_poincare_constant(p, x0, g);
    double worst = 0.0;
    for (int k = 0; k < s.tests; ++k) {
        const auto w = pde::random_sine_series(g, *s.seed + static_cast<std::uint64_t>(k), s.terms);
        worst = std::max(worst, weights::hardy_ratio(p, x0, g, w));
    }
    auto& r = sec.results;
    r["C_HP"] = number(res.constant);
    r["certified"] = res.certified;
    r["min_log_quotient"] = number(res.min_log_quotient);
    r["N"] = s.grid.N;
    r["x0"] = number(x0);
    r["exponent"] = number(q);
    r["tests"] = s.tests;
    r["max_test_ratio"] = number(worst);
    sec.verdict = res.certified && worst <= res.constant * (1.0 + 1e-9) ? Verdict::Pass : Verdict::Fail;
    out.json("hardy.json", r);
}

void run_caccioppoli(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    auto w = st.profile.degenerate()
                 ? weights::build_degenerate_weight(st.profile, st.grid, s.form, s.c1, s.margin, s.R)
                 : weights::build_nondegenerate_weight(st.profile, st.grid, nullptr, weights::Variant::NonDegA2,
                                                       1.0, {0.0, 1.0});
    const auto s_grid = weights::default_s_grid(w, st.tgrid.T, s.s_points);
    pde::ProblemSpec free{.profile = st.profile, .form = s.form};
    free.theta = s.grid.theta;
    pde::Solver solver(free, st.grid, st.tgrid);
    const auto v = solver.adjoint(solver.sample(data_function(s, st.grid))).v;
    const auto inner = s.omega_inner.front();
    const auto outer = s.omega.front();
    const auto rep = weights::caccioppoli_check(v, w, st.tgrid, {inner.first, inner.second},
                                                {outer.first, outer.second}, s_grid, st.profile.x0());
    {
        auto f = out.open("caccioppoli.csv");
        weights::write_inequality_csv(rep, f);
    }
    bool finite = true;
    double sup = 0.0;
    for (double r : rep.ratio) {
        finite = finite && std::isfinite(r);
        sup = std::max(sup, r);
    }
    sec.results["sup_ratio"] = number(sup);
    sec.results["finite"] = finite;
    sec.verdict = finite ? Verdict::Pass : Verdict::Fail;
    out.json("caccioppoli.json", sec.results);
}

void run_regional(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    auto rr = control::regional_control_cutoff(st.spec, st.grid, st.tgrid, s.r_outer, s.r_inner);
    sec.results = control_summary(rr.control);
    const auto& t = rr.trace;
    sec.results["h_norm"] = number(t.h_norm);
    sec.results["h_max_near_x0"] = number(t.h_max_near_x0);
    sec.results["replay_residual"] = number(t.replay_residual);
    sec.results["left_residual"] = number(t.left_residual);
    sec.results["right_residual"] = number(t.right_residual);
    sec.results["dropped_outside"] = number(t.dropped_outside);
    sec.verdict = rr.control.final_residual <= 1e-10 ? Verdict::Pass : Verdict::Fail;
    out.json("regional.json", sec.results);
    write_h(rr.control.h, out);
}

void run_semilinear(const Scenario& s, Section& sec, Artifacts& out) {
    auto st = make_setup(s);
    const double c = s.scale;
    control::Nonlinearity nl{[c](double, double, double u) { return c * std::sin(u); },
                             [c](double, double, double u) { return c * std::cos(u); }, std::abs(c)};
    auto r = control::semilinear_null_control(st.spec, nl, st.grid, st.tgrid, s.epsilon, {s.cg_tol, s.cg_max_iters},
                                              {s.picard_tol, s.picard_max_iters});
    sec.results = control_summary(r.control);
    sec.results["iterations"] = r.iterations;
    sec.results["picard_converged"] = r.converged;
    sec.results["diverging"] = r.diverging;
    sec.verdict = r.converged && r.control.final_residual <= s.residual_tol * r.control.initial_norm
                      ? Verdict::Pass
                      : Verdict::Fail;
    Json j = sec.results;
    j["increments"] = numbers(r.increments);
    j["residuals"] = numbers(r.residuals);
    out.json("semilinear.json", j);
    write_h(r.control.h, out);
}

Json versions() {
    Json v = Json::object();
    v["degenctrl"] = DEGENCTRL_VERSION;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    v["boost"] = std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                 std::to_string(BOOST_VERSION % 100);
    v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                         std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    return v;
}

Section run_suite_members(const Scenario& s, std::vector<Section>& members);

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Task t) {
    for (const auto& [task, name] : kTaskNames)
        if (task == t) return name;
    return "?";
}

Task parse_task(std::string_view text) {
    for (const auto& [task, name] : kTaskNames)
        if (name == text) return task;
    throw ConfigError("unknown task '" + std::string(text) + "'");
}

Json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

Scenario parse_scenario(std::string_view text, const fs::path& base, const std::string& source) {
    Scenario s;
    s.inputs = config::parse_toml(text, source);
    s.source = source;
    Table t(s.inputs, "");
    s.name = t.string("name");
    if (s.name.empty() ||
        !std::all_of(s.name.begin(), s.name.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }))
        throw ConfigError("name must be a nonempty word of letters, digits, '_', '-' or '.'");
    s.task = parse_task(t.string("task"));
    if (t.has("seed")) {
        const auto seed = t.integer("seed");
        if (seed < 0) throw ConfigError("seed must be nonnegative");
        s.seed = static_cast<std::uint64_t>(seed);
    }
    s.output = base / t.string("output", "out/" + s.name);

    if (s.task == Task::Suite) {
        Table o = t.table("suite");
        if (o.has("scenarios")) {
            const auto& list = o.raw("scenarios");
            if (!list.is_array()) throw ConfigError("suite.scenarios must be a list of files");
            for (const auto& e : list) {
                if (!e.is_string()) throw ConfigError("suite.scenarios must be a list of files");
                s.members.push_back(base / e.get<std::string>());
            }
        } else {
            const fs::path dir = base / o.string("directory");
            s.members = toml_files(dir, fs::exists(source) ? fs::path(source) : fs::path());
        }
        o.finish();
        t.finish();
        return s;
    }

    s.form = coeff::parse_form(t.string("form", "divergence"));
    if (s.task != Task::Hardy) s.profile = parse_profile(t.table("profile"), base);
    {
        Table g = t.table("grid");
        const auto N = g.integer("N");
        if (N < 8) throw ConfigError("grid.N must be at least 8");
        s.grid.N = static_cast<std::size_t>(N);
        if (needs_time(s.task)) {
            const auto M = g.integer("M");
            if (M < 2) throw ConfigError("grid.M must be at least 2");
            s.grid.M = static_cast<int>(M);
            s.grid.T = g.number("T", 1.0);
            if (!(s.grid.T > 0.0)) throw ConfigError("grid.T must be positive");
            s.grid.theta = g.number("theta", 1.0);
            if (!(s.grid.theta >= 0.5 && s.grid.theta <= 1.0)) throw ConfigError("grid.theta must lie in [1/2, 1]");
        }
        s.grid.grading = g.number("grading", 1.0);
        g.finish();
    }

    const std::string tname(to_string(s.task));
    Table o = t.has(tname) ? t.table(tname) : Table(empty_table(), tname);
    auto cg_keys = [&] {
        s.cg_tol = o.number("cg_tol", s.cg_tol);
        s.cg_max_iters = static_cast<int>(o.integer("cg_max_iters", s.cg_max_iters));
        if (o.has("epsilon")) {
            s.epsilon = o.number("epsilon");
            if (!(*s.epsilon > 0.0)) throw ConfigError(tname + ".epsilon must be positive");
        }
    };
    auto data_keys = [&](const char* key) {
        s.data = o.string(key, "sine");
        check_data(s.data, tname + "." + key);
        s.terms = static_cast<int>(o.integer("terms", s.terms));
    };
    bool random = false;
    switch (s.task) {
        case Task::Solve:
            data_keys("u0");
            s.binary = o.boolean("binary", true);
            random = s.data == "random";
            break;
        case Task::Observe:
            s.omega = o.intervals("omega");
            s.method = o.string("method", "power");
            if (s.method != "power" && s.method != "dense" && s.method != "both")
                throw ConfigError("observe.method must be \"power\", \"dense\" or \"both\"");
            random = s.method != "dense";
            break;
        case Task::Control:
            s.omega = o.intervals("omega");
            data_keys("u0");
            cg_keys();
            s.reaction = o.number("reaction", 0.0);
            s.residual_tol = o.number("residual_tol", s.residual_tol);
            random = s.data == "random";
            break;
        case Task::Carleman:
            s.c1 = o.number("c1", s.c1);
            s.margin = o.number("margin", s.margin);
            s.R = o.number("R", s.R);
            s.samples = static_cast<int>(o.integer("samples", s.samples));
            s.terms = static_cast<int>(o.integer("terms", s.terms));
            s.s_points = static_cast<int>(o.integer("s_points", s.s_points));
            if (s.samples < 1) throw ConfigError("carleman.samples must be at least 1");
            random = true;
            break;
        case Task::Hardy:
            s.exponent = o.number("exponent", s.exponent);
            s.hardy_x0 = o.number("x0", s.hardy_x0);
            s.tests = static_cast<int>(o.integer("tests", s.tests));
            s.terms = static_cast<int>(o.integer("terms", s.terms));
            if (!(s.hardy_x0 > 0.0 && s.hardy_x0 < 1.0)) throw ConfigError("hardy.x0 must lie in (0,1)");
            if (s.tests < 0) throw ConfigError("hardy.tests must be nonnegative");
            random = s.tests > 0;
            break;
        case Task::Caccioppoli:
            s.omega = o.intervals("omega");
            s.omega_inner = o.intervals("omega_inner");
            data_keys("vT");
            s.c1 = o.number("c1", s.c1);
            s.margin = o.number("margin", s.margin);
            s.s_points = static_cast<int>(o.integer("s_points", s.s_points));
            if (s.omega.size() != 1 || s.omega_inner.size() != 1)
                throw ConfigError("caccioppoli: omega and omega_inner must be single intervals");
            check_intervals(s.omega_inner, "caccioppoli.omega_inner");
            random = s.data == "random";
            break;
        case Task::Regional:
            s.omega = o.intervals("omega");
            s.r_outer = o.number("r_outer");
            s.r_inner = o.number("r_inner");
            data_keys("u0");
            random = s.data == "random";
            break;
        case Task::Semilinear:
            s.omega = o.intervals("omega");
            data_keys("u0");
            cg_keys();
            s.scale = o.number("scale", s.scale);
            s.picard_tol = o.number("tol", s.picard_tol);
            s.picard_max_iters = static_cast<int>(o.integer("max_iters", s.picard_max_iters));
            s.residual_tol = o.number("residual_tol", s.residual_tol);
            random = s.data == "random";
            break;
        case Task::Suite: break;
    }
    o.finish();
    t.finish();
    if (!s.omega.empty()) check_intervals(s.omega, tname + ".omega");
    if (s.terms < 1) throw ConfigError(tname + ".terms must be at least 1");
    if (random && !s.seed) throw ConfigError("seed is required: task '" + tname + "' draws random data");

    // building the profile and the grids surfaces range errors before any work
    if (s.profile) {
        auto p = build_profile(s);
        mesh::build_grid(s.grid.N, p, s.grid.grading);
    } else {
        mesh::build_grid_on(0.0, 1.0, s.grid.N, s.hardy_x0, s.grid.grading);
    }
    if (needs_time(s.task)) mesh::TimeGrid(s.grid.T, s.grid.M);
    return s;
}

Scenario load_scenario(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path(), path.string());
}

coeff::CoefficientProfile build_profile(const Scenario& s) {
    if (!s.profile) throw ConfigError("scenario '" + s.name + "' has no profile");
    const auto& p = *s.profile;
    if (p.type == "prototype") {
        coeff::ProfileOptions opt;
        opt.allow_exponent_override = p.allow_override;
        return coeff::make_prototype_profile(p.alpha, p.x0, p.samples, opt);
    }
    if (p.type == "constant") return coeff::make_constant_profile(p.value, p.samples);
    std::ifstream in(p.csv);
    if (!in) throw ConfigError("cannot open profile " + p.csv.string());
    return coeff::read_profile_csv(in, p.csv_x0, p.csv_K);
}

Report emit_report(const std::vector<Section>& sections) {
    Report rep;
    rep.json = Json::object();
    rep.json["sections"] = Json::array();
    std::ostringstream text;
    text << "sections: " << sections.size() << "\n";
    for (const auto& s : sections) {
        Json j = Json::object();
        j["name"] = s.name;
        j["task"] = s.task;
        j["verdict"] = std::string(verdict_name(s.verdict));
        j["results"] = round_tree(s.results);
        j["artifacts"] = s.artifacts;
        j["warnings"] = s.warnings;
        text << "\n[" << s.name << "] " << s.task << ": " << verdict_name(s.verdict) << "\n";
        for (auto it = j["results"].begin(); it != j["results"].end(); ++it) {
            const auto& v = it.value();
            text << "  " << it.key() << " = ";
            if (v.is_string())
                text << v.get<std::string>();
            else if (v.is_array() && v.size() > 8)
                text << "[" << v.size() << " values]";
            else
                text << v.dump();
            text << "\n";
        }
        for (const auto& w : s.warnings) text << "  warning: " << w << "\n";
        rep.json["sections"].push_back(std::move(j));
    }
    rep.text = text.str();
    return rep;
}

namespace {

Section run_suite_members(const Scenario& s, std::vector<Section>& members) {
    Section sec{.name = s.name, .task = "suite"};
    int failed = 0, errors = 0;
    for (const auto& path : s.members) {
        Section m;
        try {
            auto child = load_scenario(path);
            if (child.task == Task::Suite) throw ConfigError("nested suites are not supported");
            m = run(child);
        } catch (const std::exception& e) {
            m.name = path.stem().string();
            m.task = "?";
            m.verdict = Verdict::Error;
            m.results["error"] = e.what();
        }
        failed += m.verdict == Verdict::Fail;
        errors += m.verdict == Verdict::Error;
        members.push_back(std::move(m));
    }
    sec.results["scenarios"] = static_cast<int>(members.size());
    sec.results["failed"] = failed;
    sec.results["errors"] = errors;
    sec.verdict = errors ? Verdict::Error : failed ? Verdict::Fail : Verdict::Pass;
    return sec;
}

}  // namespace

Section run(const Scenario& s) {
    Section sec{.name = s.name, .task = std::string(to_string(s.task))};
    Artifacts out(s.output, sec);
    std::vector<Section> members;
    switch (s.task) {
        case Task::Solve: run_solve(s, sec, out); break;
        case Task::Observe: run_observe(s, sec, out); break;
        case Task::Control: run_control(s, sec, out); break;
        case Task::Carleman: run_carleman(s, sec, out); break;
        case Task::Hardy: run_hardy(s, sec, out); break;
        case Task::Caccioppoli: run_caccioppoli(s, sec, out); break;
        case Task::Regional: run_regional(s, sec, out); break;
        case Task::Semilinear: run_semilinear(s, sec, out); break;
        case Task::Suite: {
            sec = run_suite_members(s, members);
            auto all = members;
            const auto rep = emit_report(all);
            out.json("suite.json", rep.json);
            break;
        }
    }

    Json m = Json::object();
    m["name"] = s.name;
    m["task"] = std::string(to_string(s.task));
    m["seed"] = s.seed ? Json(*s.seed) : Json(nullptr);
    m["config"] = fs::path(s.source).filename().string();
    m["versions"] = versions();
    m["inputs"] = round_tree(s.inputs);
    m["verdict"] = std::string(verdict_name(sec.verdict));
    m["results"] = round_tree(sec.results);
    m["warnings"] = sec.warnings;
    sec.artifacts.push_back("summary.txt");
    sec.artifacts.push_back("manifest.json");
    m["artifacts"] = sec.artifacts;
    write_json(s.output / "manifest.json", m);

    std::vector<Section> shown{sec};
    shown.insert(shown.end(), members.begin(), members.end());
    write_text(s.output / "summary.txt", emit_report(shown).text);
    return sec;
}

int run_command(const fs::path& config, std::ostream& out, std::ostream& err) {
    try {
        const auto s = load_scenario(config);
        const auto sec = run(s);
        std::ifstream summary(s.output / "summary.txt");
        out << summary.rdbuf();
        return sec.verdict == Verdict::Pass ? 0 : sec.verdict == Verdict::Fail ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int suite_command(const fs::path& dir, std::ostream& out, std::ostream& err,
                  const std::optional<fs::path>& report) {
    try {
        Scenario s;
        s.name = dir.filename().string();
        s.task = Task::Suite;
        s.members = toml_files(dir);
        std::vector<Section> members;
        const auto sec = run_suite_members(s, members);
        const auto rep = emit_report(members);
        out << rep.text;
        if (report) write_json(*report, rep.json);
        for (const auto& m : members)
            if (m.verdict == Verdict::Error) err << "error in " << m.name << ": " << m.results["error"].get<std::string>() << "\n";
        return sec.verdict == Verdict::Pass ? 0 : sec.verdict == Verdict::Fail ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int validate_command(const fs::path& config, std::ostream& out, std::ostream& err) {
    try {
        const auto s = load_scenario(config);
        for (const auto& m : s.members) load_scenario(m);
        out << "ok: " << s.name << " (" << to_string(s.task) << ")\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int main_entry(int argc, char** argv) {
    kernels::apply_thread_cap_from_env();
    CLI::App app{"Degenerate parabolic control toolkit", "degenctrl"};
    app.require_subcommand(1);
    std::string config, dir, report;

    auto* run_cmd = app.add_subcommand("run", "Run one scenario file");
    run_cmd->add_option("config", config, "Scenario TOML file")->required();
    auto* suite_cmd = app.add_subcommand("suite", "Run every scenario file in a directory");
    suite_cmd->add_option("dir", dir, "Directory of scenario files")->required();
    suite_cmd->add_option("--report", report, "Write the combined JSON report here");
    auto* validate_cmd = app.add_subcommand("validate", "Parse and check a scenario file");
    validate_cmd->add_option("config", config, "Scenario TOML file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (*run_cmd) return run_command(config, std::cout, std::cerr);
    if (*suite_cmd)
        return suite_command(dir, std::cout, std::cerr, report.empty() ? std::nullopt : std::optional<fs::path>(report));
    return validate_command(config, std::cout, std::cerr);
}

}  // namespace degenctrl::cli

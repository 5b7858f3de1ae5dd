#include "degenctrl/coeff.hpp"

#include "degenctrl/error.hpp"
#include "degenctrl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace degenctrl::coeff {

namespace {

constexpr double kSnap = 1e-14;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// Local exponent of a sampled coefficient at x0, from the two samples nearest
// to x0 on one side.
double side_exponent(const std::vector<double>& x, const std::vector<double>& a, std::size_t i0,
                     int dir, double fallback) {
    const long i1 = static_cast<long>(i0) + dir;
    const long i2 = static_cast<long>(i0) + 2 * dir;
    if (i2 < 0 || i2 >= static_cast<long>(x.size())) return fallback;
    const double y1 = std::abs(x[i1] - x[i0]);
    const double y2 = std::abs(x[i2] - x[i0]);
    const double a1 = a[i1];
    const double a2 = a[i2];
    if (a1 <= 0 || a2 <= 0) return fallback;
    return std::log(a2 / a1) / std::log(y2 / y1);
}

}  // namespace

std::string_view to_string(Kind kind) {
    switch (kind) {
        case Kind::WeaklyDegenerate: return "weakly_degenerate";
        case Kind::StronglyDegenerate: return "strongly_degenerate";
        case Kind::NonDegenerate: return "non_degenerate";
    }
    return "?";
}

std::string_view to_string(Form form) {
    return form == Form::Divergence ? "divergence" : "non_divergence";
}

Form parse_form(std::string_view text) {
    if (text == "divergence" || text == "div") return Form::Divergence;
    if (text == "non_divergence" || text == "nondivergence" || text == "non-divergence" ||
        text == "nondiv")
        return Form::NonDivergence;
    throw ConfigError("unknown form '" + std::string(text) + "'");
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::NotApplicable: return "not_applicable";
    }
    return "?";
}

Kind classify(double K) {
    return K < 1.0 ? Kind::WeaklyDegenerate : Kind::StronglyDegenerate;
}

// ---------------------------------------------------------------------------

CoefficientProfile::CoefficientProfile(std::vector<double> x, std::vector<double> a, ScalarFn closed_form,
                                       ScalarFn offset_form, std::optional<double> x0, double K,
                                       std::optional<double> theta, std::optional<double> sigma,
                                       std::string description, bool beyond_admissible)
    : x_(std::move(x)),
      a_(std::move(a)),
      closed_form_(std::move(closed_form)),
      offset_form_(std::move(offset_form)),
      x0_(x0),
      K_(K),
      theta_(theta),
      sigma_(sigma),
      description_(std::move(description)),
      beyond_admissible_(beyond_admissible) {
    if (x_.size() != a_.size()) throw ShapeError("profile: abscissa and sample counts differ");
    if (x_.size() < 3) throw PreconditionError("profile: at least 3 samples are required");
    for (std::size_t i = 1; i < x_.size(); ++i)
        if (!(x_[i] > x_[i - 1])) throw InvalidProfileError("profile: abscissas must increase strictly");
    if (std::abs(x_.front()) > kSnap || std::abs(x_.back() - 1.0) > kSnap)
        throw InvalidProfileError("profile: samples must span [0,1]");
    for (std::size_t i = 0; i < a_.size(); ++i)
        if (!(a_[i] >= 0.0) || !std::isfinite(a_[i]))
            throw InvalidProfileError("profile: a(" + fmt(x_[i]) + ") = " + fmt(a_[i]) + " is negative");
    if (x0_) {
        if (!(*x0_ > 0.0 && *x0_ < 1.0)) throw DomainError("profile: x0 must lie in (0,1)");
        for (std::size_t i = 0; i < x_.size(); ++i)
            if (std::abs(x_[i] - *x0_) <= kSnap) x0_sample_ = i;
        if (!x0_sample_) throw InvalidProfileError("profile: x0 must coincide with a sample");
        const double upper = beyond_admissible_ ? kInf : 2.0;
        if (!(K_ > 0.0 && K_ < upper))
            throw DomainError("profile: degeneracy exponent K=" + fmt(K_) +
                              " outside the admissible range (0,2)");
        kind_ = classify(K_);
    } else {
        kind_ = Kind::NonDegenerate;
    }
}

double CoefficientProfile::sup_norm() const {
    return *std::max_element(a_.begin(), a_.end());
}

double CoefficientProfile::operator()(double x) const {
    if (closed_form_) return closed_form_(x);
    if (x0_ && offset_form_) return offset_form_(x - *x0_);
    if (x <= x_.front()) return a_.front();
    if (x >= x_.back()) return a_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - x_.begin());
    const std::size_t i = j - 1;
    if (x0_sample_ && (i == *x0_sample_ || j == *x0_sample_)) {
        // Power-law model on the cells touching x0 so that a vanishes like |x-x0|^K.
        const std::size_t nb = (i == *x0_sample_) ? j : i;
        const double h = std::abs(x_[nb] - *x0_);
        return a_[nb] * std::pow(std::abs(x - *x0_) / h, K_);
    }
    const double w = (x - x_[i]) / (x_[j] - x_[i]);
    return (1.0 - w) * a_[i] + w * a_[j];
}

double CoefficientProfile::at_offset(double y) const {
    if (offset_form_) return offset_form_(y);
    if (!x0_) return (*this)(y);
    return (*this)(*x0_ + y);
}

double CoefficientProfile::integral_of_inverse_power(double lo, double hi, double power) const {
    if (hi < lo) return -integral_of_inverse_power(hi, lo, power);
    if (hi == lo) return 0.0;
    if (!x0_ || !(lo <= *x0_ + kSnap && *x0_ - kSnap <= hi)) {
        return quad::integrate([&](double x) { return std::pow((*this)(x), -power); }, lo, hi);
    }
    const double x0 = *x0_;
    if (lo < x0 - kSnap && hi > x0 + kSnap)
        return integral_of_inverse_power(lo, x0, power) + integral_of_inverse_power(x0, hi, power);
    const double p = power * K_;
    if (p >= 1.0) return kInf;
    if (std::abs(lo - x0) <= kSnap) {
        const double d = hi - x0;
        return quad::integrate_singular_at_zero(
            [&](double y) { return std::pow(at_offset(y), -power); }, d, p);
    }
    const double d = x0 - lo;
    return quad::integrate_singular_at_zero(
        [&](double y) { return std::pow(at_offset(-y), -power); }, d, p);
}

// ---------------------------------------------------------------------------

std::vector<double> sample_abscissas(std::size_t n, std::optional<double> x0) {
    if (n < 3) throw PreconditionError("profile: at least 3 samples are required");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    if (x0) {
        auto it = std::lower_bound(x.begin(), x.end(), *x0);
        if (it != x.end() && std::abs(*it - *x0) <= kSnap) {
            *it = *x0;
        } else if (it != x.begin() && std::abs(*(it - 1) - *x0) <= kSnap) {
            *(it - 1) = *x0;
        } else {
            x.insert(it, *x0);
        }
    }
    return x;
}

CoefficientProfile make_prototype_profile(double alpha, double x0, std::size_t n, ProfileOptions options) {
    if (!(x0 > 0.0 && x0 < 1.0)) throw DomainError("prototype: x0 must lie in (0,1)");
    const double upper = options.allow_exponent_override ? kInf : 2.0;
    if (!(alpha > 0.0 && alpha < upper))
        throw DomainError("prototype: exponent alpha=" + fmt(alpha) +
                          " outside the admissible range (0,2)");
    auto x = sample_abscissas(n, x0);
    std::vector<double> a(x.size());
    auto offset = [alpha](double y) { return std::pow(std::abs(y), alpha); };
    auto closed = [alpha, x0](double t) { return std::pow(std::abs(t - x0), alpha); };
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = (x[i] == x0) ? 0.0 : closed(x[i]);
    std::optional<double> sigma;
    if (alpha > 1.5) sigma = alpha * std::pow(std::max(x0, 1.0 - x0), 2.0 - alpha);
    std::ostringstream desc;
    desc << "prototype |x-" << x0 << "|^" << alpha;
    return CoefficientProfile(std::move(x), std::move(a), closed, offset, x0, alpha, alpha, sigma,
                              desc.str(), alpha >= 2.0);
}

CoefficientProfile make_constant_profile(double value, std::size_t n) {
    if (!(value > 0.0)) throw InvalidProfileError("constant profile must be positive");
    auto x = sample_abscissas(n, std::nullopt);
    std::vector<double> a(x.size(), value);
    return CoefficientProfile(std::move(x), std::move(a), [value](double) { return value; }, {},
                              std::nullopt, 0.0, std::nullopt, std::nullopt,
                              "constant " + fmt(value));
}

CoefficientProfile make_closed_form_profile(ScalarFn fn, std::size_t n, std::string description) {
    auto x = sample_abscissas(n, std::nullopt);
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = fn(x[i]);
    return CoefficientProfile(std::move(x), std::move(a), std::move(fn), {}, std::nullopt, 0.0,
                              std::nullopt, std::nullopt, std::move(description));
}

CoefficientProfile make_sampled_profile(std::vector<double> x, std::vector<double> a,
                                        std::optional<double> x0, std::optional<double> K,
                                        std::optional<double> theta, std::optional<double> sigma) {
    if (x.size() != a.size()) throw ShapeError("profile: abscissa and sample counts differ");
    if (!x0) {
        for (std::size_t i = 1; i + 1 < x.size(); ++i)
            if (a[i] == 0.0) x0 = x[i];
    }
    double k = 0.0;
    if (x0) {
        if (K) {
            k = *K;
        } else {
            // Largest log-log slope over cells not touching x0.
            std::size_t i0 = x.size();
            for (std::size_t i = 0; i < x.size(); ++i)
                if (std::abs(x[i] - *x0) <= kSnap) i0 = i;
            if (i0 == x.size()) throw InvalidProfileError("profile: x0 must coincide with a sample");
            k = std::max(side_exponent(x, a, i0, -1, 0.0), side_exponent(x, a, i0, +1, 0.0));
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                if (i == i0 || i + 1 == i0 || a[i] <= 0 || a[i + 1] <= 0) continue;
                if ((x[i] - *x0) * (x[i + 1] - *x0) <= 0) continue;
                const double q = std::log(a[i + 1] / a[i]) /
                                 std::log(std::abs(x[i + 1] - *x0) / std::abs(x[i] - *x0));
                k = std::max(k, q);
            }
        }
    }
    return CoefficientProfile(std::move(x), std::move(a), {}, {}, x0, k, theta, sigma, "sampled");
}

void write_profile_csv(const CoefficientProfile& p, std::ostream& out) {
    out << "x,a\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < p.x().size(); ++i) out << p.x()[i] << ',' << p.samples()[i] << '\n';
}

CoefficientProfile read_profile_csv(std::istream& in, std::optional<double> x0, std::optional<double> K) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("profile csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,a") throw ConfigError("profile csv: header must be 'x,a'");
    std::vector<double> xs, as;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError("profile csv: line " + std::to_string(lineno) + " has no comma");
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            as.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ConfigError("profile csv: line " + std::to_string(lineno) + " is not numeric");
        }
    }
    return make_sampled_profile(std::move(xs), std::move(as), x0, K);
}

// ---------------------------------------------------------------------------

bool HypothesisReport::passed() const {
    return std::none_of(checks.begin(), checks.end(),
                        [](const HypothesisCheck& c) { return c.verdict == Verdict::Fail; });
}

const HypothesisCheck* HypothesisReport::find(std::string_view name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

double default_tolerance(const CoefficientProfile& p) { return 1e-8 * (1.0 + p.sup_norm()); }

IntegrabilityStudy study_integrability(const CoefficientProfile& p, double power) {
    IntegrabilityStudy s;
    s.power = power;
    constexpr int base_cells = 256;
    for (int level = 0; level < 3; ++level) {
        const int m = base_cells << level;
        double total = 0.0;
        if (p.x0()) {
            const double x0 = *p.x0();
            // Midpoints measured as offsets from x0 so they never round onto it.
            const double hl = x0 / m;
            const double hr = (1.0 - x0) / m;
            double left = 0.0, right = 0.0;
            for (int j = 0; j < m; ++j) {
                left += std::pow(p.at_offset(-(j + 0.5) * hl), -power);
                right += std::pow(p.at_offset((j + 0.5) * hr), -power);
            }
            total = left * hl + right * hr;
        } else {
            total = quad::midpoint([&](double x) { return std::pow(p(x), -power); }, 0.0, 1.0, 2 * m);
        }
        s.integrals[level] = total;
    }
    const double d1 = s.integrals[1] - s.integrals[0];
    const double d2 = s.integrals[2] - s.integrals[1];
    s.integral_ratio = s.integrals[2] / s.integrals[1];
    if (!std::isfinite(s.integrals[2])) {
        s.increment_ratio = kInf;
        s.integrable = false;
    } else if (std::abs(d1) <= 1e-13 * std::abs(s.integrals[2])) {
        s.increment_ratio = 0.0;
        s.integrable = true;
    } else {
        s.increment_ratio = std::abs(d2) / std::abs(d1);
        s.integrable = s.increment_ratio < 1.0 - 1e-3;
    }
    return s;
}

HypothesisReport check_degeneracy_hypotheses(const CoefficientProfile& p, std::optional<double> tol_in) {
    const double tol = tol_in.value_or(default_tolerance(p));
    if (!(tol > 0.0)) throw PreconditionError("check_degeneracy_hypotheses: tol must be positive");
    const auto& x = p.x();
    const auto& a = p.samples();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] < 0.0) throw InvalidProfileError("a(" + fmt(x[i]) + ") < 0");

    HypothesisReport r;
    r.kind = p.kind();

    // (i) zero/sign structure
    {
        HypothesisCheck c{"sign_structure", Verdict::Pass, 0.0, std::nullopt, tol, ""};
        for (std::size_t i = 0; i < a.size(); ++i) {
            const bool at_x0 = p.x0_sample() && *p.x0_sample() == i;
            if (at_x0) {
                if (a[i] > tol) {
                    c.verdict = Verdict::Fail;
                    c.worst_defect = a[i];
                    c.witness = x[i];
                    c.note = "a(x0) must vanish";
                }
            } else if (!(a[i] > 0.0)) {
                c.verdict = Verdict::Fail;
                c.worst_defect = std::max(c.worst_defect, -a[i]);
                c.witness = x[i];
                c.note = "a must be positive away from x0";
            }
        }
        r.checks.push_back(c);
    }

    const bool degenerate = p.degenerate();
    const double x0 = p.x0().value_or(0.0);
    const std::size_t i0 = p.x0_sample().value_or(a.size());
    auto same_side_cell = [&](std::size_t i) {
        return i != i0 && i + 1 != i0 && (x[i] - x0) * (x[i + 1] - x0) > 0 && a[i] > 0 && a[i + 1] > 0;
    };

    // (ii) (x-x0) a' <= K a, as Δ ln a / Δ ln|x-x0| <= K on every cell away from x0.
    {
        HypothesisCheck c{"growth_bound", Verdict::NotApplicable, 0.0, std::nullopt, tol, ""};
        if (degenerate) {
            c.verdict = Verdict::Pass;
            double worst = -kInf;
            double empirical = -kInf;
            std::optional<double> where;
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                if (!same_side_cell(i)) continue;
                const double q = std::log(a[i + 1] / a[i]) /
                                 std::log(std::abs(x[i + 1] - x0) / std::abs(x[i] - x0));
                empirical = std::max(empirical, q);
                const double defect = q - p.K();
                if (defect > worst) {
                    worst = defect;
                    where = x[i];
                }
            }
            r.empirical_K = std::isfinite(empirical) ? empirical : 0.0;
            c.worst_defect = std::isfinite(worst) ? worst : 0.0;
            c.witness = where;
            if (worst > tol) {
                c.verdict = Verdict::Fail;
                c.note = "log-log slope exceeds K";
            }
        }
        r.checks.push_back(c);
    }

    // (iii) a / |x-x0|^theta monotone on each side, required when K > 4/3.
    {
        HypothesisCheck c{"theta_monotonicity", Verdict::NotApplicable, 0.0, std::nullopt, tol, ""};
        if (degenerate && p.K() > 4.0 / 3.0) {
            if (!p.theta()) {
                c.verdict = Verdict::Fail;
                c.witness = x0;
                c.note = "theta is required when K > 4/3";
            } else {
                c.verdict = Verdict::Pass;
                const double th = *p.theta();
                if (!(th > 0.0 && th <= p.K() + 1e-12)) {
                    c.verdict = Verdict::Fail;
                    c.witness = x0;
                    c.note = "theta must lie in (0,K]";
                }
                double min_q = kInf;
                for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                    if (!same_side_cell(i)) continue;
                    const double qa = a[i] / std::pow(std::abs(x[i] - x0), th);
                    const double qb = a[i + 1] / std::pow(std::abs(x[i + 1] - x0), th);
                    min_q = std::min({min_q, qa, qb});
                    // left of x0 nonincreasing, right nondecreasing (in x)
                    const double defect = (x[i] < x0) ? (qb - qa) / qa : (qa - qb) / qa;
                    if (defect > c.worst_defect) {
                        c.worst_defect = defect;
                        if (defect > tol) {
                            c.verdict = Verdict::Fail;
                            c.witness = x[i];
                            c.note = "a/|x-x0|^theta not monotone";
                        }
                    }
                }
                if (p.K() > 1.5 && !(min_q > tol)) {
                    c.verdict = Verdict::Fail;
                    c.witness = x0;
                    c.note = "a/|x-x0|^theta not bounded away from 0";
                }
            }
        }
        r.checks.push_back(c);
    }

    // (iv) |a'| <= Sigma |x-x0|^(2 theta - 3), required when K > 3/2.
    {
        HypothesisCheck c{"sigma_bound", Verdict::NotApplicable, 0.0, std::nullopt, tol, ""};
        if (degenerate && p.K() > 1.5) {
            if (!p.sigma() || !p.theta()) {
                c.verdict = Verdict::Fail;
                c.witness = x0;
                c.note = "Sigma and theta are required when K > 3/2";
            } else {
                c.verdict = Verdict::Pass;
                const double e = 2.0 * *p.theta() - 3.0;
                for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                    if (!same_side_cell(i)) continue;
                    const double slope = std::abs((a[i + 1] - a[i]) / (x[i + 1] - x[i]));
                    const double near = std::min(std::abs(x[i] - x0), std::abs(x[i + 1] - x0));
                    const double far = std::max(std::abs(x[i] - x0), std::abs(x[i + 1] - x0));
                    const double bound = *p.sigma() * std::pow(e >= 0 ? far : near, e);
                    const double defect = (slope - bound) / (1.0 + bound);
                    if (defect > c.worst_defect) {
                        c.worst_defect = defect;
                        if (defect > tol) {
                            c.verdict = Verdict::Fail;
                            c.witness = x[i];
                            c.note = "|a'| exceeds the Sigma bound";
                        }
                    }
                }
            }
        }
        r.checks.push_back(c);
    }

    // Integrability of 1/a and 1/sqrt(a) against the weak/strong classification.
    r.inverse_a = study_integrability(p, 1.0);
    r.inverse_sqrt_a = study_integrability(p, 0.5);
    {
        HypothesisCheck c{"integrability", Verdict::NotApplicable, 0.0, std::nullopt, 1e-3, ""};
        if (degenerate) {
            const bool expect_inv_a = p.kind() == Kind::WeaklyDegenerate;
            const bool expect_inv_sqrt = !p.beyond_admissible();
            c.worst_defect = r.inverse_a.increment_ratio;
            if (r.inverse_a.integrable == expect_inv_a && r.inverse_sqrt_a.integrable == expect_inv_sqrt) {
                c.verdict = Verdict::Pass;
            } else {
                c.verdict = Verdict::Fail;
                c.witness = x0;
                c.note = "grid integrability of 1/a or 1/sqrt(a) contradicts the classification";
            }
        }
        r.checks.push_back(c);
    }
    return r;
}

// ---------------------------------------------------------------------------

double SampledFunction::operator()(double t) const {
    if (fn) return fn(t);
    if (x.empty()) throw ShapeError("sampled function has no samples");
    if (t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - x.begin());
    const double w = (t - x[j - 1]) / (x[j] - x[j - 1]);
    return (1.0 - w) * y[j - 1] + w * y[j];
}

SampledFunction SampledFunction::from(ScalarFn f, const std::vector<double>& xs) {
    SampledFunction s;
    s.x = xs;
    s.y.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) s.y[i] = f(xs[i]);
    s.fn = std::move(f);
    return s;
}

HypothesisReport check_nondegenerate_pair(const CoefficientProfile& p, const NonDegeneratePair& pair,
                                          double tol) {
    const double A = pair.interval.lo;
    const double B = pair.interval.hi;
    if (!(A < B) || A < 0.0 || B > 1.0) throw DomainError("pair: interval must satisfy 0 <= A < B <= 1");
    if (p.x0() && pair.interval.contains_closed(*p.x0()))
        throw DomainError("pair: interval contains the degeneracy point x0");
    if (!(pair.g0 > 0.0) || !(pair.h0 > 0.0)) throw ConstraintError("pair: g0 and h0 must be positive");

    HypothesisReport r;
    r.kind = p.kind();
    const bool div = pair.form == Form::Divergence;

    std::vector<double> xs;
    for (double t : p.x())
        if (t > A && t < B) xs.push_back(t);

    HypothesisCheck pos{"coefficient_positive", Verdict::Pass, 0.0, std::nullopt, 0.0, ""};
    double a_min = kInf;
    for (double t : xs) {
        const double v = p(t);
        if (v < a_min) {
            a_min = v;
            if (!(v > 0.0)) {
                pos.verdict = Verdict::Fail;
                pos.witness = t;
                pos.note = "a must be bounded away from 0 on the interval";
            }
        }
    }
    pos.worst_defect = a_min;
    r.checks.push_back(pos);

    HypothesisCheck lower{"g_lower_bound", Verdict::Pass, 0.0, std::nullopt, tol, ""};
    for (double t : xs) {
        const double gv = pair.g(t);
        const double defect = pair.g0 - gv;
        if (defect > lower.worst_defect) {
            lower.worst_defect = defect;
            if (defect > tol * pair.g0) {
                lower.verdict = Verdict::Fail;
                lower.witness = t;
                lower.note = "g < g0";
            }
        }
    }
    r.checks.push_back(lower);

    auto integral = [&](const SampledFunction& f, double lo, double hi, bool divide_by_a) {
        auto integrand = [&](double t) { return divide_by_a ? f(t) / p(t) : f(t); };
        if (f.fn) return quad::integrate(integrand, lo, hi, 1e-13);
        // trapezoid over the samples of f restricted to [lo, hi]
        std::vector<double> pts{lo};
        for (double t : f.x)
            if (t > lo && t < hi) pts.push_back(t);
        pts.push_back(hi);
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < pts.size(); ++k)
            s += 0.5 * (integrand(pts[k]) + integrand(pts[k + 1])) * (pts[k + 1] - pts[k]);
        return s;
    };

    HypothesisCheck id{div ? "identity_divergence" : "identity_non_divergence", Verdict::Pass, 0.0,
                       std::nullopt, tol, ""};
    const double sqrt_aB = std::sqrt(p(B));
    for (double t : xs) {
        const double G = integral(pair.g, t, B, false);
        const double sa = std::sqrt(p(t));
        double lhs, rhs, scale;
        if (div) {
            lhs = sa * (G + pair.h0) - sqrt_aB * pair.h0;
            rhs = integral(pair.h, t, B, false);
            scale = 1.0 + std::abs(sa * (G + pair.h0));
        } else {
            lhs = (G + pair.h0) / sa - pair.h0 / sqrt_aB;
            rhs = integral(pair.h, t, B, true);
            scale = 1.0 + std::abs((G + pair.h0) / sa);
        }
        const double residual = std::abs(lhs - rhs) / scale;
        if (residual > id.worst_defect || !std::isfinite(residual)) {
            id.worst_defect = residual;
            id.witness = t;
        }
    }
    if (!(id.worst_defect <= tol)) {
        id.verdict = Verdict::Fail;
        id.note = "identity residual exceeds tolerance";
    } else {
        id.witness.reset();
    }
    r.checks.push_back(id);
    return r;
}

}  // namespace degenctrl::coeff

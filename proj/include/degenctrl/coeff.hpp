#pragma once

// Diffusion coefficients a(x) on [0,1] that vanish at an interior point x0,
// and checks of the structural hypotheses placed on them.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace degenctrl::coeff {

using ScalarFn = std::function<double(double)>;

enum class Kind { WeaklyDegenerate, StronglyDegenerate, NonDegenerate };
enum class Form { Divergence, NonDivergence };

std::string_view to_string(Kind kind);
std::string_view to_string(Form form);
Form parse_form(std::string_view text);

struct ProfileOptions {
    // Accept exponents K >= 2 (used to exhibit the loss of controllability).
    bool allow_exponent_override = false;
};

class CoefficientProfile {
public:
    // Prefer the factories below; this constructor validates the invariants.
    CoefficientProfile(std::vector<double> x, std::vector<double> a, ScalarFn closed_form,
                       ScalarFn offset_form, std::optional<double> x0, double K,
                       std::optional<double> theta, std::optional<double> sigma,
                       std::string description, bool beyond_admissible = false);

    const std::vector<double>& x() const noexcept { return x_; }
    const std::vector<double>& samples() const noexcept { return a_; }
    std::optional<double> x0() const noexcept { return x0_; }
    std::optional<std::size_t> x0_sample() const noexcept { return x0_sample_; }
    double K() const noexcept { return K_; }
    std::optional<double> theta() const noexcept { return theta_; }
    std::optional<double> sigma() const noexcept { return sigma_; }
    Kind kind() const noexcept { return kind_; }
    bool degenerate() const noexcept { return kind_ != Kind::NonDegenerate; }
    bool beyond_admissible() const noexcept { return beyond_admissible_; }
    const std::string& description() const noexcept { return description_; }
    bool has_closed_form() const noexcept { return static_cast<bool>(closed_form_); }
    double sup_norm() const;

    // a(x): closed form when available, otherwise piecewise-linear in the samples.
    double operator()(double x) const;

    // a(x0 + y) evaluated without forming x0 + y when a closed offset form exists.
    double at_offset(double y) const;

    // Integral of 1/a^power over [lo, hi]. Endpoints may coincide with x0;
    // the interior of [lo, hi] must not contain x0. Returns +inf when the
    // integral diverges at x0 (power * K >= 1).
    double integral_of_inverse_power(double lo, double hi, double power) const;

private:
    std::vector<double> x_;
    std::vector<double> a_;
    ScalarFn closed_form_;
    ScalarFn offset_form_;
    std::optional<double> x0_;
    std::optional<std::size_t> x0_sample_;
    double K_ = 0.0;
    std::optional<double> theta_;
    std::optional<double> sigma_;
    Kind kind_ = Kind::NonDegenerate;
    std::string description_;
    bool beyond_admissible_ = false;
};

Kind classify(double K);

// Uniform samples on [0,1] with x0 inserted when it is not already a sample.
std::vector<double> sample_abscissas(std::size_t n, std::optional<double> x0);

// a(x) = |x - x0|^alpha with K = theta = alpha; Sigma is set when alpha > 3/2.
CoefficientProfile make_prototype_profile(double alpha, double x0, std::size_t n,
                                          ProfileOptions options = {});
CoefficientProfile make_constant_profile(double value, std::size_t n);
// Non-degenerate coefficient given in closed form (a > 0 on [0,1]).
CoefficientProfile make_closed_form_profile(ScalarFn a, std::size_t n, std::string description);
// Sampled coefficient; x0 must be one of the abscissas. K, when absent, is
// estimated from the samples.
CoefficientProfile make_sampled_profile(std::vector<double> x, std::vector<double> a,
                                        std::optional<double> x0, std::optional<double> K = {},
                                        std::optional<double> theta = {},
                                        std::optional<double> sigma = {});

// Two-column CSV with header "x,a".
void write_profile_csv(const CoefficientProfile& p, std::ostream& out);
CoefficientProfile read_profile_csv(std::istream& in, std::optional<double> x0,
                                    std::optional<double> K = {});

// ---------------------------------------------------------------------------
// Hypothesis checks

enum class Verdict { Pass, Fail, NotApplicable };
std::string_view to_string(Verdict v);

struct HypothesisCheck {
    std::string name;
    Verdict verdict = Verdict::NotApplicable;
    double worst_defect = 0.0;
    std::optional<double> witness;  // always set on Fail
    double tolerance = 0.0;
    std::string note;
};

// Composite-midpoint integrals of a^-power on three nested grids that exclude x0.
struct IntegrabilityStudy {
    double power = 1.0;
    double integrals[3] = {0.0, 0.0, 0.0};
    double increment_ratio = 0.0;  // (I2 - I1) / (I1 - I0); tends to 2^(power*K - 1)
    double integral_ratio = 0.0;   // I2 / I1
    bool integrable = true;
};

struct HypothesisReport {
    Kind kind = Kind::NonDegenerate;
    std::vector<HypothesisCheck> checks;
    double empirical_K = 0.0;
    IntegrabilityStudy inverse_a;
    IntegrabilityStudy inverse_sqrt_a;

    bool passed() const;  // no check failed
    const HypothesisCheck* find(std::string_view name) const;
};

double default_tolerance(const CoefficientProfile& p);

IntegrabilityStudy study_integrability(const CoefficientProfile& p, double power);

HypothesisReport check_degeneracy_hypotheses(const CoefficientProfile& p,
                                             std::optional<double> tol = {});

// ---------------------------------------------------------------------------
// Non-degenerate pairs (g, h) linking a' to the weight of the
// non-degenerate Carleman estimate.

struct SampledFunction {
    std::vector<double> x;
    std::vector<double> y;
    ScalarFn fn;  // preferred when present

    double operator()(double t) const;
    static SampledFunction from(ScalarFn f, const std::vector<double>& x);
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double length() const noexcept { return hi - lo; }
    bool contains_open(double x) const noexcept { return lo < x && x < hi; }
    bool contains_closed(double x) const noexcept { return lo <= x && x <= hi; }
};

struct NonDegeneratePair {
    SampledFunction g;
    SampledFunction h;
    double g0 = 0.0;
    double h0 = 0.0;
    Form form = Form::Divergence;
    Interval interval{0.0, 1.0};
};

// Verifies, in integrated form,
//   divergence:      sqrt(a)(G + h0) |_x^B = -int_x^B h
//   non-divergence:  (G + h0)/sqrt(a) |_x^B = -int_x^B h/a
// with G(x) = int_x^B g, at every sample inside (A,B), plus g >= g0 and a > 0.
HypothesisReport check_nondegenerate_pair(const CoefficientProfile& p, const NonDegeneratePair& pair,
                                          double tol = 1e-6);

}  // namespace degenctrl::coeff

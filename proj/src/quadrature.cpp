#include "degenctrl/quadrature.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <stdexcept>

namespace degenctrl::quad {

namespace {

// One instance per thread: the abscissa tables grow lazily on first use.
boost::math::quadrature::tanh_sinh<double>& integrator() {
    thread_local boost::math::quadrature::tanh_sinh<double> instance;
    return instance;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (hi == lo) return 0.0;
    if (hi < lo) return -integrate(f, hi, lo, tol);
    auto guarded = [&](double x) {
        const double v = f(x);
        return std::isfinite(v) ? v : 0.0;
    };
    return integrator().integrate(guarded, lo, hi, tol);
}

double integrate_singular_at_zero(const std::function<double(double)>& f, double d, double p,
                                  double tol) {
    if (d == 0.0) return 0.0;
    if (p <= 0.0) return integrate(f, 0.0, d, tol);
    if (p >= 1.0) throw std::domain_error("integrate_singular_at_zero: exponent must be < 1");
    const double m = 1.0 / (1.0 - p);
    auto transformed = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double y = d * std::pow(u, m);
        if (y <= 0.0) return 0.0;
        const double v = f(y) * d * m * std::pow(u, m - 1.0);
        return std::isfinite(v) ? v : 0.0;
    };
    return integrator().integrate(transformed, 0.0, 1.0, tol);
}

double midpoint(const std::function<double(double)>& f, double lo, double hi, int cells) {
    const double h = (hi - lo) / cells;
    double sum = 0.0;
    for (int k = 0; k < cells; ++k) sum += f(lo + (k + 0.5) * h);
    return sum * h;
}

}  // namespace degenctrl::quad

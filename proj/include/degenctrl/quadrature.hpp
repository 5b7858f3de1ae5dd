#pragma once

#include <functional>

namespace degenctrl::quad {

// Integral of f over [lo, hi]; f may have integrable singularities at either
// endpoint (double-exponential rule). Non-finite samples at abscissas that
// round onto an endpoint are dropped.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double tol = 1e-12);

// Integral of f(y) over y in [0, d] for f ~ y^(-p) as y -> 0, 0 <= p < 1.
// The substitution y = d u^(1/(1-p)) removes the power singularity before
// quadrature, which keeps the rule accurate for p close to 1.
double integrate_singular_at_zero(const std::function<double(double)>& f, double d,
                                  double p, double tol = 1e-12);

// Composite midpoint rule on `cells` equal cells.
double midpoint(const std::function<double(double)>& f, double lo, double hi, int cells);

}  // namespace degenctrl::quad

#pragma once

#include <cmath>

#include "stopflow/errors.hpp"

namespace stopflow {

/// Bracketed bisection for a sign change of f on [a, b]. Stops once the bracket
/// is narrower than abs_tol or stops shrinking in floating point.
template <class F>
double bisect(F&& f, double a, double b, double abs_tol = 1e-14, int max_iter = 400) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa < 0.0) == (fb < 0.0)) {
        throw DomainError("bisect: root not bracketed");
    }
    for (int it = 0; it < max_iter && (b - a) > abs_tol; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace stopflow

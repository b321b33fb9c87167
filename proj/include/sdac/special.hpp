#pragma once
// Complementary error function, self-contained.
//
// For 0 <= x < 2 the Maclaurin series of erf is used; for x >= 2 the
// classical continued fraction for erfc (Abramowitz & Stegun 7.1.14,
// evaluated by modified Lentz). Negative arguments use erfc(-x) = 2 - erfc(x).
// Absolute error is below 1e-14 on |x| <= 6, comfortably inside the 1e-12
// budget the BER formulas need.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdac {

namespace detail {

inline constexpr double kInvSqrtPi = 0.5641895835477562869480794515608;

// erf(x) = 2/sqrt(pi) * sum_{n>=0} (-1)^n x^(2n+1) / (n! (2n+1)), 0 <= x < 2.
inline double erf_series(double x) {
    const double x2 = x * x;
    double term = x;  // x^(2n+1)/n! running product
    double acc = term;
    for (int n = 1; n < 80; ++n) {
        term *= -x2 / double(n);
        const double contrib = term / double(2 * n + 1);
        acc += contrib;
        if (std::fabs(contrib) < 1e-18 * std::fabs(acc)) break;
    }
    return 2.0 * kInvSqrtPi * acc;
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// for x >= 2, via modified Lentz.
inline double erfc_cf(double x) {
    const double tiny = 1e-300;
    double f = x;
    if (f == 0.0) f = tiny;
    double c = f;
    double d = 0.0;
    for (int n = 1; n < 300; ++n) {
        const double a = double(n) * 0.5;
        d = x + a * d;
        if (d == 0.0) d = tiny;
        c = x + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) break;
    }
    return std::exp(-x * x) * kInvSqrtPi / f;
}

}  // namespace detail

inline double erfc(double x) {
    if (!std::isfinite(x)) {
        if (std::isnan(x)) throw std::invalid_argument("erfc: NaN argument");
        return x > 0 ? 0.0 : 2.0;
    }
    const double ax = std::fabs(x);
    double pos;  // erfc(|x|)
    if (ax < 2.0)
        pos = 1.0 - detail::erf_series(ax);
    else if (ax > 27.0)
        pos = 0.0;  // underflows double
    else
        pos = detail::erfc_cf(ax);
    return x >= 0.0 ? pos : 2.0 - pos;
}

inline double erf(double x) { return 1.0 - erfc(x); }

// Upper-tail Gaussian probability Q(x) = erfc(x / sqrt(2)) / 2.
inline double q_func(double x) { return 0.5 * erfc(x / 1.4142135623730950488); }

}  // namespace sdac

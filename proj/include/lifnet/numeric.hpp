#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace lifnet {

// log(sinh(x)) for x > 0 without overflow.
inline double log_sinh(double x) {
    return x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
}

// 1 - exp(-x) for x >= 0, accurate near zero.
inline double one_m_exp(double x) { return -std::expm1(-x); }

// exp(x*x) * erfc(x), valid for all x, no overflow for large positive x.
inline double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x < 6.0) return std::exp(x * x) * std::erfc(x);
    // asymptotic tail
    const double ix2 = 1.0 / (x * x);
    double s = 1.0, term = 1.0;
    for (int k = 1; k <= 8; ++k) {
        term *= -(2.0 * k - 1.0) * 0.5 * ix2;
        s += term;
    }
    return s / (x * std::sqrt(M_PI));
}

/// Sign/log-magnitude representation used to compare noise coefficients
/// whose plain values can under- or overflow across long intervals.
struct LogScalar {
    int sign = 0;       // -1, 0, +1
    double logabs = -std::numeric_limits<double>::infinity();

    static LogScalar from(double v) {
        if (v == 0.0) return {};
        return {v > 0.0 ? 1 : -1, std::log(std::fabs(v))};
    }
    static LogScalar from_parts(double mantissa, double log_extra) {
        if (mantissa == 0.0) return {};
        return {mantissa > 0.0 ? 1 : -1, std::log(std::fabs(mantissa)) + log_extra};
    }
    double value() const { return sign == 0 ? 0.0 : sign * std::exp(logabs); }

    // order by the represented real number
    bool operator<(const LogScalar& o) const {
        if (sign != o.sign) return sign < o.sign;
        if (sign > 0) return logabs < o.logabs;
        if (sign < 0) return logabs > o.logabs;
        return false;
    }
    // relative closeness in magnitude and equal sign
    bool close_to(const LogScalar& o, double rel_tol) const {
        if (sign != o.sign || sign == 0) return false;
        return std::fabs(logabs - o.logabs) < rel_tol;
    }
};

/// Scaled floating value m * 2^e, |m| in [1, 2) unless zero; keeps special-
/// function ladders in range for large orders.
struct Scaled {
    double m = 0.0;
    long e = 0;

    static Scaled from(double v) {
        if (v == 0.0 || !std::isfinite(v)) return {v, 0};
        int ex;
        double mm = std::frexp(v, &ex);
        return {mm * 2.0, ex - 1};
    }
    void renorm() {
        if (m == 0.0 || !std::isfinite(m)) { e = 0; return; }
        int ex;
        m = std::frexp(m, &ex) * 2.0;
        e += ex - 1;
    }
    double value() const { return std::ldexp(m, static_cast<int>(std::max<long>(std::min<long>(e, 1 << 16), -(1 << 16)))); }
    double log_abs() const { return std::log(std::fabs(m)) + static_cast<double>(e) * M_LN2; }
    int sign() const { return m == 0.0 ? 0 : (m > 0.0 ? 1 : -1); }

    // ratio of two scaled values as a double (assumed representable)
    double ratio(const Scaled& d) const { return (m / d.m) * std::exp2(static_cast<double>(e - d.e)); }
};

}  // namespace lifnet

#include "lifnet/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace lifnet {

void OuSpec::validate() const {
    if (!(conductance > 0.0)) throw range_error_specfun("OU spec requires g > 0");
    if (!(capacitance > 0.0)) throw range_error_specfun("OU spec requires C > 0");
    if (!(noise_std > 0.0)) throw range_error_specfun("OU spec requires sigma > 0");
    if (!(threshold > 0.0)) throw range_error_specfun("OU spec requires V_th > 0");
}

namespace {

// 1/Gamma(x), finite everywhere (0 at the poles).
double rgamma(double x) {
    if (x > 0.5) return 1.0 / std::tgamma(x);
    return std::sin(M_PI * x) * std::tgamma(1.0 - x) / M_PI;
}

// Kummer M(a, b, x) for x >= 0, scaled as m * 2^e. Terms do not alternate
// for the (a, b) pairs used here, so the sum carries full precision.
Scaled kummer_scaled(double a, double b, double x) {
    Scaled s{1.0, 0};
    double term = 1.0;
    long te = 0;
    const int kmax = 64 + static_cast<int>(x + 14.0 * std::sqrt(x + 1.0));
    for (int k = 0; k < kmax; ++k) {
        term *= (a + k) * x / ((b + k) * (k + 1));
        // align exponents and accumulate
        if (te != s.e) term = std::ldexp(term, static_cast<int>(te - s.e)), te = s.e;
        s.m += term;
        if (std::fabs(term) > 1e250 || std::fabs(s.m) > 1e250) {
            s.renorm();
            term = std::ldexp(term, static_cast<int>(te - s.e));
            te = s.e;
        }
        if (k > x && std::fabs(term) < 1e-18 * std::fabs(s.m)) break;
    }
    s.renorm();
    return s;
}

// D_nu(z) for -1 <= nu < 2 via the confluent-hypergeometric split (z <= 5)
// or the large-z asymptotic series (z > 5).
Scaled weber_base(double nu, double z) {
    const double x = 0.5 * z * z;
    if (z > 5.0) {
        // D_nu(z) ~ e^{-z^2/4} z^nu sum_k (-1)^k (nu)_{2k down} / (2^k k! z^{2k})
        double sum = 1.0, term = 1.0;
        for (int k = 1; k <= 24; ++k) {
            term *= -(nu - 2.0 * k + 2.0) * (nu - 2.0 * k + 1.0) / (2.0 * k * z * z);
            const double prev = sum;
            sum += term;
            if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
            if (std::fabs(term) > std::fabs(prev)) break;  // asymptotic tail turning
        }
        Scaled r{sum, 0};
        const double lg = -0.25 * z * z + nu * std::log(z);
        r.m *= std::exp(lg - std::round(lg / M_LN2) * M_LN2);
        r.e += static_cast<long>(std::round(lg / M_LN2));
        r.renorm();
        return r;
    }
    const Scaled m1 = kummer_scaled(-0.5 * nu, 0.5, x);
    const Scaled m2 = kummer_scaled(0.5 * (1.0 - nu), 1.5, x);
    const double c1 = rgamma(0.5 * (1.0 - nu));
    const double c2 = rgamma(-0.5 * nu) * std::sqrt(2.0) * z;
    // combine on a common exponent
    long e = std::max(m1.e, m2.e);
    const double t1 = c1 * std::ldexp(m1.m, static_cast<int>(m1.e - e));
    const double t2 = c2 * std::ldexp(m2.m, static_cast<int>(m2.e - e));
    Scaled r{t1 - t2, e};
    const double lg = 0.5 * nu * M_LN2 + 0.5 * std::log(M_PI) - 0.25 * z * z;
    r.m *= std::exp(lg - std::round(lg / M_LN2) * M_LN2);
    r.e += static_cast<long>(std::round(lg / M_LN2));
    r.renorm();
    return r;
}

// (D_n, D_{n+1}) scaled, by the order recurrence D_{m+1} = z D_m - m D_{m-1}.
// Moderate orders with z in the series zone are evaluated directly, which
// avoids the mild cancellation of long ladders in the oscillatory region.
void weber_pair(double n, double z, Scaled& dn, Scaled& dn1) {
    if (n < -1.0) throw range_error_specfun("weber order below -1");
    if (std::fabs(z) <= 5.0 && n <= 24.0) {
        dn = weber_base(n, z);
        dn1 = weber_base(n + 1.0, z);
        return;
    }
    double f = n - std::floor(n);
    int steps = static_cast<int>(std::floor(n));
    if (n < 0.0) { f = n; steps = 0; }
    Scaled a = weber_base(f, z);       // D_f
    Scaled b = weber_base(f + 1.0, z); // D_{f+1}
    double m = f + 1.0;
    for (int k = 0; k < steps; ++k, m += 1.0) {
        // next = z*b - m*a, keep a/b on a common exponent
        long e = std::max(a.e, b.e);
        const double am = std::ldexp(a.m, static_cast<int>(a.e - e));
        const double bm = std::ldexp(b.m, static_cast<int>(b.e - e));
        Scaled nx{z * bm - m * am, e};
        nx.renorm();
        a = Scaled{bm, e};
        a.renorm();
        b = nx;
    }
    dn = a;
    dn1 = b;
}

struct EigenKey {
    long long alpha_q;
    bool operator<(const EigenKey& o) const { return alpha_q < o.alpha_q; }
};

struct EigenData {
    std::vector<double> roots;
    std::vector<double> norms;       // N_i = int_alpha^inf D_{n_i}^2 dz
    std::vector<double> dprime;      // D'_{n_i}(alpha)
    std::vector<double> log_dm1;     // log |D_{n_i - 1}(alpha)|
    std::vector<int> sign_dm1;
};

std::mutex g_eigen_mutex;
std::map<EigenKey, EigenData> g_eigen_cache;

double weber_value_at(double n, double z, int* sign = nullptr, double* logabs = nullptr) {
    Scaled dn, dn1;
    weber_pair(n, z, dn, dn1);
    if (sign) *sign = dn.sign();
    if (logabs) *logabs = dn.m == 0.0 ? -kInf : dn.log_abs();
    return dn.m;  // mantissa only; sign/log carry the information
}

// roots of D_n(alpha) = 0 scanning n upward; gap between roots exceeds 1
std::vector<double> scan_roots(double alpha, int count, double n_max) {
    std::vector<double> roots;
    const double step = 0.37;
    int s_prev;
    weber_value_at(1e-9, alpha, &s_prev, nullptr);
    double n_prev = 1e-9;
    for (double n = step; n <= n_max && static_cast<int>(roots.size()) < count; n += step) {
        int s;
        weber_value_at(n, alpha, &s, nullptr);
        if (s != 0 && s_prev != 0 && s != s_prev) {
            double lo = n_prev, hi = n;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                int sm;
                weber_value_at(mid, alpha, &sm, nullptr);
                if (sm == s_prev) lo = mid;
                else hi = mid;
                if (hi - lo < 1e-11) break;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        s_prev = s;
        n_prev = n;
    }
    if (static_cast<int>(roots.size()) < count)
        throw range_error_specfun("eigenvalue bracketing exhausted n_max");
    return roots;
}

const EigenData& eigen_data(const OuSpec& spec, int count, double n_max) {
    const double alpha = spec.alpha();
    EigenKey key{static_cast<long long>(std::llround(alpha * 1e12))};
    std::lock_guard<std::mutex> lock(g_eigen_mutex);
    auto it = g_eigen_cache.find(key);
    if (it != g_eigen_cache.end() && static_cast<int>(it->second.roots.size()) >= count)
        return it->second;

    EigenData data;
    data.roots = scan_roots(alpha, count, n_max);
    const double hn = 1e-6;
    for (double n : data.roots) {
        Scaled dn, dn1, dm, dm1, dp, dp1;
        weber_pair(n, alpha, dn, dn1);
        weber_pair(n - hn, alpha, dm, dm1);
        weber_pair(n + hn, alpha, dp, dp1);
        // at the root D_n(alpha) = 0 exactly, so D'_n(alpha) = -D_{n+1}(alpha);
        // the bisection residual would otherwise contaminate steep roots
        long e = dn1.e;
        const double dprime = -dn1.m;
        // dD/dn at the root, same exponent frame
        long e2 = std::max(dm.e, dp.e);
        const double dn_dn = (std::ldexp(dp.m, static_cast<int>(dp.e - e2)) -
                              std::ldexp(dm.m, static_cast<int>(dm.e - e2))) /
                             (2.0 * hn);
        // N_i = -D'_n(alpha) * dD_n(alpha)/dn, exponents recombined
        const double log_norm = std::log(std::fabs(dprime)) + static_cast<double>(e) * M_LN2 +
                                std::log(std::fabs(dn_dn)) + static_cast<double>(e2) * M_LN2;
        const double sgn = -(dprime > 0 ? 1.0 : -1.0) * (dn_dn > 0 ? 1.0 : -1.0);
        if (!(sgn > 0.0)) throw range_error_specfun("eigen norm came out non-positive");
        data.norms.push_back(log_norm);  // stored as log (always positive)
        data.dprime.push_back(std::log(std::fabs(dprime)) + static_cast<double>(e) * M_LN2);
        Scaled dm1s, dtmp;
        weber_pair(n - 1.0, alpha, dm1s, dtmp);
        data.log_dm1.push_back(dm1s.m == 0.0 ? -kInf : dm1s.log_abs());
        data.sign_dm1.push_back(dm1s.sign());
    }
    auto [pos, ok] = g_eigen_cache.insert_or_assign(key, std::move(data));
    (void)ok;
    return pos->second;
}

}  // namespace

std::pair<double, double> weber_D(double n, double z) {
    if (std::fabs(z) > 50.0) throw range_error_specfun("weber_D: |z| > 50 outside validated range");
    if (n < 0.0 || n > 300.0) throw range_error_specfun("weber_D: order outside [0, 300]");
    Scaled dn, dn1;
    weber_pair(n, z, dn, dn1);
    const double v = dn.m == 0.0 ? 0.0 : dn.sign() * std::exp(dn.log_abs());
    long e = std::max(dn.e, dn1.e);
    const double dm = std::ldexp(dn.m, static_cast<int>(dn.e - e));
    const double d1 = std::ldexp(dn1.m, static_cast<int>(dn1.e - e));
    const double dv = (0.5 * z * dm - d1) * std::exp2(static_cast<double>(e));
    if (!std::isfinite(v) || !std::isfinite(dv))
        throw range_error_specfun("weber_D: value overflow at requested (n, z)");
    return {v, dv};
}

LogScalar weber_D_scaled(double n, double z) {
    Scaled dn, dn1;
    weber_pair(n, z, dn, dn1);
    if (dn.m == 0.0) return {};
    return {dn.sign(), dn.log_abs()};
}

std::vector<double> threshold_eigenvalues(const OuSpec& spec, int count, double n_max) {
    spec.validate();
    const auto& data = eigen_data(spec, count, n_max);
    return {data.roots.begin(), data.roots.begin() + count};
}

double eigen_norm_quadrature(double n_i, double alpha) {
    // composite Simpson over [alpha, 2 sqrt(n+1) + 12] on the log-scaled values
    const double hi = 2.0 * std::sqrt(n_i + 1.0) + 12.0;
    const int segs = std::max(2000, static_cast<int>(32.0 * (n_i + 4.0)));
    const double h = (hi - alpha) / segs;
    // first pass: peak of log|D| for scaling
    double log_peak = -kInf;
    std::vector<double> la(segs + 1);
    std::vector<int> sg(segs + 1);
    for (int k = 0; k <= segs; ++k) {
        Scaled dn, dn1;
        weber_pair(n_i, alpha + k * h, dn, dn1);
        la[k] = dn.m == 0.0 ? -kInf : dn.log_abs();
        sg[k] = dn.sign();
        log_peak = std::max(log_peak, la[k]);
    }
    double acc = 0.0;
    for (int k = 0; k <= segs; ++k) {
        const double w = (k == 0 || k == segs) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        const double f = la[k] == -kInf ? 0.0 : std::exp(2.0 * (la[k] - log_peak));
        acc += w * f;
    }
    return acc * h / 3.0 * std::exp(2.0 * log_peak);
}

namespace {

// shared series loop; mode 0: p_s(dt | v); mode 1: slope at threshold;
// mode 2: FPT density at dt for start v
SeriesValue eigen_series(double dt, double v, const OuSpec& spec, int terms, int mode) {
    spec.validate();
    const double tau = spec.tau();
    const double alpha = spec.alpha();
    const double z = spec.kappa() * (spec.mean_potential() - v);
    const double zfac = 0.25 * (z * z - alpha * alpha);

    const auto& data = eigen_data(spec, std::min(terms, 2048), 500.0);
    const int navail = static_cast<int>(data.roots.size());

    double sum = 0.0, lead = 0.0;
    SeriesValue out;
    int used = 0;
    for (int i = 0; i < navail && i < terms; ++i) {
        const double n = data.roots[i];
        const double decay = -n * dt / tau;
        double term;
        if (mode == 1) {
            // -kappa * e^{-n dt/tau} * D'_n(alpha)^2 / (n N_i)
            term = -spec.kappa() *
                   std::exp(decay + 2.0 * data.dprime[i] - std::log(n) - data.norms[i]);
        } else {
            Scaled dz, dz1;
            weber_pair(n, z, dz, dz1);
            if (dz.m == 0.0) { ++used; continue; }
            const double logmag = decay + zfac + data.log_dm1[i] + dz.log_abs() - data.norms[i];
            const double sgn = data.sign_dm1[i] * dz.sign();
            term = sgn * std::exp(logmag);
            if (mode == 2) term *= n / tau;
        }
        sum += term;
        if (i == 0) lead = std::fabs(term) > 0 ? std::fabs(term) : 1.0;
        ++used;
        // remaining-tail bound through the exponential factor
        if (i + 1 < navail) {
            const double next_decay = std::exp(-(data.roots[i + 1] - data.roots[0]) * dt / tau);
            if (next_decay < 1e-9 && i >= 2) break;
        }
    }
    // tail estimate: geometric continuation of the exponential factor
    if (used >= std::min(terms, navail)) {
        const double gap = used >= 2 ? data.roots[used - 1] - data.roots[used - 2] : 1.0;
        const double tail = std::exp(-(data.roots[used - 1] + gap - data.roots[0]) * dt / tau);
        if (tail > 1e-8) out.converged = false;
    }
    out.value = sum;
    return out;
}

}  // namespace

SeriesValue survival_probability(double dt, double v, const OuSpec& spec, int terms) {
    if (v > spec.threshold) throw range_error_specfun("survival: start above threshold");
    if (dt <= 0.0) return {v < spec.threshold ? 1.0 : 0.0, true, false};
    SeriesValue r = eigen_series(dt, v, spec, terms, 0);
    if (!r.converged) {
        // small-dt fallback: far-from-threshold starts certainly survive
        if (v < spec.threshold - 6.0 * spec.noise_std * std::sqrt(dt) / spec.capacitance) {
            r.value = 1.0;
            r.fallback = true;
            return r;
        }
        r.fallback = true;
    }
    r.value = std::min(1.0, std::max(0.0, r.value));
    return r;
}

SeriesValue survival_slope_at_threshold(double dt, const OuSpec& spec, int terms) {
    if (dt <= 0.0) return {-kInf, true, false};
    SeriesValue r = eigen_series(dt, spec.threshold, spec, terms, 1);
    if (r.value > 0.0) r.value = 0.0;
    return r;
}

SeriesValue fpt_density(double dt, double v, const OuSpec& spec, int terms) {
    if (dt <= 0.0) return {0.0, true, false};
    SeriesValue r = eigen_series(dt, v, spec, terms, 2);
    if (r.value < 0.0 && r.converged) r.value = std::max(r.value, 0.0);
    return r;
}

double mean_first_passage_time(double j_charge, const OuSpec& spec) {
    spec.validate();
    // kick from the stationary level: start at mu + J/C
    const double v0 = spec.mean_potential() + j_charge / spec.capacitance;
    if (v0 >= spec.threshold) return 0.0;
    const double s = spec.noise_std / std::sqrt(spec.conductance * spec.capacitance);
    const double u0 = (v0 - spec.mean_potential()) / s;
    const double ub = (spec.threshold - spec.mean_potential()) / s;
    // T = tau sqrt(pi) int e^{u^2} (1 + erf u) du, integrand via erfcx below 0
    auto f = [](double u) {
        if (u <= 0.0) return std::sqrt(M_PI) * erfcx(-u);
        return std::sqrt(M_PI) * (2.0 * std::exp(u * u) - erfcx(u));
    };
    // adaptive Simpson
    struct Rec {
        static double simpson(const std::function<double(double)>& fn, double a, double m,
                              double b, double fa, double fm, double fb, double whole,
                              double tol, int depth) {
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = fn(lm), frm = fn(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
                return left + right + (left + right - whole) / 15.0;
            return simpson(fn, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   simpson(fn, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    std::function<double(double)> fn = f;
    const double m = 0.5 * (u0 + ub);
    const double fa = f(u0), fm = f(m), fb = f(ub);
    const double whole = (ub - u0) / 6.0 * (fa + 4.0 * fm + fb);
    const double integral =
        Rec::simpson(fn, u0, m, ub, fa, fm, fb, whole, 1e-12 * std::max(1.0, std::fabs(whole)), 48);
    return spec.tau() * integral;
}

}  // namespace lifnet

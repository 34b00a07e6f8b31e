#include "lifnet/optpath.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "lifnet/numeric.hpp"

namespace lifnet {

namespace {

// Order-2 forward-mode scalar over three variables, used to differentiate
// the passive-contact closed forms exactly.
struct D2 {
    double v = 0.0;
    double g[3] = {0, 0, 0};
    double h[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    static D2 cnst(double c) {
        D2 r;
        r.v = c;
        return r;
    }
    static D2 var(double value, int slot) {
        D2 r;
        r.v = value;
        r.g[slot] = 1.0;
        return r;
    }
};

D2 operator+(const D2& a, const D2& b) {
    D2 r;
    r.v = a.v + b.v;
    for (int i = 0; i < 3; ++i) {
        r.g[i] = a.g[i] + b.g[i];
        for (int j = 0; j < 3; ++j) r.h[i][j] = a.h[i][j] + b.h[i][j];
    }
    return r;
}
D2 operator-(const D2& a, const D2& b) {
    D2 r;
    r.v = a.v - b.v;
    for (int i = 0; i < 3; ++i) {
        r.g[i] = a.g[i] - b.g[i];
        for (int j = 0; j < 3; ++j) r.h[i][j] = a.h[i][j] - b.h[i][j];
    }
    return r;
}
D2 operator*(const D2& a, const D2& b) {
    D2 r;
    r.v = a.v * b.v;
    for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.h[i][j] = a.h[i][j] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[i][j];
    return r;
}
D2 operator*(double c, const D2& a) { return D2::cnst(c) * a; }

// chain rule for f(u) given f, f', f''
D2 chain(const D2& u, double f, double fp, double fpp) {
    D2 r;
    r.v = f;
    for (int i = 0; i < 3; ++i) r.g[i] = fp * u.g[i];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.h[i][j] = fpp * u.g[i] * u.g[j] + fp * u.h[i][j];
    return r;
}
D2 inv(const D2& u) { return chain(u, 1.0 / u.v, -1.0 / (u.v * u.v), 2.0 / (u.v * u.v * u.v)); }
D2 operator/(const D2& a, const D2& b) { return a * inv(b); }
D2 sqrt(const D2& u) {
    const double s = std::sqrt(u.v);
    return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
D2 log(const D2& u) { return chain(u, std::log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v)); }

// Solver event: synaptic input, threshold breakpoint, or the terminal spike.
struct Event {
    double time = 0.0;
    double amp = 0.0;      // charge; 0 for breaks and terminal
    int input_index = -1;  // >=0 input, -1 terminal, -2 breakpoint
    double target = 0.0;   // contact level just before the jump
    double bind = 0.0;     // binding threshold level at the event
};

struct Candidate {
    LogScalar key;      // noise coefficient referenced to the segment start
    double key_plain = 0.0;  // leakless fast path: plain coefficient value
    bool passive = false;
    int event = -1;  // active contact event / gap's right event for passive
    double lambda_p = 0.0;
    double t_c = 0.0;
    bool first_gap = false;
    double d_val = 0.0, w_val = 0.0, disc = 0.0, level = 0.0;
};

}  // namespace

double free_segment_potential(double eta, double t, double t0, double v0,
                              const std::vector<IsiInput>& inputs, double current,
                              const ModelParams& params) {
    const double c = params.capacitance;
    if (params.leakless()) {
        double v = v0 + (current + eta) * (t - t0) / c;
        for (const auto& in : inputs)
            if (in.time > t0 && in.time < t) v += in.amplitude / c;
        return v;
    }
    const double tau = params.tau();
    const double g = params.conductance;
    double v = v0 * std::exp(-(t - t0) / tau) + (current / g) * one_m_exp((t - t0) / tau) +
               (eta / g) * std::sinh((t - t0) / tau);
    for (const auto& in : inputs)
        if (in.time > t0 && in.time < t) v += (in.amplitude / c) * std::exp(-(t - in.time) / tau);
    return v;
}

double active_candidate(double tm, double target, double t0, double v0,
                        const std::vector<IsiInput>& inputs, double current,
                        const ModelParams& params) {
    if (!(tm > t0)) throw infeasible_isi("active candidate at zero-length offset");
    const double base = free_segment_potential(0.0, tm, t0, v0, inputs, current, params);
    if (params.leakless()) return (target - base) * params.capacitance / (tm - t0);
    const double tau = params.tau();
    return (target - base) * params.conductance / std::sinh((tm - t0) / tau);
}

std::optional<std::pair<double, double>> passive_candidate(
    double gap_begin, double gap_end, double gap_level, double t0, double v0,
    const std::vector<IsiInput>& inputs, double current, const ModelParams& params) {
    if (params.leakless()) return std::nullopt;
    const double g = params.conductance, tau = params.tau(), c = params.capacitance;
    const double y = g * gap_level - current;
    if (y == 0.0) return std::nullopt;
    const double w = std::exp(-(gap_begin - t0) / tau);
    double dpot = free_segment_potential(0.0, gap_begin, t0, v0, inputs, current, params);
    for (const auto& in : inputs)
        if (in.time == gap_begin) dpot += in.amplitude / c;  // jump at the gap edge
    const double d = g * dpot - current;
    if (d == 0.0 || (d > 0.0) != (y > 0.0)) return std::nullopt;
    double disc = d * d - w * w * y * y;
    if (disc < 0.0) {
        if (disc > -1e-13 * d * d) disc = 0.0;
        else return std::nullopt;
    }
    const double lam = y * y / (d + (d > 0.0 ? 1.0 : -1.0) * std::sqrt(disc));
    const double u = lam / y;
    if (!(u > 0.0) || u > 1.0 + 1e-14) return std::nullopt;
    const double tc = gap_begin + tau * std::log(std::max(1.0, y / lam));
    if (tc >= gap_end) return std::nullopt;
    if (tc <= gap_begin && gap_begin > t0) return std::nullopt;
    const double eta = lam * std::exp(-(gap_begin - t0) / tau);
    return std::make_pair(eta, std::max(tc, t0));
}

std::optional<double> passive_contact_duration(double tc, double level, double tl,
                                               double target_l,
                                               const std::vector<IsiInput>& between,
                                               double current, const ModelParams& params) {
    const double g = params.conductance, tau = params.tau(), c = params.capacitance;
    const double cc = level - current / g;
    if (cc == 0.0) return std::nullopt;
    double vb = target_l - current / g;
    for (const auto& in : between)
        if (in.time < tl) vb -= (in.amplitude / c) * std::exp(-(tl - in.time) / tau);
    double q = vb / cc;
    if (q < 1.0) {
        if (q > 1.0 - 1e-12) q = 1.0;
        else return std::nullopt;
    }
    const double e_dep = q + std::sqrt(std::max(0.0, q * q - 1.0));
    const double delta = (tl - tc) - tau * std::log(e_dep);
    if (delta < -1e-10 * tau) return std::nullopt;
    return std::max(0.0, delta);
}

namespace {

// Pin sandwich contribution and its exact derivatives in (d, y, b = g*V_b).
double emit_sandwich(StructureSink* sink, double d_val, double y_val, double b_val, double w,
                     double tau, double big_a, int sign_d, bool has_in, bool has_out,
                     const std::vector<std::pair<int, double>>& d_amp, double d_cur,
                     const std::vector<std::pair<int, double>>& b_amp, double b_cur) {
    const D2 d = D2::var(d_val, 0), y = D2::var(y_val, 1), b = D2::var(b_val, 2);
    D2 ln_u = D2::cnst(0.0);
    D2 contrib_in = D2::cnst(0.0);
    if (has_in) {
        const D2 disc = d * d - D2::cnst(w * w) * y * y;
        const D2 r = sqrt(disc);
        const D2 lam = y * y / (d + D2::cnst(static_cast<double>(sign_d)) * r);
        const D2 u = D2::cnst(w) * lam / y;
        ln_u = log(u);
        contrib_in = D2::cnst(-tau / 4.0) * y * y * (D2::cnst(1.0) - u * u);
    }
    D2 ln_e = D2::cnst(0.0);
    D2 contrib_out = D2::cnst(0.0);
    if (has_out) {
        const D2 q = b / y;
        const D2 e = q + sqrt(q * q - D2::cnst(1.0));
        ln_e = log(e);
        contrib_out = D2::cnst(-tau / 4.0) * y * y * (e * e - D2::cnst(1.0));
    }
    const D2 delta_c = D2::cnst(big_a) + D2::cnst(tau) * ln_u - D2::cnst(tau) * ln_e;
    const D2 s = contrib_in + D2::cnst(-0.5) * y * y * delta_c + contrib_out;
    if (sink) sink->sandwich(s.v, s.g, s.h, d_amp, d_cur, -1.0, b_amp, b_cur);
    return s.v;
}

}  // namespace

OptimalPath solve_isi(const IsiProblem& problem, const ModelParams& params,
                      const ThresholdFn& threshold, StructureSink* sink) {
    problem.validate();
    const double c = params.capacitance;
    const double g = params.conductance;
    const bool leakless = params.leakless() || g * (problem.t_end - problem.t_begin) / c < 1e-12;
    const double tau = leakless ? kInf : c / g;
    const double current = params.currents[problem.neuron];
    const double mu = leakless ? 0.0 : current / g;

    std::vector<Event> ev;
    ev.reserve(problem.inputs.size() + threshold.breaks().size() + 1);
    for (std::size_t m = 0; m < problem.inputs.size(); ++m)
        ev.push_back({problem.inputs[m].time, problem.inputs[m].amplitude, static_cast<int>(m),
                      0.0, 0.0});
    for (double tb : threshold.breaks()) {
        if (tb <= problem.t_begin || tb >= problem.t_end) continue;
        bool dup = false;
        for (const auto& e : ev)
            if (e.time == tb) { dup = true; break; }
        if (!dup) ev.push_back({tb, 0.0, -2, 0.0, 0.0});
    }
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
    ev.push_back({problem.t_end, 0.0, -1, 0.0, 0.0});
    const int n_ev = static_cast<int>(ev.size());

    for (int k = 0; k < n_ev; ++k) {
        const double t_prev = k == 0 ? problem.t_begin : ev[k - 1].time;
        const double lv_left = threshold.at(0.5 * (t_prev + ev[k].time));
        double bind;
        if (ev[k].input_index == -1) {
            bind = std::min(lv_left, threshold.terminal());
        } else {
            const double lv_right = threshold.at(0.5 * (ev[k].time + ev[k + 1].time));
            bind = std::min(lv_left, lv_right);
        }
        ev[k].bind = bind;
        ev[k].target = bind - std::max(ev[k].amp, 0.0) / c;
    }

    OptimalPath path;
    double seg_t0 = problem.t_begin;
    double seg_v0 = problem.v_begin;
    int m0 = 0;
    int start_attach = -1;  // input index whose (negative) jump sets seg_v0

    if (seg_v0 > threshold.at(problem.t_begin) + 1e-12 * params.threshold)
        throw infeasible_isi("initial potential above threshold");

    int guard = 0;
    while (true) {
        if (++guard > 4 * n_ev + 8) throw infeasible_isi("contact search did not terminate");

        // one sweep over remaining events, propagating the eta = 0 potential
        std::vector<Candidate> cands;
        cands.reserve(2 * (n_ev - m0));
        double det = seg_v0;  // after-jump potential at t_run
        double t_run = seg_t0;
        for (int k = m0; k < n_ev; ++k) {
            const double tk = ev[k].time;
            // passive candidate in the gap (t_run, tk)
            if (!leakless && tk > t_run) {
                const double level = threshold.at(0.5 * (t_run + tk));
                const double y = g * level - current;
                const double d = g * det - current;
                if (y != 0.0 && d != 0.0 && (d > 0.0) == (y > 0.0)) {
                    const double w = std::exp(-(t_run - seg_t0) / tau);
                    double disc = d * d - w * w * y * y;
                    if (disc < 0.0 && disc > -1e-13 * d * d) disc = 0.0;
                    if (disc >= 0.0) {
                        const int sd = d > 0.0 ? 1 : -1;
                        const double lam = y * y / (d + sd * std::sqrt(disc));
                        const double u = lam / y;
                        if (u > 0.0 && u <= 1.0 + 1e-14) {
                            const double tc = t_run + tau * std::log(std::max(1.0, y / lam));
                            const bool first_gap = (k == m0);
                            if (tc < tk && (tc > t_run || first_gap)) {
                                Candidate cd;
                                cd.passive = true;
                                cd.key = LogScalar::from_parts(lam, -(t_run - seg_t0) / tau);
                                cd.lambda_p = lam;
                                cd.t_c = std::max(tc, seg_t0);
                                cd.first_gap = first_gap;
                                cd.event = k;
                                cd.d_val = d;
                                cd.w_val = w;
                                cd.disc = disc;
                                cd.level = level;
                                cands.push_back(cd);
                            }
                        }
                    }
                }
            }
            // advance the deterministic potential to tk (before the jump)
            if (leakless) det += current * (tk - t_run) / c;
            else det = mu + (det - mu) * std::exp(-(tk - t_run) / tau);
            // active candidate at tk
            {
                const double dt = tk - seg_t0;
                const double num = ev[k].target - det;
                Candidate cd;
                cd.event = k;
                if (leakless) cd.key_plain = num * c / dt;
                else if (num == 0.0) cd.key = LogScalar{};
                else
                    cd.key = LogScalar{num > 0.0 ? 1 : -1,
                                       std::log(std::fabs(num)) + std::log(g) - log_sinh(dt / tau)};
                cands.push_back(cd);
            }
            det += ev[k].amp / c;
            t_run = tk;
        }

        int best = 0;
        if (leakless) {
            for (int i = 1; i < static_cast<int>(cands.size()); ++i)
                if (cands[i].key_plain < cands[best].key_plain) best = i;
            for (int i = 0; i < static_cast<int>(cands.size()); ++i)
                if (i != best && cands[i].key_plain != 0.0 &&
                    std::fabs(cands[i].key_plain / cands[best].key_plain - 1.0) < 1e-10 &&
                    cands[i].key_plain * cands[best].key_plain > 0.0)
                    path.near_tie = true;
        } else {
            for (int i = 1; i < static_cast<int>(cands.size()); ++i)
                if (cands[i].key < cands[best].key) best = i;
            if (cands[best].passive) {
                for (int i = 0; i < static_cast<int>(cands.size()); ++i)
                    if (!cands[i].passive && cands[i].key.close_to(cands[best].key, 1e-12)) {
                        best = i;
                        break;
                    }
            }
            for (int i = 0; i < static_cast<int>(cands.size()); ++i)
                if (i != best && cands[i].key.close_to(cands[best].key, 1e-10))
                    path.near_tie = true;
        }
        const Candidate win = cands[best];

        // deterministic potential at t_b for the current segment, before the
        // jump at event `upto`
        auto det_at = [&](double t_b, int upto) {
            double v = seg_v0;
            double t0 = seg_t0;
            if (leakless) {
                v += current * (t_b - t0) / c;
                for (int m = m0; m < upto; ++m)
                    if (ev[m].time <= t_b) v += ev[m].amp / c;
                return v;
            }
            v = mu + (v - mu) * std::exp(-(t_b - t0) / tau);
            for (int m = m0; m < upto; ++m)
                if (ev[m].time <= t_b)
                    v += (ev[m].amp / c) * std::exp(-(t_b - ev[m].time) / tau);
            return v;
        };
        // affine sensitivity of the deterministic part at t_b to amplitudes
        auto collect_amp = [&](double t_b, int upto, double scale,
                               std::vector<std::pair<int, double>>& out) {
            for (int m = m0; m < upto; ++m) {
                if (ev[m].input_index < 0 || ev[m].time > t_b) continue;
                const double e = leakless ? 1.0 : std::exp(-(t_b - ev[m].time) / tau);
                out.emplace_back(ev[m].input_index, scale * e / c);
            }
            if (start_attach >= 0) {
                const double e = leakless ? 1.0 : std::exp(-(t_b - seg_t0) / tau);
                out.emplace_back(start_attach, scale * e / c);
            }
        };

        if (!win.passive) {
            const Event& e = ev[win.event];
            const double dt = e.time - seg_t0;
            const double num = e.target - det_at(e.time, win.event);
            double lam_end, weight_b;
            if (leakless) {
                lam_end = num * c / dt;
                weight_b = dt;
            } else {
                lam_end = num * 2.0 * g / one_m_exp(2.0 * dt / tau);
                weight_b = tau * one_m_exp(2.0 * dt / tau) / 2.0;
            }
            path.segments.push_back({PathSegment::Kind::free, seg_t0, e.time, seg_v0, lam_end, 0.0});
            path.log_weight += leakless
                                   ? -0.5 * lam_end * lam_end * dt
                                   : -(tau / 4.0) * lam_end * lam_end * one_m_exp(2.0 * dt / tau);
            if (!path.contacts.empty())
                path.contacts.back().noise_after =
                    leakless ? lam_end : lam_end * std::exp(-dt / tau);
            path.contacts.push_back({e.time, e.input_index, lam_end, 0.0});

            if (sink) {
                const double kf = leakless ? c / dt : 2.0 * g / one_m_exp(2.0 * dt / tau);
                std::vector<std::pair<int, double>> amp;
                collect_amp(e.time, win.event, -kf, amp);
                if (e.input_index >= 0 && e.amp > 0.0) amp.emplace_back(e.input_index, -kf / c);
                const double cur_coeff =
                    leakless ? -1.0 : -2.0 * one_m_exp(dt / tau) / one_m_exp(2.0 * dt / tau);
                sink->free_segment(weight_b, lam_end, amp, cur_coeff);
            }

            if (e.input_index == -1) break;
            seg_v0 = e.target + e.amp / c;
            seg_t0 = e.time;
            start_attach = (e.input_index >= 0 && e.amp < 0.0) ? e.input_index : -1;
            m0 = win.event + 1;
            continue;
        }

        // passive contact: pin at win.level from t_c, depart to the event
        // with the smallest re-contact delay
        const double y = g * win.level - current;
        const double tc = win.t_c;
        const double gap_a = win.first_gap ? seg_t0 : ev[win.event - 1].time;

        int best_l = -1;
        double best_delta = kInf, best_vb = 0.0;
        for (int l = win.event; l < n_ev; ++l) {
            double vb = ev[l].target - mu;
            for (int m = win.event; m < l; ++m)
                if (ev[m].input_index >= 0)
                    vb -= (ev[m].amp / c) * std::exp(-(ev[l].time - ev[m].time) / tau);
            double q = vb / (win.level - mu);
            if (q < 1.0) {
                if (q > 1.0 - 1e-12) q = 1.0;
                else continue;
            }
            const double e_dep = q + std::sqrt(std::max(0.0, q * q - 1.0));
            const double delta = (ev[l].time - tc) - tau * std::log(e_dep);
            if (delta < -1e-10 * tau) continue;
            if (delta < best_delta) {
                best_delta = std::max(0.0, delta);
                best_l = l;
                best_vb = vb;
            }
        }
        if (best_l < 0) throw infeasible_isi("passive contact with no admissible re-contact");

        const double t_d = tc + best_delta;
        const double t_l = ev[best_l].time;
        const double e_dep = std::exp((t_l - t_d) / tau);

        if (tc > seg_t0)
            path.segments.push_back({PathSegment::Kind::free, seg_t0, tc, seg_v0, y, 0.0});
        path.segments.push_back({PathSegment::Kind::passive, tc, t_d, win.level, y, win.level});
        if (t_l > t_d)
            path.segments.push_back({PathSegment::Kind::free, t_d, t_l, win.level, y * e_dep, 0.0});
        path.passive_count += 1;

        const double u_c = std::exp(-(tc - seg_t0) / tau);
        path.log_weight += -(tau / 4.0) * y * y * (1.0 - u_c * u_c) - 0.5 * y * y * best_delta -
                           (tau / 4.0) * y * y * (e_dep * e_dep - 1.0);
        if (!path.contacts.empty()) path.contacts.back().noise_after = y * u_c;
        path.contacts.push_back({t_l, ev[best_l].input_index, y * e_dep, 0.0});

        if (sink) {
            const bool has_in = win.disc > 1e-12 * win.d_val * win.d_val;
            const double cc = win.level - mu;
            const bool has_out = std::fabs(best_vb - cc) > 1e-12 * std::fabs(cc);
            std::vector<std::pair<int, double>> d_amp;
            collect_amp(gap_a, win.event, g, d_amp);
            std::vector<std::pair<int, double>> b_amp;
            for (int m = win.event; m < best_l; ++m)
                if (ev[m].input_index >= 0)
                    b_amp.emplace_back(ev[m].input_index,
                                       -g * std::exp(-(t_l - ev[m].time) / tau) / c);
            if (ev[best_l].input_index >= 0 && ev[best_l].amp > 0.0)
                b_amp.emplace_back(ev[best_l].input_index, -g / c);
            emit_sandwich(sink, win.d_val, y, g * best_vb, win.w_val, tau, t_l - seg_t0,
                          win.d_val > 0.0 ? 1 : -1, has_in, has_out, d_amp, -win.w_val, b_amp,
                          -1.0);
        }

        if (ev[best_l].input_index == -1) break;
        seg_v0 = ev[best_l].target + ev[best_l].amp / c;
        seg_t0 = t_l;
        start_attach = (ev[best_l].input_index >= 0 && ev[best_l].amp < 0.0)
                           ? ev[best_l].input_index
                           : -1;
        m0 = best_l + 1;
    }

    return path;
}

double path_log_weight(const OptimalPath& path, const ModelParams& params) {
    const bool leakless = params.leakless();
    const double tau = params.tau();
    double lw = 0.0;
    for (const auto& s : path.segments) {
        const double dt = s.t_end - s.t_begin;
        if (s.kind == PathSegment::Kind::passive || leakless)
            lw += -0.5 * s.noise_end * s.noise_end * dt;
        else
            lw += -(tau / 4.0) * s.noise_end * s.noise_end * one_m_exp(2.0 * dt / tau);
    }
    return lw;
}

double OptimalPath::potential(double t, const IsiProblem& problem,
                              const ModelParams& params) const {
    const bool leakless = params.leakless();
    const double tau = params.tau(), c = params.capacitance;
    const double current = params.currents[problem.neuron];
    for (const auto& s : segments) {
        if (t < s.t_begin || t > s.t_end) continue;
        if (s.kind == PathSegment::Kind::passive) return s.level;
        if (leakless) {
            double v = s.v_begin + (current + s.noise_end) * (t - s.t_begin) / c;
            for (const auto& in : problem.inputs)
                if (in.time > s.t_begin && in.time <= t && in.time < s.t_end)
                    v += in.amplitude / c;
            return v;
        }
        const double mu = current / params.conductance;
        double v = mu + (s.v_begin - mu) * std::exp(-(t - s.t_begin) / tau);
        for (const auto& in : problem.inputs)
            if (in.time > s.t_begin && in.time <= t && in.time < s.t_end)
                v += (in.amplitude / c) * std::exp(-(t - in.time) / tau);
        const double a = std::exp(-(s.t_end - t) / tau);
        const double b = std::exp(-(s.t_end + t - 2.0 * s.t_begin) / tau);
        v += s.noise_end * (a - b) / (2.0 * params.conductance);
        return v;
    }
    return segments.empty() ? 0.0 : segments.back().level;
}

double OptimalPath::noise(double t, const ModelParams& params) const {
    const bool leakless = params.leakless();
    const double tau = params.tau();
    for (const auto& s : segments) {
        if (t < s.t_begin || t > s.t_end) continue;
        if (s.kind == PathSegment::Kind::passive || leakless) return s.noise_end;
        return s.noise_end * std::exp(-(s.t_end - t) / tau);
    }
    return 0.0;
}

}  // namespace lifnet

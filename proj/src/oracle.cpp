#include "lifnet/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "lifnet/infer.hpp"
#include "lifnet/numeric.hpp"
#include "lifnet/rng.hpp"

namespace lifnet {

namespace {

// residual of interval k for node values before jumps: the jump-free part
// w obeys C w' + g w - I, with jumps folded into per-node offsets
struct GridProblem {
    int nodes = 0;
    double h = 0.0;
    double c = 0.0, g = 0.0, current = 0.0;
    std::vector<double> jump;   // charge applied at node k (0 for most)
    std::vector<double> bound;  // upper bound on the pre-jump node value
    double v_first = 0.0, v_last = 0.0;

    // interval residual between nodes k and k+1 given pre-jump values
    double residual(double vk, double vk1, int k) const {
        const double left = vk + jump[k] / c;  // post-jump value at node k
        return c * (vk1 - left) / h + 0.5 * g * (left + vk1) - current;
    }
};

double grid_objective(const GridProblem& gp, const std::vector<double>& v) {
    double acc = 0.0;
    for (int k = 0; k + 1 < gp.nodes; ++k) {
        const double r = gp.residual(v[k], v[k + 1], k);
        acc += r * r * gp.h;
    }
    return -0.5 * acc;
}

// one projected Gauss-Seidel sweep; returns the largest node move
double sweep(const GridProblem& gp, std::vector<double>& v, double omega) {
    double change = 0.0;
    const double a1 = gp.c / gp.h + 0.5 * gp.g;   // d r_{k-1} / d v_k
    const double a2 = -gp.c / gp.h + 0.5 * gp.g;  // d r_k / d v_k
    const double curv = 2.0 * gp.h * (a1 * a1 + a2 * a2);
    for (int k = 1; k + 1 < gp.nodes; ++k) {
        const double r1 = gp.residual(v[k - 1], v[k], k - 1);
        const double r2 = gp.residual(v[k], v[k + 1], k);
        const double grad = 2.0 * gp.h * (r1 * a1 + r2 * a2);
        double nv = v[k] - omega * grad / curv;
        nv = std::min(nv, gp.bound[k]);
        change = std::max(change, std::fabs(nv - v[k]));
        v[k] = nv;
    }
    return change;
}

// exact stationarity on the current active set: Thomas solves over the free
// runs, then exchange clamped/free nodes until the KKT signs settle
bool active_set_polish(const GridProblem& gp, std::vector<double>& v, int max_rounds) {
    const int n = gp.nodes;
    const double a1 = gp.c / gp.h + 0.5 * gp.g;
    const double a2 = -gp.c / gp.h + 0.5 * gp.g;
    const double scale = std::fabs(gp.c / gp.h) + std::fabs(gp.g) + 1.0;
    const double tol_v = 1e-13 * std::max(1.0, std::fabs(gp.v_last));
    const double tol_g = 1e-12 * scale * scale * gp.h;
    std::vector<char> clamped(n, 0);
    for (int k = 1; k + 1 < n; ++k) clamped[k] = v[k] >= gp.bound[k] - 1e-9;
    std::vector<double> diag(n), rhs(n), cprime(n), dprime(n);
    auto c_of = [&](int k) { return a2 * (gp.jump[k] / gp.c) - gp.current; };
    for (int round = 0; round < max_rounds; ++round) {
        // solve each free run between fixed nodes
        int k = 1;
        while (k + 1 < n) {
            if (clamped[k]) { v[k] = gp.bound[k]; ++k; continue; }
            int lo = k;
            while (k + 1 < n && !clamped[k]) ++k;
            const int hi = k - 1;  // free run [lo, hi]
            const double vl = lo - 1 == 0 ? v[0] : v[lo - 1];
            const double vr = hi + 1 == n - 1 ? v[n - 1] : gp.bound[hi + 1];
            const int m = hi - lo + 1;
            for (int i = 0; i < m; ++i) {
                const int node = lo + i;
                diag[i] = a1 * a1 + a2 * a2;
                rhs[i] = -(a1 * c_of(node - 1) + a2 * c_of(node));
            }
            rhs[0] -= a1 * a2 * vl;
            rhs[m - 1] -= a1 * a2 * vr;
            // Thomas with constant off-diagonal a1*a2
            const double off = a1 * a2;
            cprime[0] = off / diag[0];
            dprime[0] = rhs[0] / diag[0];
            for (int i = 1; i < m; ++i) {
                const double den = diag[i] - off * cprime[i - 1];
                cprime[i] = off / den;
                dprime[i] = (rhs[i] - off * dprime[i - 1]) / den;
            }
            double prev = dprime[m - 1];
            v[lo + m - 1] = prev;
            for (int i = m - 2; i >= 0; --i) {
                prev = dprime[i] - cprime[i] * prev;
                v[lo + i] = prev;
            }
        }
        // exchange step: clamp every violation; when feasible, release the
        // top tier of mis-signed multipliers (objective-monotone batches)
        bool changed = false;
        for (int j = 1; j + 1 < n; ++j) {
            if (!clamped[j] && v[j] > gp.bound[j] + tol_v) {
                clamped[j] = 1;
                v[j] = gp.bound[j];
                changed = true;
            }
        }
        if (!changed) {
            double worst_grad = tol_g;
            for (int j = 1; j + 1 < n; ++j) {
                if (!clamped[j]) continue;
                const double r1 = gp.residual(v[j - 1], v[j], j - 1);
                const double r2 = gp.residual(v[j], v[j + 1], j);
                const double grad = 2.0 * gp.h * (r1 * a1 + r2 * a2);
                if (grad > worst_grad) worst_grad = grad;
            }
            if (worst_grad <= tol_g) return true;
            for (int j = 1; j + 1 < n; ++j) {
                if (!clamped[j]) continue;
                const double r1 = gp.residual(v[j - 1], v[j], j - 1);
                const double r2 = gp.residual(v[j], v[j + 1], j);
                const double grad = 2.0 * gp.h * (r1 * a1 + r2 * a2);
                if (grad > std::max(tol_g, 0.3 * worst_grad)) {
                    clamped[j] = 0;
                    changed = true;
                }
            }
        }
    }
    return false;
}

}  // namespace

GridPath grid_optimal_path(const IsiProblem& problem, const ModelParams& params, int nodes,
                           int max_sweeps) {
    problem.validate();
    if (nodes < 8) throw model_error("grid path needs at least 8 nodes");
    const double span = problem.length();
    const double c = params.capacitance;

    auto build = [&](int n_nodes) {
        GridProblem gp;
        gp.nodes = n_nodes;
        gp.h = span / (n_nodes - 1);
        gp.c = c;
        gp.g = params.conductance;
        gp.current = params.currents[problem.neuron];
        gp.jump.assign(n_nodes, 0.0);
        gp.bound.assign(n_nodes, params.threshold);
        for (const auto& in : problem.inputs) {
            const int k = static_cast<int>(std::lround((in.time - problem.t_begin) / gp.h));
            gp.jump[std::min(std::max(k, 1), n_nodes - 2)] += in.amplitude;
        }
        for (int k = 0; k < n_nodes; ++k)
            if (gp.jump[k] > 0.0) gp.bound[k] = params.threshold - gp.jump[k] / c;
        gp.v_first = problem.v_begin;
        gp.v_last = params.threshold;
        return gp;
    };

    // multilevel warm start; the answer comes from the finest level only
    std::vector<int> levels;
    for (int n = nodes; n >= 64; n = n / 2 + 1) levels.push_back(n);
    std::reverse(levels.begin(), levels.end());

    std::vector<double> v;
    GridPath out;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const int n = levels[li];
        GridProblem gp = build(n);
        std::vector<double> vn(n);
        if (li == 0) {
            for (int k = 0; k < n; ++k) {
                const double t = static_cast<double>(k) / (n - 1);
                vn[k] = std::min(gp.v_first + t * (gp.v_last - gp.v_first), gp.bound[k]);
            }
        } else {
            const int prev_n = levels[li - 1];
            for (int k = 0; k < n; ++k) {
                const double x = static_cast<double>(k) * (prev_n - 1) / (n - 1);
                const int k0 = std::min(static_cast<int>(x), prev_n - 2);
                const double f = x - k0;
                vn[k] = std::min((1.0 - f) * v[k0] + f * v[k0 + 1], gp.bound[k]);
            }
        }
        vn.front() = gp.v_first;
        vn.back() = gp.v_last;

        const bool finest = li + 1 == levels.size();
        const int cap = finest ? std::min(max_sweeps, 1200) : 300;
        // near-optimal over-relaxation for the tridiagonal chain
        const double omega = std::min(1.999, 2.0 / (1.0 + std::sin(M_PI / (n - 1))));
        int s = 0;
        for (; s < cap; ++s) {
            const double moved = sweep(gp, vn, omega);
            if (moved < 1e-9 * std::max(1.0, std::fabs(gp.v_last))) break;
        }
        // descent identified the contact set; finish it to stationarity,
        // keeping the relaxation answer if the polish fails to settle
        std::vector<double> trial = vn;
        const bool polished = active_set_polish(gp, trial, finest ? 3000 : 200);
        if (polished || grid_objective(gp, trial) >= grid_objective(gp, vn)) vn = std::move(trial);
        v = std::move(vn);
        if (finest) {
            out.converged = polished;
            out.sweeps = s;
            out.objective = grid_objective(gp, v);
            out.times.resize(n);
            for (int k = 0; k < n; ++k) out.times[k] = problem.t_begin + k * gp.h;
            out.potentials = v;
        }
    }
    return out;
}

McEstimate mc_survival(double dt_total, double v0, const OuSpec& spec, int n_paths,
                       std::uint64_t seed, double step, bool bridge) {
    Rng rng(seed);
    const double tau = spec.tau();
    const double sv = spec.noise_std / spec.capacitance;  // diffusion on the potential
    const long steps = std::max<long>(1, std::lround(dt_total / step));
    const double h = dt_total / steps;
    const double var_h = sv * sv * h;
    int survived = 0;
    for (int p = 0; p < n_paths; ++p) {
        double v = v0;
        bool alive = v < spec.threshold;
        for (long s = 0; s < steps && alive; ++s) {
            const double v_prev = v;
            v += (-(v - spec.mean_potential()) / tau) * h + sv * std::sqrt(h) * rng.normal();
            if (v >= spec.threshold) { alive = false; break; }
            if (bridge) {
                const double a = spec.threshold - v_prev;
                const double b = spec.threshold - v;
                const double p_cross = std::exp(-2.0 * a * b / var_h);
                if (rng.uniform() < p_cross) { alive = false; break; }
            }
        }
        if (alive) ++survived;
    }
    McEstimate e;
    e.value = static_cast<double>(survived) / n_paths;
    e.std_err = std::sqrt(std::max(e.value * (1.0 - e.value), 1.0 / n_paths) / n_paths);
    return e;
}

McEstimate mc_bridge_variance(double isi, const ModelParams& params, int n_paths,
                              std::uint64_t seed) {
    Rng rng(seed);
    const double c = params.capacitance;
    const bool leakless = params.leakless();
    const double tau = params.tau();
    const double mu = leakless ? 0.0 : params.currents.empty() ? 0.0 : params.currents[0] /
                                                                           params.conductance;
    const double vinf = leakless ? 0.0
                                 : params.noise_std * params.noise_std /
                                       (2.0 * params.conductance * c);
    const double sd2 = params.noise_std * params.noise_std / (c * c);  // diffusion coefficient
    const int steps = 64;
    const double h = isi / steps;
    const double b_end = params.threshold;

    double s1 = 0.0, s2 = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        double x = 0.0;
        double mid = 0.0;
        for (int s = 0; s < steps; ++s) {
            const double t_left = isi - s * h;  // time remaining to the endpoint
            double mean, var;
            if (leakless) {
                mean = x + (b_end - x) * h / t_left;
                var = sd2 * h * (t_left - h) / t_left;
            } else {
                const double r1 = std::exp(-h / tau);
                const double r2 = std::exp(-(t_left - h) / tau);
                const double mean_u = mu + (x - mu) * r1;
                const double var_u = vinf * (1.0 - r1 * r1);
                const double denom = var_u * r2 * r2 + vinf * (1.0 - r2 * r2);
                const double gain = denom > 0.0 ? var_u * r2 / denom : 0.0;
                mean = mean_u + gain * (b_end - (mu + (mean_u - mu) * r2));
                var = denom > 0.0 ? var_u * vinf * (1.0 - r2 * r2) / denom : 0.0;
            }
            x = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
            if (s + 1 == steps / 2) mid = x;
        }
        s1 += mid;
        s2 += mid * mid;
    }
    McEstimate e;
    const double mean = s1 / n_paths;
    e.value = s2 / n_paths - mean * mean;
    e.std_err = e.value * std::sqrt(2.0 / (n_paths - 1));
    return e;
}

McEstimate mc_first_passage(double v0, const OuSpec& spec, int n_paths, std::uint64_t seed,
                            double step) {
    Rng rng(seed);
    const double tau = spec.tau();
    const double sv = spec.noise_std / spec.capacitance;
    const double cap = 2000.0 * tau;
    double s1 = 0.0, s2 = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        double v = v0, t = 0.0;
        while (v < spec.threshold && t < cap) {
            v += (-(v - spec.mean_potential()) / tau) * step +
                 sv * std::sqrt(step) * rng.normal();
            t += step;
        }
        s1 += t;
        s2 += t * t;
    }
    McEstimate e;
    e.value = s1 / n_paths;
    const double var = s2 / n_paths - e.value * e.value;
    e.std_err = std::sqrt(std::max(var, 0.0) / n_paths);
    return e;
}

GridSearchResult grid_search_mle(const Recording& rec, int neuron,
                                 const std::vector<int>& slots,
                                 const std::vector<std::vector<double>>& grids,
                                 const ModelParams& known) {
    if (slots.size() > 3) throw model_error("grid search limited to 3 free parameters");
    GridSearchResult best;
    best.best.assign(slots.size(), 0.0);
    ModelParams cand = known;
    InferenceOptions opt;
    std::vector<std::size_t> idx(slots.size(), 0);
    while (true) {
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const double val = grids[s][idx[s]];
            if (slots[s] == neuron) cand.currents[neuron] = val;
            else cand.couplings[neuron][slots[s]] = val;
        }
        std::vector<double> per;
        const double l = log_likelihood(rec, cand, opt, &per);
        (void)l;
        if (per[neuron] > best.lstar) {
            best.lstar = per[neuron];
            for (std::size_t s = 0; s < slots.size(); ++s) best.best[s] = grids[s][idx[s]];
        }
        std::size_t s = 0;
        for (; s < slots.size(); ++s) {
            if (++idx[s] < grids[s].size()) break;
            idx[s] = 0;
        }
        if (s == slots.size()) break;
    }
    return best;
}

}  // namespace lifnet

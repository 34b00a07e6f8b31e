#include "lifnet/infer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <thread>

namespace lifnet {

namespace {

// Parameter slots for neuron i: slot j = J_ij (j != i), slot i = I_i.
struct DerivAccumulator final : StructureSink {
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    int current_slot = 0;
    const std::vector<IsiInput>* inputs = nullptr;  // of the ISI being solved

    // scratch: dense slot -> coefficient map per call
    std::vector<double> w_slot;
    std::vector<int> w_used;

    explicit DerivAccumulator(int n, int cur_slot)
        : grad(Eigen::VectorXd::Zero(n)), hess(Eigen::MatrixXd::Zero(n, n)),
          current_slot(cur_slot), w_slot(n, 0.0) {}

    void scatter(const std::vector<std::pair<int, double>>& amp_coeff, double cur_coeff) {
        for (int s : w_used) w_slot[s] = 0.0;
        w_used.clear();
        for (const auto& [m, coeff] : amp_coeff) {
            for (const auto& [src, wgt] : (*inputs)[m].weights) {
                if (w_slot[src] == 0.0) w_used.push_back(src);
                w_slot[src] += wgt * coeff;
            }
        }
        if (cur_coeff != 0.0) {
            if (w_slot[current_slot] == 0.0) w_used.push_back(current_slot);
            w_slot[current_slot] += cur_coeff;
        }
    }

    void free_segment(double weight_b, double lambda_end,
                      const std::vector<std::pair<int, double>>& amp_coeff,
                      double cur_coeff) override {
        scatter(amp_coeff, cur_coeff);
        for (int a : w_used) {
            grad[a] += -weight_b * lambda_end * w_slot[a];
            for (int b : w_used) hess(a, b) += -weight_b * w_slot[a] * w_slot[b];
        }
    }

    void sandwich(double, const double g3[3], const double h33[3][3],
                  const std::vector<std::pair<int, double>>& d_amp, double d_cur, double y_cur,
                  const std::vector<std::pair<int, double>>& vb_amp, double vb_cur) override {
        // gradients of the three affine variables, stacked densely
        std::vector<std::array<double, 3>> cols;  // (slot -> 3 coefficients)
        std::vector<int> used;
        auto add = [&](int slot, int var, double val) {
            for (std::size_t k = 0; k < used.size(); ++k)
                if (used[k] == slot) { cols[k][var] += val; return; }
            used.push_back(slot);
            cols.push_back({0.0, 0.0, 0.0});
            cols.back()[var] = val;
        };
        for (const auto& [m, coeff] : d_amp)
            for (const auto& [src, wgt] : (*inputs)[m].weights) add(src, 0, wgt * coeff);
        add(current_slot, 0, d_cur);
        add(current_slot, 1, y_cur);
        for (const auto& [m, coeff] : vb_amp)
            for (const auto& [src, wgt] : (*inputs)[m].weights) add(src, 2, wgt * coeff);
        add(current_slot, 2, vb_cur);

        for (std::size_t a = 0; a < used.size(); ++a) {
            double ga = 0.0;
            for (int v = 0; v < 3; ++v) ga += g3[v] * cols[a][v];
            grad[used[a]] += ga;
            for (std::size_t b = 0; b < used.size(); ++b) {
                double hab = 0.0;
                for (int u = 0; u < 3; ++u)
                    for (int v = 0; v < 3; ++v) hab += h33[u][v] * cols[a][u] * cols[b][v];
                hess(used[a], used[b]) += hab;
            }
        }
    }
};

struct NeuronWork {
    int neuron = 0;
    int n = 0;
    std::vector<IsiProblem> problems;
    ModelParams mp;  // scratch: physical constants + candidate current
    double max_isi = 0.0;

    void refresh(const Eigen::VectorXd& p) {
        mp.currents[neuron] = p[neuron];
        for (auto& pr : problems)
            for (auto& in : pr.inputs) {
                double a = 0.0;
                for (const auto& [src, wgt] : in.weights) a += wgt * p[src];
                in.amplitude = a;
            }
    }
};

NeuronWork make_work(const Recording& rec, int neuron, const ModelParams& known,
                     const InferenceOptions& options) {
    NeuronWork w;
    w.neuron = neuron;
    w.n = rec.neuron_count;
    ModelParams shaped = known;
    if (options.tau_override && *options.tau_override > 0.0)
        shaped.conductance = known.capacitance / *options.tau_override;
    shaped.refractory = options.tau_r > 0.0 ? options.tau_r : known.refractory;
    shaped.delay = options.tau_d > 0.0 ? options.tau_d : known.delay;
    w.problems = build_isi_problems(rec, shaped, neuron, options.coincidence_window);
    w.mp = ModelParams::uniform(rec.neuron_count, shaped.capacitance, shaped.conductance,
                                shaped.threshold, options.sigma, 0.0);
    for (const auto& pr : w.problems) w.max_isi = std::max(w.max_isi, pr.length());
    return w;
}

struct EvalOut {
    double lstar = 0.0;
    long active = 0, passive = 0;
    bool near_tie = false;
    bool feasible = true;
};

EvalOut evaluate(NeuronWork& w, const Eigen::VectorXd& p, const ThresholdTable* table,
                 DerivAccumulator* acc) {
    w.refresh(p);
    EvalOut out;
    const ThresholdFn fixed_thr = ThresholdFn::constant(w.mp.threshold);
    for (auto& pr : w.problems) {
        ThresholdFn thr = table ? table->as_threshold_fn(pr.t_begin, pr.t_end) : fixed_thr;
        if (acc) acc->inputs = &pr.inputs;
        OptimalPath path;
        try {
            path = solve_isi(pr, w.mp, thr, acc);
        } catch (const infeasible_isi&) {
            out.feasible = false;
            out.lstar = -kInf;
            return out;
        }
        out.lstar += path.log_weight;
        out.active += static_cast<long>(path.contacts.size());
        out.passive += path.passive_count;
        out.near_tie |= path.near_tie;
    }
    return out;
}

double prior_penalty(const Eigen::VectorXd& p, int neuron, const PriorBounds& pb) {
    double w = 0.0;
    for (int j = 0; j < p.size(); ++j) {
        if (j == neuron) continue;
        if (p[j] < pb.j_min) w += 0.5 * pb.weight * (p[j] - pb.j_min) * (p[j] - pb.j_min);
        if (p[j] > pb.j_max) w += 0.5 * pb.weight * (p[j] - pb.j_max) * (p[j] - pb.j_max);
    }
    return w;
}

void prior_derivatives(const Eigen::VectorXd& p, int neuron, const PriorBounds& pb,
                       Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    for (int j = 0; j < p.size(); ++j) {
        if (j == neuron) continue;
        if (p[j] < pb.j_min) {
            grad[j] -= pb.weight * (p[j] - pb.j_min);
            hess(j, j) -= pb.weight;
        } else if (p[j] > pb.j_max) {
            grad[j] -= pb.weight * (p[j] - pb.j_max);
            hess(j, j) -= pb.weight;
        }
    }
}

ThresholdTable build_table_for(const NeuronWork& w, const Eigen::VectorXd& p,
                               const Recording& rec, const InferenceOptions& options) {
    std::vector<double> rates(rec.neuron_count);
    for (int j = 0; j < rec.neuron_count; ++j) rates[j] = rec.rate(j);
    double ie = p[w.neuron];
    for (int j = 0; j < rec.neuron_count; ++j)
        if (j != w.neuron) ie += p[j] * rates[j];
    ModelParams mp = w.mp;
    mp.noise_std = options.sigma;
    const auto edges =
        default_table_edges(mp.tau(), std::max(w.max_isi, mp.tau()), options.mt_bins);
    return build_threshold_table(mp, ie, edges, options.mt_intercept);
}

}  // namespace

double log_likelihood(const Recording& rec, const ModelParams& candidate,
                      const InferenceOptions& options, std::vector<double>* per_neuron) {
    rec.validate();
    candidate.validate();
    if (per_neuron) per_neuron->assign(rec.neuron_count, 0.0);
    double total = 0.0;
    for (int i = 0; i < rec.neuron_count; ++i) {
        if (rec.trains[i].size() < 2) continue;
        NeuronWork w = make_work(rec, i, candidate, options);
        Eigen::VectorXd p = Eigen::VectorXd::Zero(rec.neuron_count);
        p[i] = candidate.currents[i];
        for (int j = 0; j < rec.neuron_count; ++j)
            if (j != i) p[j] = candidate.couplings[i][j];
        std::optional<ThresholdTable> table;
        if (options.mode == ThresholdMode::moving)
            table = build_table_for(w, p, rec, options);
        EvalOut out = evaluate(w, p, table ? &*table : nullptr, nullptr);
        if (!out.feasible)
            throw infeasible_isi("infeasible ISI for neuron " + std::to_string(i));
        total += out.lstar;
        if (per_neuron) (*per_neuron)[i] = out.lstar;
    }
    return total;
}

namespace {

// Hessian and gradient in raw coordinates (J..., I); conversion to the
// reported v-coordinates happens at the boundary.
void raw_gradient_hessian(NeuronWork& w, const Eigen::VectorXd& p, const ThresholdTable* table,
                          Eigen::VectorXd& grad, Eigen::MatrixXd& hess, EvalOut& out) {
    DerivAccumulator acc(w.n, w.neuron);
    out = evaluate(w, p, table, &acc);
    grad = std::move(acc.grad);
    hess = std::move(acc.hess);
}

void to_v_coords(Eigen::VectorXd& grad, Eigen::MatrixXd& hess, int slot, double scale) {
    if (scale == 1.0 || !(scale < kInf)) return;
    grad[slot] /= scale;
    hess.row(slot) /= scale;
    hess.col(slot) /= scale;
}

}  // namespace

void gradient_hessian(const Recording& rec, int neuron, const ModelParams& candidate,
                      const InferenceOptions& options, Eigen::VectorXd& grad,
                      Eigen::MatrixXd& hess, double* lstar) {
    NeuronWork w = make_work(rec, neuron, candidate, options);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(rec.neuron_count);
    p[neuron] = candidate.currents[neuron];
    for (int j = 0; j < rec.neuron_count; ++j)
        if (j != neuron) p[j] = candidate.couplings[neuron][j];
    std::optional<ThresholdTable> table;
    if (options.mode == ThresholdMode::moving) table = build_table_for(w, p, rec, options);
    EvalOut out;
    raw_gradient_hessian(w, p, table ? &*table : nullptr, grad, hess, out);
    if (!out.feasible) throw infeasible_isi("infeasible ISI in gradient evaluation");
    const double vscale = w.mp.leakless() ? 1.0 : w.mp.tau();
    to_v_coords(grad, hess, neuron, vscale);
    if (lstar) *lstar = out.lstar;
}

NeuronResult infer_neuron(const Recording& rec, int neuron, const ModelParams& known,
                          const InferenceOptions& options) {
    NeuronResult res;
    res.neuron = neuron;
    res.couplings.assign(rec.neuron_count, 0.0);
    if (rec.trains[neuron].size() < 2) {
        res.skipped = true;
        return res;
    }
    NeuronWork w = make_work(rec, neuron, known, options);
    const int n = rec.neuron_count;
    const double cvth = w.mp.capacitance * w.mp.threshold;

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    if (options.init_from_known) {
        p[neuron] = known.currents[neuron];
        for (int j = 0; j < n; ++j)
            if (j != neuron) p[j] = known.couplings[neuron][j];
    }
    for (int s : options.pinned_slots)
        p[s] = s == neuron ? known.currents[neuron] : known.couplings[neuron][s];
    std::vector<bool> pinned(n, false);
    for (int s : options.pinned_slots) pinned[s] = true;

    std::optional<ThresholdTable> table;
    auto rebuild_table = [&]() {
        if (options.mode == ThresholdMode::moving) table = build_table_for(w, p, rec, options);
    };
    rebuild_table();

    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    EvalOut out;
    raw_gradient_hessian(w, p, table ? &*table : nullptr, grad, hess, out);
    if (!out.feasible) throw infeasible_isi("infeasible ISI at the initial point");
    double lstar = out.lstar;
    double objective = lstar - (options.prior ? prior_penalty(p, neuron, *options.prior) : 0.0);

    bool converged = false;
    int iter = 0;
    int small_steps = 0;
    for (; iter < options.max_iters; ++iter) {
        Eigen::VectorXd g_obj = grad;
        Eigen::MatrixXd h_obj = hess;
        if (options.prior) prior_derivatives(p, neuron, *options.prior, g_obj, h_obj);
        for (int s = 0; s < n; ++s) {
            if (!pinned[s]) continue;
            g_obj[s] = 0.0;
            h_obj.row(s).setZero();
            h_obj.col(s).setZero();
            h_obj(s, s) = -1.0;
        }
        Eigen::MatrixXd a = -h_obj;
        const double ridge = 1e-12 * (a.trace() / n + 1.0);
        a.diagonal().array() += ridge;
        Eigen::VectorXd step = a.ldlt().solve(g_obj);

        const double gnorm = g_obj.lpNorm<Eigen::Infinity>();
        res.grad_norm = gnorm;
        const double gtol = options.grad_tol * (1.0 + std::fabs(lstar)) / cvth;
        if (gnorm < gtol) {
            converged = true;
            break;
        }

        // damped ascent
        double alpha = 1.0;
        double new_obj = -kInf, new_lstar = 0.0;
        Eigen::VectorXd p_new;
        bool moved = false;
        for (int h = 0; h < 50; ++h, alpha *= 0.5) {
            p_new = p + alpha * step;
            EvalOut eo = evaluate(w, p_new, table ? &*table : nullptr, nullptr);
            if (!eo.feasible) continue;
            const double cand =
                eo.lstar - (options.prior ? prior_penalty(p_new, neuron, *options.prior) : 0.0);
            if (cand >= objective - 1e-30) {
                new_obj = cand;
                new_lstar = eo.lstar;
                moved = true;
                break;
            }
        }
        if (!moved) {
            converged = true;  // no ascent available along the Newton direction
            break;
        }
        const double delta_obj = new_obj - objective;
        const double step_norm = (p_new - p).lpNorm<Eigen::Infinity>() / cvth;
        p = p_new;
        objective = new_obj;
        lstar = new_lstar;

        double table_drift = 0.0;
        if (options.mode == ThresholdMode::moving) {
            rebuild_table();
            EvalOut eo = evaluate(w, p, &*table, nullptr);
            table_drift = std::fabs(eo.lstar - lstar);
            lstar = eo.lstar;
            objective = lstar - (options.prior ? prior_penalty(p, neuron, *options.prior) : 0.0);
        }
        raw_gradient_hessian(w, p, table ? &*table : nullptr, grad, hess, out);
        lstar = out.lstar;

        small_steps = delta_obj < options.epsilon ? small_steps + 1 : 0;
        if (delta_obj < options.epsilon &&
            (options.mode == ThresholdMode::fixed || table_drift < 1e3 * options.epsilon ||
             step_norm < 1e-8 || small_steps >= 2)) {
            converged = true;
            ++iter;
            break;
        }
    }

    res.current = p[neuron];
    for (int j = 0; j < n; ++j) res.couplings[j] = j == neuron ? 0.0 : p[j];
    res.log_likelihood = lstar;
    res.iterations = iter;
    res.converged = converged;
    res.boundary_flag = out.near_tie;
    res.active_contacts = out.active;
    res.passive_contacts = out.passive;
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();

    // reported Hessian in v-coordinates
    Eigen::VectorXd gv = grad;
    Eigen::MatrixXd hv = hess;
    const double vscale = w.mp.leakless() ? 1.0 : w.mp.tau();
    to_v_coords(gv, hv, neuron, vscale);
    res.hessian = hv;
    // error bars: sigma * sqrt(diag (-H)^-1), infinite on null directions
    const double sig = options.sigma > 0.0 ? options.sigma : 1.0;
    Eigen::MatrixXd m = -hv;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    res.error_bars.assign(n, kInf);
    if (es.info() == Eigen::Success) {
        const double lam_max = es.eigenvalues().maxCoeff();
        const double cutoff = std::max(lam_max, 1.0) * 1e-12;
        for (int a = 0; a < n; ++a) {
            double var = 0.0;
            bool null_dir = false;
            for (int k = 0; k < n; ++k) {
                const double lam = es.eigenvalues()[k];
                const double c2 = es.eigenvectors()(a, k) * es.eigenvectors()(a, k);
                if (lam <= cutoff) {
                    if (c2 > 1e-12) null_dir = true;
                    continue;
                }
                var += c2 / lam;
            }
            res.error_bars[a] = null_dir ? kInf : sig * std::sqrt(var);
        }
    }
    res.current_error_bar =
        res.error_bars[neuron] == kInf ? kInf : res.error_bars[neuron] / (w.mp.leakless() ? 1.0 : w.mp.tau());
    return res;
}

InferenceResult infer_all(const Recording& rec, const ModelParams& known,
                          const InferenceOptions& options) {
    rec.validate();
    InferenceResult result;
    result.neurons.resize(rec.neuron_count);
    const int threads = std::max(1, options.threads);
    if (threads == 1) {
        for (int i = 0; i < rec.neuron_count; ++i)
            result.neurons[i] = infer_neuron(rec, i, known, options);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < rec.neuron_count; i = next.fetch_add(1))
                    result.neurons[i] = infer_neuron(rec, i, known, options);
            });
        for (auto& th : pool) th.join();
    }
    result.all_converged = true;
    result.total_log_likelihood = 0.0;
    for (const auto& nr : result.neurons) {
        result.total_log_likelihood += nr.log_likelihood;
        if (!nr.skipped && !nr.converged) result.all_converged = false;
    }
    return result;
}

}  // namespace lifnet

#include "lifnet/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "lifnet/numeric.hpp"

namespace lifnet {

std::vector<double> error_bars(const Eigen::MatrixXd& hessian, double sigma) {
    const int n = static_cast<int>(hessian.rows());
    Eigen::MatrixXd m = -hessian;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    std::vector<double> bars(n, kInf);
    if (es.info() != Eigen::Success) return bars;
    const double cutoff = std::max(es.eigenvalues().maxCoeff(), 1.0) * 1e-12;
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
        bars[a] = null_dir ? kInf : sigma * std::sqrt(var);
    }
    return bars;
}

MarginalCurve marginal_log_likelihood(const Recording& rec, int neuron, int slot,
                                      const std::vector<double>& grid, const ModelParams& known,
                                      const InferenceOptions& options) {
    MarginalCurve curve;
    curve.grid = grid;
    InferenceOptions opt = options;
    opt.pinned_slots = {slot};
    ModelParams pinned = known;
    for (double v : grid) {
        if (slot == neuron) pinned.currents[neuron] = v;
        else pinned.couplings[neuron][slot] = v;
        NeuronResult r = infer_neuron(rec, neuron, pinned, opt);
        curve.values.push_back(r.log_likelihood);
        curve.ok.push_back(r.converged);
    }
    // one-sided curvatures around the maximum
    int kmax = 0;
    for (std::size_t k = 1; k < curve.values.size(); ++k)
        if (curve.values[k] > curve.values[kmax]) kmax = static_cast<int>(k);
    auto second_diff = [&](int a, int b, int c) {
        const double h1 = grid[b] - grid[a], h2 = grid[c] - grid[b];
        return 2.0 * (curve.values[a] * h2 - curve.values[b] * (h1 + h2) + curve.values[c] * h1) /
               (h1 * h2 * (h1 + h2));
    };
    if (kmax >= 2) curve.left_curvature = second_diff(kmax - 2, kmax - 1, kmax);
    if (kmax + 2 < static_cast<int>(grid.size()))
        curve.right_curvature = second_diff(kmax, kmax + 1, kmax + 2);
    if (curve.left_curvature != 0.0 && curve.right_curvature != 0.0) {
        const double r = std::fabs(curve.left_curvature / curve.right_curvature);
        curve.asymmetric = r > 1.2 || r < 1.0 / 1.2;
    }
    return curve;
}

Eigen::MatrixXd weak_coupling_hessian(const Recording& rec, int neuron, double tau) {
    const int n = rec.neuron_count;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    const auto& own = rec.trains[neuron];
    std::vector<double> phi(n);
    for (std::size_t k = 0; k + 1 < own.size(); ++k) {
        const double t0 = own[k], t1 = own[k + 1];
        const double dk = t1 - t0;
        const double mu_k = 2.0 / (tau * one_m_exp(2.0 * dk / tau));
        std::fill(phi.begin(), phi.end(), 0.0);
        for (int j = 0; j < n; ++j) {
            if (j == neuron) continue;
            const auto& tr = rec.trains[j];
            auto it = std::upper_bound(tr.begin(), tr.end(), t0);
            for (; it != tr.end() && *it < t1; ++it) phi[j] += std::exp(-(t1 - *it) / tau);
        }
        phi[neuron] = one_m_exp(dk / tau);
        for (int a = 0; a < n; ++a) {
            if (phi[a] == 0.0) continue;
            for (int b = 0; b < n; ++b) h(a, b) += mu_k * phi[a] * phi[b];
        }
    }
    return h;
}

EigenReport eigen_report(const Eigen::MatrixXd& hessian, const Recording& rec, int neuron,
                         double tau, double sigma) {
    const int n = rec.neuron_count;
    EigenReport rep;
    Eigen::MatrixXd m = -hessian / (sigma * sigma);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    rep.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);

    // rate vector with 1/tau on the current slot
    Eigen::VectorXd f(n);
    double mean_isi = 0.0;
    for (int j = 0; j < n; ++j) f[j] = rec.rate(j);
    f[neuron] = 1.0 / tau;
    const auto& own = rec.trains[neuron];
    if (own.size() >= 2) mean_isi = (own.back() - own.front()) / (own.size() - 1);
    const double t_total = rec.duration;

    rep.lambda_max_predicted = t_total / (sigma * sigma) * f.squaredNorm();
    // per-source rate variances over the ISIs of `neuron`
    rep.omega.assign(n, 0.0);
    if (own.size() >= 2) {
        for (int j = 0; j < n; ++j) {
            if (j == neuron) continue;
            double acc = 0.0, tsum = 0.0;
            const auto& tr = rec.trains[j];
            for (std::size_t k = 0; k + 1 < own.size(); ++k) {
                const double dk = own[k + 1] - own[k];
                const auto lo = std::upper_bound(tr.begin(), tr.end(), own[k]);
                const auto hi = std::lower_bound(tr.begin(), tr.end(), own[k + 1]);
                const double fk = static_cast<double>(hi - lo) / dk;
                acc += dk * (fk - f[j]) * (fk - f[j]);
                tsum += dk;
            }
            rep.omega[j] = tsum > 0.0 ? acc / tsum : 0.0;
        }
    }
    double inv_sum = 1.0;
    for (int j = 0; j < n; ++j)
        if (j != neuron && rep.omega[j] > 0.0) inv_sum += f[j] * f[j] / rep.omega[j];
    rep.lambda_min_predicted = t_total / (sigma * sigma * tau * tau * inv_sum);

    const Eigen::VectorXd vmax = es.eigenvectors().col(n - 1);
    const Eigen::VectorXd vmin = es.eigenvectors().col(0);
    const double fo = vmax.dot(f);
    rep.vmax_rate_overlap2 = fo * fo / (f.squaredNorm() * vmax.squaredNorm());
    rep.vmin_current_overlap2 = vmin[neuron] * vmin[neuron] / vmin.squaredNorm();
    rep.eps.assign(n, 0.0);
    for (int j = 0; j < n; ++j)
        if (j != neuron && rep.omega[j] > 0.0)
            rep.eps[j] = f[j] * tau * sigma * sigma * rep.eigenvalues.front() /
                         (rep.omega[j] * t_total);

    // quadratic form along the rate direction vs (T/sigma^2) (dIe)^2, where
    // dIe = dv . f for a v-space perturbation dv
    const double quad = f.dot(m * f);
    const double die2 = f.squaredNorm() * f.squaredNorm();
    rep.effective_current_quadratic_ratio = quad / (t_total / (sigma * sigma) * die2);

    rep.regime_ok = mean_isi > 0.0 && tau > 3.0 * mean_isi;
    return rep;
}

double windowed_rate(const Recording& rec, int neuron_i, int neuron_j, double tau) {
    const auto& own = rec.trains[neuron_i];
    const auto& tr = rec.trains[neuron_j];
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < own.size(); ++k) {
        auto it = std::upper_bound(tr.begin(), tr.end(), own[k]);
        for (; it != tr.end() && *it < own[k + 1]; ++it)
            acc += std::exp(-(own[k + 1] - *it) / tau);
    }
    return acc / rec.duration;
}

double potential_fluctuation(double isi, double tau, double sigma_bar) {
    return sigma_bar * std::sqrt(std::tanh(isi / (2.0 * tau)));
}

double potential_fluctuation_leakless(double isi, double sigma, double c, double vth) {
    return sigma * std::sqrt(isi / 2.0) / (c * vth);
}

HistogramSeries cross_correlogram(const Recording& rec, int neuron_i, int neuron_j,
                                  double bin_width, double window) {
    if (!(bin_width > 0.0)) throw model_error("correlogram bin width must be positive");
    HistogramSeries h;
    const int half = static_cast<int>(std::ceil(window / bin_width));
    const int bins = 2 * half;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) h.edges[b] = (b - half) * bin_width;
    h.counts.assign(bins, 0.0);
    const auto& ti = rec.trains[neuron_i];
    const auto& tj = rec.trains[neuron_j];
    if (ti.empty() || tj.empty()) return h;
    std::size_t lo = 0;
    for (double t : ti) {
        while (lo < tj.size() && tj[lo] < t - window) ++lo;
        for (std::size_t q = lo; q < tj.size() && tj[q] <= t + window; ++q) {
            if (neuron_i == neuron_j && tj[q] == t) continue;
            const double d = t - tj[q];
            int b = static_cast<int>(std::floor(d / bin_width)) + half;
            if (b >= 0 && b < bins) h.counts[b] += 1.0;
        }
    }
    // normalize so the tails approach 1: mean count over the outer 20%
    const int outer = std::max(1, bins / 10);
    double tail = 0.0;
    int cnt = 0;
    for (int b = 0; b < outer; ++b) { tail += h.counts[b]; ++cnt; }
    for (int b = bins - outer; b < bins; ++b) { tail += h.counts[b]; ++cnt; }
    if (tail > 0.0) {
        const double norm = tail / cnt;
        for (auto& v : h.counts) v /= norm;
        h.normalized = true;
    }
    return h;
}

std::vector<std::vector<double>> latency_matrix(const Recording& rec) {
    const int n = rec.neuron_count;
    std::vector<std::vector<double>> lat(n, std::vector<double>(n, kInf));
    for (int i = 0; i < n; ++i) {
        const auto& own = rec.trains[i];
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto& tr = rec.trains[j];
            double best = kInf;
            for (std::size_t k = 0; k + 1 < own.size(); ++k) {
                auto it = std::upper_bound(tr.begin(), tr.end(), own[k]);
                // the latest j-spike inside the ISI gives the smallest delay
                const auto hi = std::lower_bound(tr.begin(), tr.end(), own[k + 1]);
                if (it == hi) continue;
                best = std::min(best, own[k + 1] - *(hi - 1));
            }
            lat[i][j] = best;
        }
    }
    return lat;
}

LatencyFit latency_coupling_scaling(const std::vector<std::vector<double>>& couplings,
                                    const std::vector<std::vector<double>>& latency, double tau,
                                    double c_vth, double j_threshold) {
    LatencyFit fit;
    std::vector<double> xs, ys;
    const int n = static_cast<int>(couplings.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double jn = couplings[i][j] / c_vth;
            if (jn >= j_threshold) continue;
            if (!(latency[i][j] < kInf)) continue;
            xs.push_back(latency[i][j] / tau);
            ys.push_back(std::log(-jn));
        }
    fit.points = static_cast<int>(xs.size());
    if (fit.points < 3) return fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < fit.points; ++k) {
        sx += xs[k];
        sy += ys[k];
        sxx += xs[k] * xs[k];
        sxy += xs[k] * ys[k];
    }
    const double det = fit.points * sxx - sx * sx;
    if (det == 0.0) return fit;
    fit.slope = (fit.points * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / fit.points;
    fit.ok = true;
    return fit;
}

std::optional<double> coupling_correlation(const std::vector<std::vector<double>>& a,
                                           const std::vector<std::vector<double>>& b) {
    const int n = static_cast<int>(a.size());
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    const double m = static_cast<double>(n) * (n - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            sa += a[i][j];
            sb += b[i][j];
            sab += a[i][j] * b[i][j];
            saa += a[i][j] * a[i][j];
            sbb += b[i][j] * b[i][j];
        }
    const double cov_ab = m * sab - sa * sb;
    const double cov_aa = m * saa - sa * sa;
    const double cov_bb = m * sbb - sb * sb;
    if (cov_aa <= 0.0 || cov_bb <= 0.0) return std::nullopt;
    return cov_ab / std::sqrt(cov_aa * cov_bb);
}

InferenceErrors inference_errors(const ModelParams& truth, const std::vector<double>& true_ie,
                                 const std::vector<double>& inferred_currents,
                                 const std::vector<std::vector<double>>& inferred_couplings,
                                 const std::vector<double>& inferred_ie) {
    InferenceErrors e;
    const int n = truth.size();
    const double cvth = truth.capacitance * truth.threshold;
    double sj = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double d = (inferred_couplings[i][j] - truth.couplings[i][j]) / cvth;
            sj += d * d;
        }
    e.eps_j = std::sqrt(sj / (static_cast<double>(n) * (n - 1)));
    double si = 0.0;
    for (int i = 0; i < n; ++i) {
        if (truth.currents[i] == 0.0) {
            e.eps_i_defined = false;
            continue;
        }
        const double d = inferred_currents[i] / truth.currents[i] - 1.0;
        si += d * d;
    }
    e.eps_i = std::sqrt(si / n);
    double se = 0.0;
    for (int i = 0; i < n; ++i) {
        if (true_ie[i] == 0.0) { e.eps_i_defined = false; continue; }
        const double d = inferred_ie[i] / true_ie[i] - 1.0;
        se += d * d;
    }
    e.eps_ie = std::sqrt(se / n);
    return e;
}

}  // namespace lifnet

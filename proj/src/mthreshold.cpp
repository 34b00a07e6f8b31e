#include "lifnet/mthreshold.hpp"

#include <cmath>

namespace lifnet {

double effective_current(int neuron, const std::vector<double>& currents,
                         const std::vector<std::vector<double>>& couplings,
                         const std::vector<double>& rates) {
    double ie = currents[neuron];
    for (std::size_t j = 0; j < rates.size(); ++j) {
        if (static_cast<int>(j) == neuron) continue;
        ie += couplings[neuron][j] * rates[j];
    }
    return ie;
}

MovingThreshold moving_threshold(double dt, const OuSpec& spec, double intercept,
                                 double floor_sigmas) {
    MovingThreshold out;
    spec.validate();
    const double spread = spec.noise_std / std::sqrt(2.0 * spec.conductance * spec.capacitance);
    const double floor =
        std::max(0.05 * spec.threshold, spec.threshold - floor_sigmas * spread);
    if (spec.alpha() < -4.0) {
        // deep sub-threshold drive: the eigen series needs more modes than
        // we carry, while the boundary layer gives the slope directly:
        // dp_s/dV -> -2 (V_th - mu) / (sigma_V^2 tau)
        const double sv2 = spec.noise_std * spec.noise_std /
                           (spec.capacitance * spec.capacitance);
        const double slope_drift =
            -2.0 * (spec.threshold - spec.mean_potential()) / (sv2 * spec.tau());
        out.value = spec.threshold + intercept / slope_drift;
        out.fallback = true;
        return out;
    }
    if (spec.alpha() > 4.0) {
        // strong drive: past the deterministic crossing horizon p_s vanishes
        // uniformly near V_th and the tangent carries no information
        out.value = floor;
        out.clamped = true;
        return out;
    }
    const SeriesValue slope = survival_slope_at_threshold(dt, spec, 160);
    if (!slope.converged) {
        out.value = spec.threshold;
        out.fallback = true;
        return out;
    }
    if (!(slope.value < -1e-300)) {
        out.value = floor;
        out.clamped = true;
        return out;
    }
    // tangent through (V_th, 0) meets p_s = intercept at V_th + intercept/slope
    out.value = spec.threshold + intercept / slope.value;
    if (out.value < floor) {
        out.value = floor;
        out.clamped = true;
    }
    return out;
}

ThresholdFn ThresholdTable::as_threshold_fn(double t_begin, double t_end) const {
    if (edges.empty() || values.empty()) return ThresholdFn::constant(v_th_true);
    // delta-t bins map to time breakpoints counted back from the spike
    std::vector<double> breaks;
    std::vector<double> levels;
    // walk bins from the largest delta t (earliest time) to the smallest
    int first_bin = static_cast<int>(values.size()) - 1;
    levels.push_back(value_at(t_end - t_begin));  // level at the ISI start
    for (int b = first_bin; b >= 0; --b) {
        const double t_break = t_end - edges[b + 1];
        if (t_break <= t_begin || edges[b + 1] >= t_end - t_begin) continue;
        breaks.push_back(t_break);
        levels.push_back(values[b]);
    }
    // final stretch below edges[0]: the true threshold
    const double t_last = t_end - edges.front();
    if (t_last > t_begin && t_last < t_end) {
        breaks.push_back(t_last);
        levels.push_back(v_th_true);
    }
    if (breaks.empty()) return ThresholdFn::constant(levels.front());
    return ThresholdFn::piecewise(std::move(breaks), std::move(levels), v_th_true);
}

std::vector<double> default_table_edges(double tau, double max_isi, int bins) {
    const double lo = tau / 100.0;
    const double hi = std::max(10.0 * max_isi, 2.0 * lo);
    std::vector<double> edges(bins + 1);
    const double ratio = std::pow(hi / lo, 1.0 / bins);
    double e = lo;
    for (int b = 0; b <= bins; ++b, e *= ratio) edges[b] = e;
    return edges;
}

ThresholdTable build_threshold_table(const ModelParams& params, double effective_current_i,
                                     const std::vector<double>& edges, double intercept) {
    if (edges.size() < 2) throw model_error("threshold table needs at least one bin");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (!(edges[k] > edges[k - 1]) || !(edges[k - 1] > 0.0))
            throw model_error("threshold table edges must be ascending and positive");
    OuSpec spec;
    spec.conductance = params.conductance;
    spec.capacitance = params.capacitance;
    spec.noise_std = params.noise_std;
    spec.threshold = params.threshold;
    // quantized effective current so the eigenvalue cache is reused once
    // the Newton iteration has settled
    const double scale = std::max(std::fabs(effective_current_i), 1e-12);
    spec.current = std::round(effective_current_i / (1e-7 * scale)) * (1e-7 * scale);

    ThresholdTable table;
    table.edges = edges;
    table.v_th_true = params.threshold;
    const double tau = params.tau();
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        const double dt = std::sqrt(edges[b] * edges[b + 1]);  // geometric midpoint
        if (dt < 0.09 * tau) {
            // eigen series would need more terms than we carry; near the
            // spike the effective threshold is the true one anyway
            table.values.push_back(params.threshold);
            table.any_fallback = true;
            continue;
        }
        const MovingThreshold mt = moving_threshold(dt, spec, intercept);
        table.values.push_back(std::min(mt.value, params.threshold));
        table.any_clamped |= mt.clamped;
        table.any_fallback |= mt.fallback;
    }
    return table;
}

double cost_energy(double effective_current_i, double dt, const ModelParams& params,
                   double sigma) {
    OuSpec spec;
    spec.conductance = params.conductance;
    spec.capacitance = params.capacitance;
    spec.noise_std = sigma;
    spec.current = effective_current_i;
    spec.threshold = params.threshold;
    spec.validate();
    // deep sub-threshold drive sits outside the eigen series' validated
    // range; no correction is applied there
    if (spec.alpha() < -4.0) return 0.0;

    const SeriesValue p = fpt_density(dt, 0.0, spec);
    ModelParams single = ModelParams::uniform(1, params.capacitance, params.conductance,
                                              params.threshold, sigma, effective_current_i);
    IsiProblem pr;
    pr.neuron = 0;
    pr.t_begin = 0.0;
    pr.t_end = dt;
    const double lstar = solve_isi(pr, single, ThresholdFn::constant(params.threshold)).log_weight;
    if (!(p.value > 0.0)) return 700.0;  // density underflow: large finite penalty
    return lstar / (sigma * sigma) - std::log(p.value);
}

}  // namespace lifnet

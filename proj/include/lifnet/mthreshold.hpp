#pragma once

#include <algorithm>
#include <vector>

#include "lifnet/optpath.hpp"
#include "lifnet/specfun.hpp"
#include "lifnet/types.hpp"

namespace lifnet {

/// Effective current I^e_i = I_i + sum_j J_ij f_j.
double effective_current(int neuron, const std::vector<double>& currents,
                         const std::vector<std::vector<double>>& couplings,
                         const std::vector<double>& rates);

struct MovingThreshold {
    double value = 0.0;
    bool clamped = false;   // slope underflow, value set to the configured floor
    bool fallback = false;  // series not converged at this delta t
};

/// V_th^M(dt) = V_th + 1 / (2 dp_s/dV at V_th), from the tangent intercept
/// with the p_s = `intercept` line (1/2 by default). Where the tangent
/// degenerates (slope -> 0) the value is clamped to a floor a few noise
/// standard deviations below V_th, so the correction stays O(sigma).
MovingThreshold moving_threshold(double dt, const OuSpec& spec, double intercept = 0.5,
                                 double floor_sigmas = 4.0);

/// Per-neuron table of V_th^M over delta-t bins. Bin b covers
/// [edges[b], edges[b+1]); below edges[0] the true threshold applies.
struct ThresholdTable {
    std::vector<double> edges;   // ascending, size = bins + 1
    std::vector<double> values;  // size = bins
    double v_th_true = 1.0;
    bool any_clamped = false;
    bool any_fallback = false;

    double value_at(double dt) const {
        if (edges.empty() || values.empty() || dt < edges.front()) return v_th_true;
        std::size_t bin = std::upper_bound(edges.begin(), edges.end(), dt) - edges.begin() - 1;
        if (bin >= values.size()) bin = values.size() - 1;
        return values[bin];
    }

    /// Threshold as a function of time over one ISI ending at t_end.
    ThresholdFn as_threshold_fn(double t_begin, double t_end) const;
};

std::vector<double> default_table_edges(double tau, double max_isi, int bins = 16);

ThresholdTable build_threshold_table(const ModelParams& params, double effective_current_i,
                                     const std::vector<double>& edges, double intercept = 0.5);

/// Cost-energy penalty U = log[p_FPT^cl(dt) / p_FPT(dt)] comparing the
/// optimal-path density p^cl = exp(L*(dt)/sigma^2) with the exact
/// first-passage density: essentially flat at weak drive, grows steeply as
/// the effective current approaches g V_th, and subtracting (N_i - 1) U
/// from L* keeps the objective concave. Zero outside the eigen series'
/// validated drive range.
double cost_energy(double effective_current_i, double dt, const ModelParams& params,
                   double sigma);

}  // namespace lifnet

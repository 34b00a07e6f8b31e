#pragma once

#include <cstdint>
#include <vector>

#include "lifnet/specfun.hpp"
#include "lifnet/types.hpp"

namespace lifnet {

struct GridPath {
    std::vector<double> times;
    std::vector<double> potentials;  // node value just before any jump there
    double objective = 0.0;          // -1/2 of the discretized action
    bool converged = false;
    int sweeps = 0;
};

/// Direct discretization of the action with V <= V_th box constraints,
/// minimized by projected coordinate descent (multilevel warm start).
GridPath grid_optimal_path(const IsiProblem& problem, const ModelParams& params, int nodes,
                           int max_sweeps = 200000);

struct McEstimate {
    double value = 0.0;
    double std_err = 0.0;
};

/// Euler-Maruyama survival estimate with absorbing boundary; the crossing
/// check includes the Brownian-bridge sub-step correction when `bridge`.
McEstimate mc_survival(double dt_total, double v0, const OuSpec& spec, int n_paths,
                       std::uint64_t seed, double step = 1e-3, bool bridge = true);

/// Midpoint variance of the endpoint-conditioned (exact Gaussian bridge)
/// Ornstein-Uhlenbeck path over an interval of length `isi`.
McEstimate mc_bridge_variance(double isi, const ModelParams& params, int n_paths,
                              std::uint64_t seed);

/// Mean first-passage time estimate by direct simulation.
McEstimate mc_first_passage(double v0, const OuSpec& spec, int n_paths, std::uint64_t seed,
                            double step = 1e-3);

struct GridSearchResult {
    std::vector<double> best;  // one value per searched slot
    double lstar = -kInf;
};

/// Exhaustive maximization of the single-neuron L* over a grid. `slots`
/// names the free parameters (source index for couplings, `neuron` for the
/// current); at most 3 slots.
GridSearchResult grid_search_mle(const Recording& rec, int neuron,
                                 const std::vector<int>& slots,
                                 const std::vector<std::vector<double>>& grids,
                                 const ModelParams& known);

}  // namespace lifnet

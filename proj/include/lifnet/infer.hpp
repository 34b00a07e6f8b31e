#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "lifnet/core.hpp"
#include "lifnet/mthreshold.hpp"
#include "lifnet/optpath.hpp"
#include "lifnet/types.hpp"

namespace lifnet {

enum class ThresholdMode { fixed, moving };

struct PriorBounds {
    double j_min = 0.0;
    double j_max = 0.0;
    double weight = 0.0;
};

struct InferenceOptions {
    ThresholdMode mode = ThresholdMode::fixed;
    double epsilon = 1e-12;  // stop when L* gains less than this
    int max_iters = 200;
    std::optional<PriorBounds> prior;
    std::optional<double> tau_override;  // inference leak time, replaces C/g
    double sigma = 0.0;                  // required in moving mode; scales error bars
    double tau_r = 0.0;
    double tau_d = 0.0;
    double coincidence_window = 0.0;
    double grad_tol = 1e-9;
    int mt_bins = 16;
    double mt_intercept = 0.5;
    int threads = 1;
    // marginal-likelihood support: pinned parameter slots (by v index) kept
    // at their initial values during the maximization
    std::vector<int> pinned_slots;
    // start the iteration from the candidate values instead of zero
    bool init_from_known = false;
};

struct NeuronResult {
    int neuron = -1;
    double current = 0.0;
    std::vector<double> couplings;  // full row, diagonal zero
    double log_likelihood = 0.0;
    // d^2 L*/dv dv at the optimum in v-coordinates (v_j = J_ij, v_i = I tau
    // for g > 0, plain I for g = 0); negative semidefinite
    Eigen::MatrixXd hessian;
    std::vector<double> error_bars;       // sigma-scaled, v-coordinates
    double current_error_bar = 0.0;       // in current units
    int iterations = 0;
    bool converged = false;
    bool boundary_flag = false;  // near-tie contact structure at the optimum
    bool skipped = false;        // fewer than 2 spikes
    long active_contacts = 0;
    long passive_contacts = 0;
    double grad_norm = 0.0;
};

struct InferenceResult {
    std::vector<NeuronResult> neurons;
    double total_log_likelihood = 0.0;
    bool all_converged = false;
};

/// Total L* of the recording under candidate parameters (threshold per
/// `options.mode`, table built from the candidate effective currents).
double log_likelihood(const Recording& rec, const ModelParams& candidate,
                      const InferenceOptions& options,
                      std::vector<double>* per_neuron = nullptr);

/// Gradient and Hessian of neuron i's L* with respect to v-coordinates.
void gradient_hessian(const Recording& rec, int neuron, const ModelParams& candidate,
                      const InferenceOptions& options, Eigen::VectorXd& grad,
                      Eigen::MatrixXd& hess, double* lstar = nullptr);

NeuronResult infer_neuron(const Recording& rec, int neuron, const ModelParams& known,
                          const InferenceOptions& options);

InferenceResult infer_all(const Recording& rec, const ModelParams& known,
                          const InferenceOptions& options);

}  // namespace lifnet

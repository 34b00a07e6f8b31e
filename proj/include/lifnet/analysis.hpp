#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "lifnet/infer.hpp"
#include "lifnet/types.hpp"

namespace lifnet {

struct HistogramSeries {
    std::vector<double> edges;   // bin edges, size = bins + 1
    std::vector<double> counts;  // raw or normalized per `normalized`
    bool normalized = false;
};

/// sigma * sqrt(diag (-H)^-1) in v-coordinates; infinite on null directions.
std::vector<double> error_bars(const Eigen::MatrixXd& hessian, double sigma);

struct MarginalCurve {
    std::vector<double> grid;    // pinned parameter values
    std::vector<double> values;  // re-maximized L*
    std::vector<bool> ok;        // per-point convergence
    double left_curvature = 0.0;
    double right_curvature = 0.0;
    bool asymmetric = false;  // one-sided curvatures differ by more than 20%
};

/// Marginal log-likelihood of one parameter of neuron i: slot = source
/// neuron index for a coupling, or i itself for the current.
MarginalCurve marginal_log_likelihood(const Recording& rec, int neuron, int slot,
                                      const std::vector<double>& grid, const ModelParams& known,
                                      const InferenceOptions& options);

/// Closed-form weak-coupling Hessian (v-coordinates, positive matrix):
/// sigma^2 H_jj' = sum_k mu_k phi_kj phi_kj'.
Eigen::MatrixXd weak_coupling_hessian(const Recording& rec, int neuron, double tau);

struct EigenReport {
    std::vector<double> eigenvalues;  // of (-hessian)/sigma^2, ascending
    double lambda_max_predicted = 0.0;
    double lambda_min_predicted = 0.0;
    double vmax_rate_overlap2 = 0.0;     // squared overlap with the rate vector
    double vmin_current_overlap2 = 0.0;  // squared overlap with the current axis
    double effective_current_quadratic_ratio = 0.0;
    std::vector<double> omega;  // per-source rate variances
    std::vector<double> eps;    // v_min mixing components
    bool regime_ok = true;      // weak coupling and tau >> mean ISI assumptions
};

EigenReport eigen_report(const Eigen::MatrixXd& hessian, const Recording& rec, int neuron,
                         double tau, double sigma);

/// Windowed presynaptic rate f_j^{i,tau} (decaying credit before i-spikes).
double windowed_rate(const Recording& rec, int neuron_i, int neuron_j, double tau);

/// Relative potential fluctuation at the ISI midpoint.
double potential_fluctuation(double isi, double tau, double sigma_bar);
/// Leakless branch: sqrt(sigma^2 isi / (2 (C V_th)^2)).
double potential_fluctuation_leakless(double isi, double sigma, double c, double vth);

HistogramSeries cross_correlogram(const Recording& rec, int neuron_i, int neuron_j,
                                  double bin_width, double window);

/// latency(i, j) = min over j-spikes inside an i-ISI of the delay to the
/// next i-spike; +inf when no such pair exists.
std::vector<std::vector<double>> latency_matrix(const Recording& rec);

struct LatencyFit {
    double slope = 0.0;
    double intercept = 0.0;
    int points = 0;
    bool ok = false;  // refused when fewer than 3 qualifying couplings
};

/// log(-J_ij) = slope * latency(i,j)/tau + intercept over couplings below
/// `j_threshold` (in C V_th units, negative).
LatencyFit latency_coupling_scaling(const std::vector<std::vector<double>>& couplings,
                                    const std::vector<std::vector<double>>& latency, double tau,
                                    double c_vth, double j_threshold = -0.1);

/// Scale-free correlation between coupling matrices (off-diagonal entries).
std::optional<double> coupling_correlation(const std::vector<std::vector<double>>& a,
                                           const std::vector<std::vector<double>>& b);

struct InferenceErrors {
    double eps_j = 0.0;
    double eps_i = 0.0;
    double eps_ie = 0.0;
    bool eps_i_defined = true;  // false when a true current is zero
};

InferenceErrors inference_errors(const ModelParams& truth, const std::vector<double>& true_ie,
                                 const std::vector<double>& inferred_currents,
                                 const std::vector<std::vector<double>>& inferred_couplings,
                                 const std::vector<double>& inferred_ie);

}  // namespace lifnet

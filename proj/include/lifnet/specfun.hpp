#pragma once

#include <utility>
#include <vector>

#include "lifnet/numeric.hpp"
#include "lifnet/types.hpp"

namespace lifnet {

struct range_error_specfun : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Single-neuron Ornstein-Uhlenbeck spec used by the first-passage series.
struct OuSpec {
    double conductance = 1.0;   // g > 0
    double capacitance = 1.0;   // C > 0
    double noise_std = 0.1;     // sigma > 0
    double current = 0.0;       // I (use the effective current here)
    double threshold = 1.0;     // V_th

    double tau() const { return capacitance / conductance; }
    double mean_potential() const { return current / conductance; }
    // kappa maps potentials to the dimensionless argument z = kappa (mu - V)
    double kappa() const { return std::sqrt(2.0 * conductance * capacitance) / noise_std; }
    double alpha() const { return kappa() * (mean_potential() - threshold); }
    void validate() const;
};

/// Weber parabolic-cylinder function D_n(z) and its z-derivative.
/// Validated for |z| <= 50 and 0 <= n <= 300; out of range throws.
std::pair<double, double> weber_D(double n, double z);

/// Scaled evaluation (sign and log magnitude), usable for large orders.
LogScalar weber_D_scaled(double n, double z);

/// First `count` positive roots n_i of D_n(alpha) = 0, refined to 1e-10.
/// Successive roots are separated by more than 1.
std::vector<double> threshold_eigenvalues(const OuSpec& spec, int count, double n_max = 500.0);

struct SeriesValue {
    double value = 0.0;
    bool converged = true;   // truncation tail below 1e-8 of the leading term
    bool fallback = false;   // small-delta-t fallback engaged
};

/// Probability that the OU potential starting from V stays below threshold
/// for a time dt (Alili-Patie-Pedersen eigenseries).
SeriesValue survival_probability(double dt, double v, const OuSpec& spec, int terms = 64);

/// d p_s / dV at V = V_th (finite, <= 0).
SeriesValue survival_slope_at_threshold(double dt, const OuSpec& spec, int terms = 64);

/// First-passage-time density at dt for a start at potential v.
SeriesValue fpt_density(double dt, double v, const OuSpec& spec, int terms = 64);

/// Mean first-passage time to threshold after a kick of charge J from the
/// stationary level: start potential is I/g + J/C.
double mean_first_passage_time(double j_charge, const OuSpec& spec);

/// Normalization integral N_i = int_alpha^inf D_{n_i}(z)^2 dz by quadrature
/// (exposed for cross-checks; the series uses the Sturm-Liouville identity
/// N_i = -D'_{n_i}(alpha) * dD_n(alpha)/dn for speed).
double eigen_norm_quadrature(double n_i, double alpha);

}  // namespace lifnet

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lifnet {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Spike trains of N neurons over [0, duration], times in seconds.
/// Each train is strictly increasing; neuron indices are dense 0..N-1.
struct Recording {
    int neuron_count = 0;
    double duration = 0.0;
    std::vector<std::vector<double>> trains;

    int total_spikes() const {
        int s = 0;
        for (const auto& tr : trains) s += static_cast<int>(tr.size());
        return s;
    }
    double rate(int j) const { return static_cast<double>(trains[j].size()) / duration; }
    void validate() const;

    /// Keep only the first s spikes in global time order.
    Recording first_spikes(int s) const;
};

/// Network parameters. J[i][j] is the strength of the connection from
/// neuron j onto neuron i (charge); diagonal is zero.
struct ModelParams {
    double capacitance = 1.0;       // C, charge/volt
    double conductance = 0.0;       // g >= 0, 1/ohm
    double threshold = 1.0;         // V_th > 0, volt
    double noise_std = 0.0;         // sigma, current * sqrt(time)
    std::vector<double> currents;   // I_i, ampere
    std::vector<std::vector<double>> couplings;  // J_ij, coulomb
    double refractory = 0.0;        // tau_R, seconds
    double delay = 0.0;             // tau_D, seconds

    int size() const { return static_cast<int>(currents.size()); }
    double tau() const { return conductance > 0.0 ? capacitance / conductance : kInf; }
    bool leakless() const { return conductance <= 0.0; }
    void validate() const;

    static ModelParams uniform(int n, double c, double g, double vth, double sigma, double current);
};

/// Dimensionless form of the model; sigma_bar is undefined for g = 0.
struct DimensionlessParams {
    std::optional<double> sigma_bar;            // sigma / (V_th sqrt(g C))
    std::vector<double> currents;               // I_i / (g V_th), empty when g = 0
    std::vector<std::vector<double>> couplings; // J_ij / (C V_th)
    double time_scale = 0.0;                    // g / C, multiplies t
};

/// One input spike entering an inter-spike interval. `weights` lists how
/// many merged spikes of each source neuron contribute at this time, so
/// the effective amplitude is sum_j weights_j * J_{i,j}.
struct IsiInput {
    double time = 0.0;
    double amplitude = 0.0;  // charge, resolved against a coupling row
    std::vector<std::pair<int, double>> weights;  // (source neuron, multiplicity)
};

/// One inter-spike interval of one neuron, the unit of optimal-path solving.
struct IsiProblem {
    int neuron = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
    double v_begin = 0.0;
    std::vector<IsiInput> inputs;  // strictly increasing times inside (t_begin, t_end)

    double length() const { return t_end - t_begin; }
    void validate() const;
};

}  // namespace lifnet

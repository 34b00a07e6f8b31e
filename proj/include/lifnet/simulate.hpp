#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lifnet/types.hpp"

namespace lifnet {

struct saturation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Random-network construction: keep each oriented link with probability p.
struct NetworkSpec {
    int neuron_count = 0;
    double connection_fraction = 0.0;  // p in [0, 1]
    double max_amplitude = 0.0;        // J_0 >= 0, charge
    enum class Mode { uniform_signed, dale } mode = Mode::uniform_signed;
    std::uint64_t seed = 0;
};

std::vector<std::vector<double>> random_network(const NetworkSpec& spec);

struct SimulateOptions {
    double dt = 1e-5;
    std::uint64_t seed = 0;
    double max_rate = 1e4;  // spikes per neuron per second before aborting
    // start potentials uniform on [0, V_th) instead of synchronized at 0
    bool random_initial_potentials = false;
    enum class Integrator { exact_ou, rk4 } integrator = Integrator::exact_ou;
    // optional probe invoked every `probe_stride` steps with (t, potentials)
    std::function<void(double, const std::vector<double>&)> probe;
    int probe_stride = 1;
};

/// Grid simulator: exact Ornstein-Uhlenbeck one-step updates between grid
/// points, jumps J_ij/C at presynaptic spike times, reset on V >= V_th with
/// the spike recorded at the grid time.
Recording simulate_network(const ModelParams& params, double duration,
                           const SimulateOptions& opt);

/// Single-neuron paths with fixed inputs, conditioned on the first spike
/// falling inside [isi_lo, isi_hi]: mean potential over accepted paths on a
/// regular grid. Used to compare optimal paths with conditioned ensembles.
struct ConditionedEnsemble {
    std::vector<double> grid;            // times
    std::vector<double> mean_potential;  // conditional mean
    int accepted = 0;
};
ConditionedEnsemble conditioned_paths(const ModelParams& params, int neuron,
                                      const std::vector<IsiInput>& inputs, double isi_lo,
                                      double isi_hi, int want_accepted, double dt,
                                      std::uint64_t seed, int max_trials = 2000000);

}  // namespace lifnet

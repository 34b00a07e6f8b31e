#pragma once

#include "lifnet/types.hpp"

namespace lifnet {

DimensionlessParams nondimensionalize(const ModelParams& params);

/// Inverse of nondimensionalize for g > 0; unit constants (C, g, V_th)
/// must be supplied since they carry the dimensions.
ModelParams redimensionalize(const DimensionlessParams& dp, double c, double g, double vth);

/// Sum amplitudes of coincident inputs (within `window`; 0 means exact
/// equality) and return strictly increasing times.
std::pair<std::vector<double>, std::vector<double>> merge_simultaneous_inputs(
    const std::vector<double>& times, const std::vector<double>& amps, double window = 0.0);

/// All inter-spike intervals of neuron i with the presynaptic spikes that
/// fall strictly inside each interval (after the tau_D shift, minus the
/// tau_R dead time). Fewer than 2 spikes yields an empty list.
std::vector<IsiProblem> build_isi_problems(const Recording& rec, const ModelParams& params,
                                           int neuron, double coincidence_window = 0.0);

}  // namespace lifnet

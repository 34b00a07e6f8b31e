#include "lifnet/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lifnet {

void Recording::validate() const {
    if (neuron_count != static_cast<int>(trains.size()))
        throw model_error("recording: train count does not match neuron_count");
    if (!(duration > 0.0)) throw model_error("recording: duration must be positive");
    for (int i = 0; i < neuron_count; ++i) {
        const auto& tr = trains[i];
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (!(tr[k] >= 0.0 && tr[k] <= duration))
                throw model_error("recording: spike time outside [0, T] for neuron " + std::to_string(i));
            if (k > 0 && !(tr[k] > tr[k - 1]))
                throw model_error("recording: non-increasing train for neuron " + std::to_string(i));
        }
    }
}

Recording Recording::first_spikes(int s) const {
    std::vector<std::pair<double, int>> all;
    all.reserve(total_spikes());
    for (int i = 0; i < neuron_count; ++i)
        for (double t : trains[i]) all.emplace_back(t, i);
    std::sort(all.begin(), all.end());
    if (s > static_cast<int>(all.size())) s = static_cast<int>(all.size());
    Recording out;
    out.neuron_count = neuron_count;
    out.duration = s > 0 ? all[s - 1].first : duration;
    out.trains.assign(neuron_count, {});
    for (int k = 0; k < s; ++k) out.trains[all[k].second].push_back(all[k].first);
    if (!(out.duration > 0.0)) out.duration = duration;
    return out;
}

void ModelParams::validate() const {
    if (!(capacitance > 0.0)) throw model_error("params: capacitance must be positive");
    if (!(threshold > 0.0)) throw model_error("params: threshold must be positive");
    if (conductance < 0.0) throw model_error("params: conductance must be nonnegative");
    if (noise_std < 0.0) throw model_error("params: noise std must be nonnegative");
    if (refractory < 0.0 || delay < 0.0) throw model_error("params: tau_R and tau_D must be nonnegative");
    const int n = size();
    if (static_cast<int>(couplings.size()) != n) throw model_error("params: coupling matrix size mismatch");
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(couplings[i].size()) != n) throw model_error("params: coupling row size mismatch");
        if (couplings[i][i] != 0.0) throw model_error("params: coupling diagonal must be zero");
        for (double v : couplings[i])
            if (!std::isfinite(v)) throw model_error("params: non-finite coupling");
    }
    for (double v : currents)
        if (!std::isfinite(v)) throw model_error("params: non-finite current");
}

ModelParams ModelParams::uniform(int n, double c, double g, double vth, double sigma, double current) {
    ModelParams p;
    p.capacitance = c;
    p.conductance = g;
    p.threshold = vth;
    p.noise_std = sigma;
    p.currents.assign(n, current);
    p.couplings.assign(n, std::vector<double>(n, 0.0));
    return p;
}

void IsiProblem::validate() const {
    if (!(t_begin < t_end)) throw model_error("isi: empty interval");
    double prev = t_begin;
    for (const auto& in : inputs) {
        if (!(in.time > prev && in.time < t_end)) throw model_error("isi: input time outside open interval");
        prev = in.time;
    }
}

DimensionlessParams nondimensionalize(const ModelParams& params) {
    params.validate();
    DimensionlessParams dp;
    const double c = params.capacitance, g = params.conductance, vth = params.threshold;
    dp.time_scale = g / c;
    if (g > 0.0) {
        dp.sigma_bar = params.noise_std / (vth * std::sqrt(g * c));
        dp.currents.reserve(params.currents.size());
        for (double i : params.currents) dp.currents.push_back(i / (g * vth));
    }
    dp.couplings = params.couplings;
    for (auto& row : dp.couplings)
        for (double& v : row) v /= c * vth;
    return dp;
}

ModelParams redimensionalize(const DimensionlessParams& dp, double c, double g, double vth) {
    if (!(g > 0.0)) throw model_error("redimensionalize requires g > 0");
    ModelParams p;
    p.capacitance = c;
    p.conductance = g;
    p.threshold = vth;
    p.noise_std = dp.sigma_bar ? *dp.sigma_bar * vth * std::sqrt(g * c) : 0.0;
    for (double i : dp.currents) p.currents.push_back(i * g * vth);
    p.couplings = dp.couplings;
    for (auto& row : p.couplings)
        for (double& v : row) v *= c * vth;
    return p;
}

std::pair<std::vector<double>, std::vector<double>> merge_simultaneous_inputs(
    const std::vector<double>& times, const std::vector<double>& amps, double window) {
    std::vector<double> t_out, a_out;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!t_out.empty() && times[k] - t_out.back() <= window) {
            a_out.back() += amps[k];
        } else {
            t_out.push_back(times[k]);
            a_out.push_back(amps[k]);
        }
    }
    return {t_out, a_out};
}

std::vector<IsiProblem> build_isi_problems(const Recording& rec, const ModelParams& params,
                                           int neuron, double coincidence_window) {
    const auto& own = rec.trains[neuron];
    std::vector<IsiProblem> out;
    if (own.size() < 2) return out;
    out.reserve(own.size() - 1);

    for (std::size_t k = 0; k + 1 < own.size(); ++k) {
        IsiProblem p;
        p.neuron = neuron;
        p.t_begin = own[k];
        p.t_end = own[k + 1];
        p.v_begin = 0.0;  // reset right after a spike

        // gather shifted presynaptic spikes strictly inside the interval
        std::vector<IsiInput> ins;
        for (int j = 0; j < rec.neuron_count; ++j) {
            if (j == neuron) continue;
            const auto& tr = rec.trains[j];
            const double lo = p.t_begin - params.delay;
            auto it = std::upper_bound(tr.begin(), tr.end(), lo);
            for (; it != tr.end(); ++it) {
                const double t = *it + params.delay;
                if (t >= p.t_end) break;
                if (t <= p.t_begin) continue;
                if (params.refractory > 0.0 && t < p.t_begin + params.refractory) continue;
                IsiInput in;
                in.time = t;
                in.amplitude = params.couplings[neuron][j];
                in.weights = {{j, 1.0}};
                ins.push_back(std::move(in));
            }
        }
        std::sort(ins.begin(), ins.end(),
                  [](const IsiInput& a, const IsiInput& b) { return a.time < b.time; });

        // merge coincident inputs, accumulating per-source weights
        for (auto& in : ins) {
            if (!p.inputs.empty() && in.time - p.inputs.back().time <= coincidence_window) {
                auto& dst = p.inputs.back();
                dst.amplitude += in.amplitude;
                for (auto& w : in.weights) {
                    bool found = false;
                    for (auto& dw : dst.weights)
                        if (dw.first == w.first) { dw.second += w.second; found = true; break; }
                    if (!found) dst.weights.push_back(w);
                }
            } else {
                p.inputs.push_back(std::move(in));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace lifnet

#pragma once

#include <cmath>
#include <vector>

#include "lifnet/core.hpp"
#include "lifnet/optpath.hpp"
#include "lifnet/rng.hpp"
#include "lifnet/types.hpp"

namespace testing_helpers {

using namespace lifnet;

inline ModelParams unit_params(double g, double current, double sigma = 0.0) {
    return ModelParams::uniform(1, 1.0, g, 1.0, sigma, current);
}

inline IsiProblem single_isi(double t_end, std::vector<std::pair<double, double>> inputs,
                             double t_begin = 0.0, int neuron = 0) {
    IsiProblem p;
    p.neuron = neuron;
    p.t_begin = t_begin;
    p.t_end = t_end;
    for (auto [t, a] : inputs) {
        IsiInput in;
        in.time = t;
        in.amplitude = a;
        in.weights = {{0, 1.0}};
        p.inputs.push_back(in);
    }
    return p;
}

// every sampled point of the solved path stays below the threshold
inline double max_threshold_excess(const OptimalPath& path, const IsiProblem& pr,
                                   const ModelParams& mp, const ThresholdFn& thr,
                                   int samples = 400) {
    double worst = -1e300;
    for (int s = 1; s < samples; ++s) {
        const double t = pr.t_begin + pr.length() * s / samples;
        const double v = path.potential(t, pr, mp);
        worst = std::max(worst, v - thr.at(t));
    }
    return worst;
}

// dense ODE integration of the free-segment dynamics with noise
// eta * exp((t - t0)/tau), used as an independent check of the closed form
inline double ode_potential(double eta, double t_query, double t0, double v0,
                            const std::vector<IsiInput>& inputs, double current,
                            const ModelParams& mp, int steps = 40000) {
    const double tau = mp.tau();
    auto f = [&](double x, double tt) {
        const double noise = mp.leakless() ? eta : eta * std::exp((tt - t0) / tau);
        return (-mp.conductance * x + current + noise) / mp.capacitance;
    };
    // integrate piecewise so jumps land exactly at their times
    std::vector<std::pair<double, double>> knots = {{t0, 0.0}};
    for (const auto& in : inputs)
        if (in.time > t0 && in.time < t_query) knots.push_back({in.time, in.amplitude});
    knots.push_back({t_query, 0.0});
    double v = v0;
    for (std::size_t seg = 0; seg + 1 < knots.size(); ++seg) {
        v += knots[seg].second / mp.capacitance;
        const double a = knots[seg].first, b = knots[seg + 1].first;
        const int n = std::max(16, static_cast<int>(steps * (b - a) / (t_query - t0)));
        const double h = (b - a) / n;
        for (int s = 0; s < n; ++s) {
            const double t = a + s * h;
            const double k1 = f(v, t);
            const double k2 = f(v + 0.5 * h * k1, t + 0.5 * h);
            const double k3 = f(v + 0.5 * h * k2, t + 0.5 * h);
            const double k4 = f(v + h * k3, t + h);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    return v;
}

// random ISI generator used by property tests
inline IsiProblem random_isi(Rng& rng, double span, int max_inputs, double amp_scale) {
    const int m = rng.uniform_int(max_inputs + 1);
    std::vector<std::pair<double, double>> ins;
    std::vector<double> ts;
    for (int k = 0; k < m; ++k) ts.push_back(rng.uniform(0.02, 0.98) * span);
    std::sort(ts.begin(), ts.end());
    for (double t : ts) ins.emplace_back(t, rng.uniform(-amp_scale, amp_scale));
    auto pr = single_isi(span, ins);
    // enforce strict separation
    for (std::size_t k = 1; k < pr.inputs.size(); ++k)
        if (pr.inputs[k].time <= pr.inputs[k - 1].time)
            pr.inputs[k].time = pr.inputs[k - 1].time + 1e-6 * span;
    return pr;
}

// adaptive-free quadrature of the squared solved noise (fine trapezoid)
inline double quad_noise_weight(const OptimalPath& path, const ModelParams& mp,
                                int per_segment = 20000) {
    double acc = 0.0;
    for (const auto& seg : path.segments) {
        const double len = seg.t_end - seg.t_begin;
        if (len <= 0.0) continue;
        const int n = per_segment;
        double local = 0.0;
        for (int k = 0; k < n; ++k) {
            const double t = seg.t_begin + len * (k + 0.5) / n;
            const double e = path.noise(t, mp);
            local += e * e;
        }
        acc += local * len / n;
    }
    return -0.5 * acc;
}

}  // namespace testing_helpers

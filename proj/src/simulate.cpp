#include "lifnet/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "lifnet/numeric.hpp"
#include "lifnet/rng.hpp"

namespace lifnet {

std::vector<std::vector<double>> random_network(const NetworkSpec& spec) {
    if (spec.connection_fraction < 0.0 || spec.connection_fraction > 1.0)
        throw model_error("connection fraction outside [0, 1]");
    if (spec.max_amplitude < 0.0) throw model_error("negative max amplitude");
    const int n = spec.neuron_count;
    Rng rng(spec.seed);
    std::vector<int> sign(n, 1);
    if (spec.mode == NetworkSpec::Mode::dale)
        for (int j = 0; j < n; ++j) sign[j] = rng.uniform() < 0.5 ? 1 : -1;
    std::vector<std::vector<double>> j_mat(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (rng.uniform() >= spec.connection_fraction) continue;
            const double u = rng.uniform();
            j_mat[i][j] = spec.mode == NetworkSpec::Mode::uniform_signed
                              ? (2.0 * u - 1.0) * spec.max_amplitude
                              : sign[j] * u * spec.max_amplitude;
        }
    }
    return j_mat;
}

Recording simulate_network(const ModelParams& params, double duration,
                           const SimulateOptions& opt) {
    params.validate();
    if (!(opt.dt > 0.0)) throw model_error("dt must be positive");
    if (!(duration > 0.0)) throw model_error("duration must be positive");
    const int n = params.size();
    const double c = params.capacitance;
    const double vth = params.threshold;
    const bool leakless = params.leakless();
    const double tau = params.tau();

    Rng rng(opt.seed);
    std::vector<double> v(n, 0.0);
    if (opt.random_initial_potentials)
        for (int i = 0; i < n; ++i) v[i] = rng.uniform() * vth * 0.999;
    std::vector<double> pending(n, 0.0);       // synaptic charge to apply next step
    std::vector<double> refrac_until(n, 0.0);  // own refractory window end
    Recording rec;
    rec.neuron_count = n;
    rec.duration = duration;
    rec.trains.assign(n, {});

    const long steps = static_cast<long>(std::ceil(duration / opt.dt));
    const double decay = leakless ? 1.0 : std::exp(-opt.dt / tau);
    // exact one-step noise std on the potential
    double noise_std;
    if (params.noise_std == 0.0) noise_std = 0.0;
    else if (leakless) noise_std = params.noise_std * std::sqrt(opt.dt) / c;
    else
        noise_std = params.noise_std *
                    std::sqrt(one_m_exp(2.0 * opt.dt / tau) /
                              (2.0 * params.conductance * c));
    const double rk_h = opt.dt;
    const long cap = static_cast<long>(opt.max_rate * duration) + 16;
    std::vector<long> count(n, 0);

    // delayed synaptic queue, in whole steps
    const long delay_steps =
        params.delay > 0.0 ? std::max<long>(1, std::lround(params.delay / opt.dt)) : 0;
    std::vector<std::vector<double>> delay_ring;
    if (delay_steps > 0) delay_ring.assign(delay_steps, std::vector<double>(n, 0.0));

    for (long s = 0; s < steps; ++s) {
        const double t_next = (s + 1) * opt.dt;
        // apply pending synaptic charge from spikes of the previous step
        if (delay_steps > 0) {
            auto& slot = delay_ring[s % delay_steps];
            for (int i = 0; i < n; ++i) {
                v[i] += slot[i] / c;
                slot[i] = 0.0;
            }
        } else {
            for (int i = 0; i < n; ++i) {
                v[i] += pending[i] / c;
                pending[i] = 0.0;
            }
        }
        // advance potentials
        for (int i = 0; i < n; ++i) {
            if (params.refractory > 0.0 && t_next <= refrac_until[i]) {
                v[i] = 0.0;
                continue;
            }
            const double drive = params.currents[i];
            if (opt.integrator == SimulateOptions::Integrator::exact_ou) {
                if (leakless) v[i] += drive * opt.dt / c;
                else {
                    const double m = drive / params.conductance;
                    v[i] = m + (v[i] - m) * decay;
                }
            } else {
                // classic fourth-order step on the deterministic part
                auto f = [&](double x) { return (-params.conductance * x + drive) / c; };
                const double k1 = f(v[i]);
                const double k2 = f(v[i] + 0.5 * rk_h * k1);
                const double k3 = f(v[i] + 0.5 * rk_h * k2);
                const double k4 = f(v[i] + rk_h * k3);
                v[i] += rk_h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            if (noise_std > 0.0) v[i] += noise_std * rng.normal();
        }
        // threshold crossings in ascending neuron index
        for (int i = 0; i < n; ++i) {
            if (v[i] < vth) continue;
            rec.trains[i].push_back(t_next);
            if (++count[i] > cap)
                throw saturation_error("neuron " + std::to_string(i) +
                                       " exceeded the firing-rate cap");
            v[i] = 0.0;
            if (params.refractory > 0.0) refrac_until[i] = t_next + params.refractory;
            for (int k = 0; k < n; ++k) {
                if (k == i) continue;
                const double jki = params.couplings[k][i];
                if (jki == 0.0) continue;
                if (delay_steps > 0) delay_ring[s % delay_steps][k] += jki;
                else pending[k] += jki;
            }
        }
        if (opt.probe && s % opt.probe_stride == 0) opt.probe(t_next, v);
    }
    for (auto& tr : rec.trains)
        while (!tr.empty() && tr.back() > duration) tr.pop_back();
    return rec;
}

ConditionedEnsemble conditioned_paths(const ModelParams& params, int neuron,
                                      const std::vector<IsiInput>& inputs, double isi_lo,
                                      double isi_hi, int want_accepted, double dt,
                                      std::uint64_t seed, int max_trials) {
    Rng rng(seed);
    const double c = params.capacitance;
    const bool leakless = params.leakless();
    const double tau = params.tau();
    const double drive = params.currents[neuron];
    const double decay = leakless ? 1.0 : std::exp(-dt / tau);
    const double noise_std =
        params.noise_std == 0.0
            ? 0.0
            : (leakless ? params.noise_std * std::sqrt(dt) / c
                        : params.noise_std * std::sqrt(one_m_exp(2.0 * dt / tau) /
                                                       (2.0 * params.conductance * c)));
    const long steps = static_cast<long>(std::ceil(isi_hi / dt));
    ConditionedEnsemble out;
    out.grid.resize(steps);
    for (long s = 0; s < steps; ++s) out.grid[s] = (s + 1) * dt;
    std::vector<double> acc(steps, 0.0), trace(steps, 0.0);

    for (int trial = 0; trial < max_trials && out.accepted < want_accepted; ++trial) {
        double v = 0.0;
        std::size_t next_in = 0;
        bool crossed = false;
        double t_cross = 0.0;
        for (long s = 0; s < steps; ++s) {
            const double t_next = (s + 1) * dt;
            while (next_in < inputs.size() && inputs[next_in].time <= t_next - dt) ++next_in;
            if (next_in < inputs.size() && inputs[next_in].time <= t_next &&
                inputs[next_in].time > t_next - dt) {
                v += inputs[next_in].amplitude / c;
            }
            if (leakless) v += drive * dt / c;
            else {
                const double m = drive / params.conductance;
                v = m + (v - m) * decay;
            }
            if (noise_std > 0.0) v += noise_std * rng.normal();
            trace[s] = v;
            if (v >= params.threshold) {
                crossed = true;
                t_cross = t_next;
                break;
            }
        }
        if (crossed && t_cross >= isi_lo && t_cross <= isi_hi) {
            for (long s = 0; s < steps; ++s)
                acc[s] += out.grid[s] <= t_cross ? trace[s] : params.threshold;
            out.accepted += 1;
        }
    }
    out.mean_potential.resize(steps, 0.0);
    if (out.accepted > 0)
        for (long s = 0; s < steps; ++s) out.mean_potential[s] = acc[s] / out.accepted;
    return out;
}

}  // namespace lifnet

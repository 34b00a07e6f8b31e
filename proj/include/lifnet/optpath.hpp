#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lifnet/types.hpp"

namespace lifnet {

struct infeasible_isi : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Piecewise-constant threshold over an ISI. Levels are indexed by the
/// breakpoints: level(t) = levels[k] for t in [breaks[k-1], breaks[k]),
/// levels.front() before the first break, levels.back() from the last one.
/// The firing target at the end of the ISI is `terminal`.
class ThresholdFn {
public:
    static ThresholdFn constant(double level) {
        ThresholdFn f;
        f.levels_ = {level};
        f.terminal_ = level;
        return f;
    }
    static ThresholdFn piecewise(std::vector<double> breaks, std::vector<double> levels,
                                 double terminal) {
        ThresholdFn f;
        f.breaks_ = std::move(breaks);
        f.levels_ = std::move(levels);
        f.terminal_ = terminal;
        return f;
    }

    double at(double t) const {
        std::size_t k = 0;
        while (k < breaks_.size() && t >= breaks_[k]) ++k;
        return levels_[k];
    }
    double terminal() const { return terminal_; }
    const std::vector<double>& breaks() const { return breaks_; }
    bool is_constant() const { return breaks_.empty(); }

private:
    std::vector<double> breaks_;
    std::vector<double> levels_ = {1.0};
    double terminal_ = 1.0;
};

/// Segment of an optimal path. Free segments carry the noise value at the
/// segment end, noise(t) = noise_end * exp(-(t_end - t)/tau) (constant for
/// g = 0). Passive segments hold the potential at `level` with constant
/// noise g*level - I.
struct PathSegment {
    enum class Kind { free, passive };
    Kind kind = Kind::free;
    double t_begin = 0.0;
    double t_end = 0.0;
    double v_begin = 0.0;    // potential at t_begin (after any jump)
    double noise_end = 0.0;  // free: noise value at t_end
    double level = 0.0;      // passive: pinned potential
};

struct ActiveContact {
    double time = 0.0;
    int input_index = -1;  // -1: terminal spike; -2: threshold breakpoint
    double noise_before = 0.0;
    double noise_after = 0.0;  // filled when the next segment closes
};

struct OptimalPath {
    std::vector<PathSegment> segments;
    std::vector<ActiveContact> contacts;  // terminal contact included, last
    double log_weight = 0.0;              // -1/2 int eta*(t)^2 dt
    int passive_count = 0;
    bool near_tie = false;  // two candidates within 1e-10 relative

    /// Optimal potential at time t, reconstructed from the segments.
    double potential(double t, const IsiProblem& problem, const ModelParams& params) const;
    /// Optimal noise at time t.
    double noise(double t, const ModelParams& params) const;
};

/// Scalar context for one ISI solve: interval, inputs with resolved
/// amplitudes, external current of the neuron.
struct IsiContext {
    const IsiProblem* problem = nullptr;
    double current = 0.0;  // I_i
};

/// Eq.-(10)-style free potential: path from (t0, v0) with noise
/// coefficient eta (value at t0), inputs applied at their times.
double free_segment_potential(double eta, double t, double t0, double v0,
                              const std::vector<IsiInput>& inputs, double current,
                              const ModelParams& params);

/// Noise coefficient (referenced to t0) that brings the free potential to
/// `target` at time tm, contact evaluated just before the jump at tm.
double active_candidate(double tm, double target, double t0, double v0,
                        const std::vector<IsiInput>& inputs, double current,
                        const ModelParams& params);

/// Tangency candidate in the gap (gap_begin, gap_end) for a path started at
/// (t0, v0): noise coefficient (at t0) and contact time, if admissible.
std::optional<std::pair<double, double>> passive_candidate(
    double gap_begin, double gap_end, double gap_level, double t0, double v0,
    const std::vector<IsiInput>& inputs, double current, const ModelParams& params);

/// Duration of a passive contact at (tc, level) such that the departing
/// potential reaches `target_l` at time tl, crossing `between` inputs.
/// Nullopt when the departure can never reach the target.
std::optional<double> passive_contact_duration(double tc, double level, double tl,
                                               double target_l,
                                               const std::vector<IsiInput>& between,
                                               double current, const ModelParams& params);

/// Sink receiving the solved path structure for derivative assembly.
/// Parameter slots: one per input (by input index) plus the current.
struct StructureSink {
    // free segment between fixed contact times; lambda_end is affine with
    // d lambda / d amplitude_m = amp_coeff[m], d lambda / d I = cur_coeff.
    virtual void free_segment(double weight_b, double lambda_end,
                              const std::vector<std::pair<int, double>>& amp_coeff,
                              double cur_coeff) = 0;
    // pin sandwich: see implementation for the (d, y, vb) parameterization.
    virtual void sandwich(double s_val, const double grad[3], const double hess[3][3],
                          const std::vector<std::pair<int, double>>& d_amp,
                          double d_cur, double y_cur,
                          const std::vector<std::pair<int, double>>& vb_amp, double vb_cur) = 0;
    virtual ~StructureSink() = default;
};

/// Full contact-search solve of one ISI under a (possibly time-dependent)
/// threshold. Throws infeasible_isi when no feasible path exists.
OptimalPath solve_isi(const IsiProblem& problem, const ModelParams& params,
                      const ThresholdFn& threshold, StructureSink* sink = nullptr);

/// -1/2 int eta*^2 dt of a solved path (already stored in log_weight; this
/// recomputes it from the segments as a consistency hook).
double path_log_weight(const OptimalPath& path, const ModelParams& params);

}  // namespace lifnet

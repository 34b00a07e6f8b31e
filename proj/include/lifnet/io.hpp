#pragma once

#include <string>
#include <vector>

#include "lifnet/infer.hpp"
#include "lifnet/types.hpp"

namespace lifnet {

struct io_error : std::runtime_error {
    int line = 0;
    explicit io_error(const std::string& msg, int line_no = 0)
        : std::runtime_error(msg), line(line_no) {}
};

/// Spike file: '#' header lines (`neurons N`, `duration T`), then
/// `index<TAB>time` rows globally sorted by time.
void write_spikes(const std::string& path, const Recording& rec,
                  const std::string& manifest_id = {});
Recording read_spikes(const std::string& path);

void write_model(const std::string& path, const ModelParams& params,
                 const std::string& manifest_id = {});
ModelParams read_model(const std::string& path);

void write_results(const std::string& path, const InferenceResult& result,
                   const ModelParams& constants, bool emit_hessian,
                   const std::string& manifest_id = {});
struct ResultsFile {
    ModelParams params;                       // inferred currents/couplings
    std::vector<double> log_likelihoods;      // per neuron
    std::vector<std::vector<double>> error_bars;
    std::vector<bool> converged;
    std::vector<std::vector<double>> hessians;  // row-major, empty if not emitted
    std::string manifest_id;
};
ResultsFile read_results(const std::string& path);

/// Deterministic digest of a byte string (FNV-1a 64), hex encoded.
std::string digest_hex(const std::string& bytes);
std::string digest_file(const std::string& path);

struct RunManifest {
    std::string command;
    std::string config_json;  // serialized flag snapshot
    std::uint64_t seed = 0;
    std::string code_version;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> input_digests;
    std::vector<std::pair<std::string, std::string>> output_digests;

    /// Stable run id: digest over command, config, seed and input digests
    /// (wall time and outputs excluded so reruns reproduce it).
    std::string run_id() const;
    void write(const std::string& path) const;
};

}  // namespace lifnet

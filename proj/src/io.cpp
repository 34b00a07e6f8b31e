#include "lifnet/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lifnet/version.hpp"

namespace lifnet {

using nlohmann::json;

void write_spikes(const std::string& path, const Recording& rec,
                  const std::string& manifest_id) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open spike file for writing: " + path);
    out << "# lifnet spikes v1\n";
    if (!manifest_id.empty()) out << "# manifest " << manifest_id << "\n";
    out << "# neurons " << rec.neuron_count << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", rec.duration);
    out << "# duration " << buf << "\n";
    std::vector<std::pair<double, int>> all;
    all.reserve(rec.total_spikes());
    for (int i = 0; i < rec.neuron_count; ++i)
        for (double t : rec.trains[i]) all.emplace_back(t, i);
    std::stable_sort(all.begin(), all.end());
    for (const auto& [t, i] : all) {
        std::snprintf(buf, sizeof buf, "%.17g", t);
        out << i << '\t' << buf << '\n';
    }
}

Recording read_spikes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open spike file: " + path);
    Recording rec;
    std::string line;
    int line_no = 0;
    bool have_n = false, have_t = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "neurons") {
                if (!(hs >> rec.neuron_count) || rec.neuron_count <= 0)
                    throw io_error("bad neurons header", line_no);
                rec.trains.assign(rec.neuron_count, {});
                have_n = true;
            } else if (key == "duration") {
                if (!(hs >> rec.duration) || !(rec.duration > 0.0))
                    throw io_error("bad duration header", line_no);
                have_t = true;
            }
            continue;
        }
        if (!have_n || !have_t)
            throw io_error("spike row before neurons/duration headers", line_no);
        std::istringstream ls(line);
        int idx;
        double t;
        if (!(ls >> idx >> t)) throw io_error("malformed spike row", line_no);
        if (idx < 0 || idx >= rec.neuron_count) throw io_error("neuron index out of range", line_no);
        if (!(t >= 0.0) || t > rec.duration) throw io_error("spike time outside [0, T]", line_no);
        rec.trains[idx].push_back(t);
    }
    if (!have_n || !have_t) throw io_error("missing spike file headers");
    for (auto& tr : rec.trains)
        if (!std::is_sorted(tr.begin(), tr.end())) std::sort(tr.begin(), tr.end());
    rec.validate();
    return rec;
}

void write_model(const std::string& path, const ModelParams& params,
                 const std::string& manifest_id) {
    json j;
    j["format"] = "lifnet model v1";
    if (!manifest_id.empty()) j["manifest"] = manifest_id;
    j["neurons"] = params.size();
    j["capacitance_farad"] = params.capacitance;
    j["conductance_siemens"] = params.conductance;
    j["threshold_volt"] = params.threshold;
    j["noise_std_ampere_sqrt_second"] = params.noise_std;
    j["currents_ampere"] = params.currents;
    j["couplings_coulomb"] = params.couplings;
    j["refractory_second"] = params.refractory;
    j["delay_second"] = params.delay;
    std::ofstream out(path);
    if (!out) throw io_error("cannot open model file for writing: " + path);
    out << j.dump(1) << "\n";
}

ModelParams read_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw io_error(std::string("model file parse error: ") + e.what());
    }
    ModelParams p;
    try {
        p.capacitance = j.at("capacitance_farad").get<double>();
        p.conductance = j.at("conductance_siemens").get<double>();
        p.threshold = j.at("threshold_volt").get<double>();
        p.noise_std = j.value("noise_std_ampere_sqrt_second", 0.0);
        p.currents = j.at("currents_ampere").get<std::vector<double>>();
        p.couplings = j.at("couplings_coulomb").get<std::vector<std::vector<double>>>();
        p.refractory = j.value("refractory_second", 0.0);
        p.delay = j.value("delay_second", 0.0);
    } catch (const json::exception& e) {
        throw io_error(std::string("model file schema error: ") + e.what());
    }
    p.validate();
    return p;
}

void write_results(const std::string& path, const InferenceResult& result,
                   const ModelParams& constants, bool emit_hessian,
                   const std::string& manifest_id) {
    json j;
    j["format"] = "lifnet results v1";
    if (!manifest_id.empty()) j["manifest"] = manifest_id;
    j["neurons"] = static_cast<int>(result.neurons.size());
    j["capacitance_farad"] = constants.capacitance;
    j["conductance_siemens"] = constants.conductance;
    j["threshold_volt"] = constants.threshold;
    j["total_log_likelihood"] = result.total_log_likelihood;
    json rows = json::array();
    for (const auto& nr : result.neurons) {
        json r;
        r["neuron"] = nr.neuron;
        r["current_ampere"] = nr.current;
        r["couplings_coulomb"] = nr.couplings;
        r["log_likelihood"] = nr.log_likelihood;
        r["iterations"] = nr.iterations;
        r["converged"] = nr.converged;
        r["skipped"] = nr.skipped;
        r["active_contacts"] = nr.active_contacts;
        r["passive_contacts"] = nr.passive_contacts;
        r["boundary_flag"] = nr.boundary_flag;
        json bars = json::array();
        for (double b : nr.error_bars) bars.push_back(b == kInf ? -1.0 : b);
        r["error_bars"] = bars;
        r["current_error_bar_ampere"] = nr.current_error_bar == kInf ? -1.0 : nr.current_error_bar;
        if (emit_hessian && nr.hessian.size() > 0) {
            json hm = json::array();
            for (int a = 0; a < nr.hessian.rows(); ++a)
                for (int b = 0; b < nr.hessian.cols(); ++b) hm.push_back(nr.hessian(a, b));
            r["hessian_row_major"] = hm;
        }
        rows.push_back(std::move(r));
    }
    j["results"] = std::move(rows);
    std::ofstream out(path);
    if (!out) throw io_error("cannot open results file for writing: " + path);
    out << j.dump(1) << "\n";
}

ResultsFile read_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open results file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw io_error(std::string("results file parse error: ") + e.what());
    }
    ResultsFile rf;
    try {
        const int n = j.at("neurons").get<int>();
        rf.params.capacitance = j.at("capacitance_farad").get<double>();
        rf.params.conductance = j.at("conductance_siemens").get<double>();
        rf.params.threshold = j.at("threshold_volt").get<double>();
        rf.params.currents.assign(n, 0.0);
        rf.params.couplings.assign(n, std::vector<double>(n, 0.0));
        rf.manifest_id = j.value("manifest", "");
        for (const auto& r : j.at("results")) {
            const int i = r.at("neuron").get<int>();
            rf.params.currents[i] = r.at("current_ampere").get<double>();
            rf.params.couplings[i] = r.at("couplings_coulomb").get<std::vector<double>>();
            rf.log_likelihoods.push_back(r.at("log_likelihood").get<double>());
            rf.converged.push_back(r.at("converged").get<bool>());
            std::vector<double> bars = r.at("error_bars").get<std::vector<double>>();
            for (auto& b : bars)
                if (b < 0.0) b = kInf;
            rf.error_bars.push_back(std::move(bars));
            if (r.contains("hessian_row_major"))
                rf.hessians.push_back(r.at("hessian_row_major").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw io_error(std::string("results file schema error: ") + e.what());
    }
    return rf;
}

std::string digest_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_hex(ss.str());
}

std::string RunManifest::run_id() const {
    std::ostringstream ss;
    ss << command << '\n' << config_json << '\n' << seed << '\n';
    for (const auto& [name, dg] : input_digests) ss << name << '=' << dg << '\n';
    return digest_hex(ss.str());
}

void RunManifest::write(const std::string& path) const {
    json j;
    j["run_id"] = run_id();
    j["command"] = command;
    j["config"] = json::parse(config_json.empty() ? "{}" : config_json);
    j["seed"] = seed;
    j["code_version"] = code_version;
    j["wall_seconds"] = wall_seconds;
    json in = json::object(), out = json::object();
    for (const auto& [name, dg] : input_digests) in[name] = dg;
    for (const auto& [name, dg] : output_digests) out[name] = dg;
    j["input_digests"] = in;
    j["output_digests"] = out;
    std::ofstream f(path);
    if (!f) throw io_error("cannot write manifest: " + path);
    f << j.dump(1) << "\n";
}

}  // namespace lifnet

// Command-line front end: simulate / infer / analyze / bench / make-model.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lifnet/analysis.hpp"
#include "lifnet/infer.hpp"
#include "lifnet/io.hpp"
#include "lifnet/mthreshold.hpp"
#include "lifnet/oracle.hpp"
#include "lifnet/simulate.hpp"
#include "lifnet/version.hpp"

using namespace lifnet;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSaturation = 3;
constexpr int kExitPartial = 4;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const auto start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

RunManifest make_manifest(const std::string& command, const json& config,
                          std::uint64_t seed, const std::vector<std::string>& inputs) {
    RunManifest m;
    m.command = command;
    m.config_json = config.dump();
    m.seed = seed;
    m.code_version = kVersion;
    for (const auto& path : inputs) m.input_digests.emplace_back(path, digest_file(path));
    return m;
}

void finish_manifest(RunManifest& m, const std::vector<std::string>& outputs, double t0) {
    m.wall_seconds = now_seconds() - t0;
    for (const auto& path : outputs) m.output_digests.emplace_back(path, digest_file(path));
    m.write(outputs.front() + ".manifest.json");
}

int cmd_simulate(const std::string& model_path, double duration, std::uint64_t seed,
                 double dt, const std::string& out, double max_rate) {
    const double t0 = now_seconds();
    ModelParams params;
    try {
        params = read_model(model_path);
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const model_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    json cfg = {{"duration", duration}, {"dt", dt}, {"max_rate", max_rate}};
    RunManifest m = make_manifest("simulate", cfg, seed, {model_path});
    SimulateOptions opt;
    opt.dt = dt;
    opt.seed = seed;
    opt.max_rate = max_rate;
    Recording rec;
    try {
        rec = simulate_network(params, duration, opt);
    } catch (const saturation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSaturation;
    } catch (const model_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    write_spikes(out, rec, m.run_id());
    finish_manifest(m, {out}, t0);
    std::cout << "wrote " << rec.total_spikes() << " spikes to " << out << "\n";
    return kExitOk;
}

struct InferCli {
    std::string spikes, config, out, mode = "fixed";
    double epsilon = 1e-12;
    int max_iters = 200;
    double tau_r = 0.0, tau_d = 0.0, sigma = 0.0;
    double prior_jmin = 0.0, prior_jmax = 0.0, prior_weight = 0.0;
    bool prior_set = false;
    int threads = 1;
    bool emit_hessian = false;
    double tau_override = 0.0;
};

int cmd_infer(const InferCli& cli) {
    const double t0 = now_seconds();
    Recording rec;
    ModelParams constants;
    try {
        rec = read_spikes(cli.spikes);
        constants = read_model(cli.config);
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what();
        if (e.line > 0) std::cerr << " (line " << e.line << ")";
        std::cerr << "\n";
        return kExitInput;
    } catch (const model_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    if (static_cast<int>(constants.currents.size()) != rec.neuron_count) {
        // config may carry only the scalar constants; size the rows to fit
        constants.currents.assign(rec.neuron_count, 0.0);
        constants.couplings.assign(rec.neuron_count,
                                   std::vector<double>(rec.neuron_count, 0.0));
    }
    InferenceOptions opt;
    opt.mode = cli.mode == "moving" ? ThresholdMode::moving : ThresholdMode::fixed;
    opt.epsilon = cli.epsilon;
    opt.max_iters = cli.max_iters;
    opt.tau_r = cli.tau_r;
    opt.tau_d = cli.tau_d;
    opt.sigma = cli.sigma;
    opt.threads = cli.threads;
    if (cli.tau_override > 0.0) opt.tau_override = cli.tau_override;
    if (cli.prior_set) opt.prior = PriorBounds{cli.prior_jmin, cli.prior_jmax, cli.prior_weight};
    if (opt.mode == ThresholdMode::moving && !(opt.sigma > 0.0)) {
        std::cerr << "error: --mode moving requires --sigma\n";
        return kExitInput;
    }
    json cfg = {{"mode", cli.mode},       {"epsilon", cli.epsilon}, {"max_iters", cli.max_iters},
                {"tau_r", cli.tau_r},     {"tau_d", cli.tau_d},     {"sigma", cli.sigma},
                {"threads", cli.threads}, {"tau", cli.tau_override}};
    RunManifest m = make_manifest("infer", cfg, 0, {cli.spikes, cli.config});
    InferenceResult result = infer_all(rec, constants, opt);
    write_results(cli.out, result, constants, cli.emit_hessian, m.run_id());
    finish_manifest(m, {cli.out}, t0);
    int converged = 0;
    for (const auto& nr : result.neurons)
        if (nr.converged || nr.skipped) ++converged;
    std::cout << converged << "/" << rec.neuron_count << " neurons converged, total L* = "
              << result.total_log_likelihood << "\n";
    return result.all_converged ? kExitOk : kExitPartial;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open output: " + path);
    out << header << "\n";
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.12g", row[k]);
            out << (k ? "," : "") << buf;
        }
        out << "\n";
    }
}

struct AnalyzeCli {
    std::string spikes, results, results_b, tasks, out_prefix = "analysis";
    int pair_i = 0, pair_j = 1;
    double bin = 0.01, window = 0.5, tau = 1.0, sigma = 0.0;
    int marginal_points = 21;
    double marginal_span = 0.2;
};

int cmd_analyze(const AnalyzeCli& cli) {
    const double t0 = now_seconds();
    Recording rec;
    try {
        rec = read_spikes(cli.spikes);
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what();
        if (e.line > 0) std::cerr << " (line " << e.line << ")";
        std::cerr << "\n";
        return kExitInput;
    }
    json cfg = {{"tasks", cli.tasks}, {"pair_i", cli.pair_i}, {"pair_j", cli.pair_j},
                {"bin", cli.bin},     {"window", cli.window}, {"tau", cli.tau}};
    std::vector<std::string> inputs = {cli.spikes};
    if (!cli.results.empty()) inputs.push_back(cli.results);
    if (!cli.results_b.empty()) inputs.push_back(cli.results_b);
    RunManifest m = make_manifest("analyze", cfg, 0, inputs);
    std::vector<std::string> outputs;

    std::istringstream ts(cli.tasks);
    std::string task;
    while (std::getline(ts, task, ',')) {
        if (task == "correlogram") {
            auto h = cross_correlogram(rec, cli.pair_i, cli.pair_j, cli.bin, cli.window);
            std::vector<std::vector<double>> rows;
            for (std::size_t b = 0; b < h.counts.size(); ++b)
                rows.push_back({0.5 * (h.edges[b] + h.edges[b + 1]), h.counts[b]});
            const std::string path = cli.out_prefix + "_correlogram.csv";
            write_csv(path, "delay_seconds,normalized_count", rows);
            outputs.push_back(path);
        } else if (task == "latency") {
            auto lat = latency_matrix(rec);
            std::vector<std::vector<double>> rows;
            for (int i = 0; i < rec.neuron_count; ++i)
                for (int j = 0; j < rec.neuron_count; ++j)
                    if (i != j && lat[i][j] < kInf)
                        rows.push_back({static_cast<double>(i), static_cast<double>(j), lat[i][j]});
            const std::string path = cli.out_prefix + "_latency.csv";
            write_csv(path, "post,pre,latency_seconds", rows);
            outputs.push_back(path);
        } else if (task == "compare") {
            if (cli.results.empty() || cli.results_b.empty()) {
                std::cerr << "error: compare needs --results and --results-b\n";
                return kExitInput;
            }
            auto a = read_results(cli.results);
            auto b = read_results(cli.results_b);
            auto r = coupling_correlation(a.params.couplings, b.params.couplings);
            const std::string path = cli.out_prefix + "_compare.csv";
            write_csv(path, "coupling_correlation", {{r ? *r : std::nan("")}});
            outputs.push_back(path);
        } else if (task == "eigen") {
            if (cli.results.empty() || !(cli.sigma > 0.0)) {
                std::cerr << "error: eigen needs --results (with hessians) and --sigma\n";
                return kExitInput;
            }
            auto rf = read_results(cli.results);
            if (rf.hessians.empty()) {
                std::cerr
                    << "error: results file has no hessians (rerun infer with --emit-hessian)\n";
                return kExitInput;
            }
            std::vector<std::vector<double>> rows;
            const int n = rec.neuron_count;
            for (int i = 0; i < n && i < static_cast<int>(rf.hessians.size()); ++i) {
                Eigen::MatrixXd h(n, n);
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) h(a, b) = rf.hessians[i][a * n + b];
                auto rep = eigen_report(h, rec, i, cli.tau, cli.sigma);
                rows.push_back({static_cast<double>(i), rep.eigenvalues.back(),
                                rep.lambda_max_predicted, rep.eigenvalues.front(),
                                rep.lambda_min_predicted, rep.vmax_rate_overlap2,
                                rep.vmin_current_overlap2, rep.regime_ok ? 1.0 : 0.0});
            }
            const std::string path = cli.out_prefix + "_eigen.csv";
            write_csv(path,
                      "neuron,lambda_max,lambda_max_pred,lambda_min,lambda_min_pred,"
                      "vmax_rate_overlap2,vmin_current_overlap2,regime_ok",
                      rows);
            outputs.push_back(path);
        } else if (task == "marginal") {
            if (cli.results.empty()) {
                std::cerr << "error: marginal needs --results\n";
                return kExitInput;
            }
            auto rf = read_results(cli.results);
            InferenceOptions opt;
            opt.sigma = cli.sigma;
            const int i = cli.pair_i, j = cli.pair_j;
            const double center = rf.params.couplings[i][j];
            std::vector<double> grid;
            for (int k = 0; k < cli.marginal_points; ++k)
                grid.push_back(center + cli.marginal_span *
                                            (k - (cli.marginal_points - 1) / 2.0) /
                                            ((cli.marginal_points - 1) / 2.0));
            auto curve = marginal_log_likelihood(rec, i, j, grid, rf.params, opt);
            std::vector<std::vector<double>> rows;
            for (std::size_t k = 0; k < grid.size(); ++k)
                rows.push_back({grid[k], curve.values[k], curve.ok[k] ? 1.0 : 0.0});
            const std::string path = cli.out_prefix + "_marginal.csv";
            write_csv(path, "coupling_coulomb,marginal_log_likelihood,converged", rows);
            outputs.push_back(path);
        } else if (!task.empty()) {
            std::cerr << "error: unknown task '" << task << "'\n";
            return kExitInput;
        }
    }
    if (outputs.empty()) {
        std::cerr << "error: no tasks requested\n";
        return kExitInput;
    }
    finish_manifest(m, outputs, t0);
    return kExitOk;
}

int cmd_bench(const std::string& out, std::uint64_t seed, double budget_seconds,
              const std::vector<int>& n_list, const std::vector<long>& s_list) {
    const double t0 = now_seconds();
    json cfg = {{"budget_seconds", budget_seconds}};
    RunManifest m = make_manifest("bench", cfg, seed, {});
    std::vector<std::vector<double>> rows;
    bool budget_hit = false;

    auto run_case = [&](int n, long s_target) {
        // leakless uncoupled data at about 1 Hz per neuron
        auto params = ModelParams::uniform(n, 1.0, 0.0, 1.0, 0.05, 1.0);
        const double duration = static_cast<double>(s_target) / n * 1.05 + 2.0;
        SimulateOptions sopt;
        sopt.dt = duration > 2e3 ? 2e-3 : 1e-3;
        sopt.seed = seed;
        auto rec = simulate_network(params, duration, sopt);
        auto cut = rec.first_spikes(static_cast<int>(s_target));
        auto known = ModelParams::uniform(n, 1.0, 0.0, 1.0, 0.0, 0.0);
        InferenceOptions opt;
        const auto w0 = std::chrono::steady_clock::now();
        auto result = infer_all(cut, known, opt);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
        rows.push_back({static_cast<double>(n), static_cast<double>(cut.total_spikes()), wall,
                        result.all_converged ? 1.0 : 0.0});
        return wall;
    };

    const int n_ref = n_list.front();
    for (long s : s_list) {
        if (now_seconds() - t0 > budget_seconds) { budget_hit = true; break; }
        run_case(n_ref, s);
    }
    const long s_ref = s_list.size() > 1 ? s_list[1] : s_list.front();
    const std::size_t s_rows = rows.size();
    for (int n : n_list) {
        if (now_seconds() - t0 > budget_seconds) { budget_hit = true; break; }
        run_case(n, s_ref);
    }

    auto slope = [](const std::vector<std::pair<double, double>>& pts) {
        if (pts.size() < 2) return std::nan("");
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double n = static_cast<double>(pts.size());
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    std::vector<std::pair<double, double>> s_pts, n_pts;
    for (std::size_t k = 0; k < s_rows; ++k)
        s_pts.emplace_back(std::log(rows[k][1]), std::log(std::max(rows[k][2], 1e-6)));
    for (std::size_t k = s_rows; k < rows.size(); ++k)
        n_pts.emplace_back(std::log(rows[k][0]), std::log(std::max(rows[k][2], 1e-6)));
    const double exp_s = slope(s_pts);
    const double exp_n = slope(n_pts);
    rows.push_back({-1.0, exp_s, exp_n, budget_hit ? 1.0 : 0.0});
    write_csv(out, "neurons,spikes,wall_seconds,flag", rows);
    finish_manifest(m, {out}, t0);
    std::cout << "S-exponent " << exp_s << ", N-exponent " << exp_n
              << (budget_hit ? " (budget hit, partial table)" : "") << "\n";
    return kExitOk;
}

int cmd_make_model(int n, double c, double g, double vth, double sigma, double current,
                   double p_conn, double j0, const std::string& mode, std::uint64_t seed,
                   const std::string& out) {
    const double t0 = now_seconds();
    auto params = ModelParams::uniform(n, c, g, vth, sigma, current);
    if (p_conn > 0.0) {
        NetworkSpec spec;
        spec.neuron_count = n;
        spec.connection_fraction = p_conn;
        spec.max_amplitude = j0;
        spec.mode = mode == "dale" ? NetworkSpec::Mode::dale : NetworkSpec::Mode::uniform_signed;
        spec.seed = seed;
        params.couplings = random_network(spec);
    }
    json cfg = {{"n", n}, {"p", p_conn}, {"j0", j0}, {"mode", mode}};
    RunManifest m = make_manifest("make-model", cfg, seed, {});
    write_model(out, params, m.run_id());
    finish_manifest(m, {out}, t0);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic integrate-and-fire network: simulation and coupling inference"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "generate spikes from a model file");
    std::string sim_model, sim_out = "spikes.txt";
    double sim_duration = 10.0, sim_dt = 1e-5, sim_max_rate = 1e4;
    std::uint64_t sim_seed = 0;
    sim->add_option("--model", sim_model, "model JSON file")->required();
    sim->add_option("--duration", sim_duration, "seconds to simulate")->required();
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--dt", sim_dt, "integration step (seconds)");
    sim->add_option("--max-rate", sim_max_rate, "per-neuron rate cap (spikes/s)");
    sim->add_option("--out", sim_out, "output spike file");

    auto* inf = app.add_subcommand("infer", "infer currents and couplings from spikes");
    InferCli icli;
    inf->add_option("--spikes", icli.spikes, "spike file")->required();
    inf->add_option("--config", icli.config, "model JSON with C, g, V_th (sigma for MT)")
        ->required();
    inf->add_option("--out", icli.out, "results JSON")->required();
    inf->add_option("--mode", icli.mode, "fixed|moving")
        ->check(CLI::IsMember({"fixed", "moving"}));
    inf->add_option("--epsilon", icli.epsilon, "L* gain stopping threshold");
    inf->add_option("--max-iters", icli.max_iters, "iteration cap");
    inf->add_option("--tau-r", icli.tau_r, "refractory period (s)");
    inf->add_option("--tau-d", icli.tau_d, "propagation delay (s)");
    inf->add_option("--sigma", icli.sigma, "noise std (required for moving mode)");
    inf->add_option("--tau", icli.tau_override, "leak time override (s)");
    inf->add_option("--threads", icli.threads, "worker threads");
    auto* pj1 = inf->add_option("--prior-jmin", icli.prior_jmin, "coupling lower bound");
    auto* pj2 = inf->add_option("--prior-jmax", icli.prior_jmax, "coupling upper bound");
    auto* pj3 = inf->add_option("--prior-weight", icli.prior_weight, "prior stiffness");
    inf->add_flag("--emit-hessian", icli.emit_hessian, "store per-neuron Hessians");

    auto* ana = app.add_subcommand("analyze", "post-inference analysis tables");
    AnalyzeCli acli;
    ana->add_option("--spikes", acli.spikes, "spike file")->required();
    ana->add_option("--tasks", acli.tasks,
                    "comma list: correlogram,latency,compare,eigen,marginal")
        ->required();
    ana->add_option("--results", acli.results, "results JSON");
    ana->add_option("--results-b", acli.results_b, "second results JSON (compare)");
    ana->add_option("--out-prefix", acli.out_prefix, "output file prefix");
    ana->add_option("--pair-i", acli.pair_i, "postsynaptic index");
    ana->add_option("--pair-j", acli.pair_j, "presynaptic index");
    ana->add_option("--bin", acli.bin, "correlogram bin (s)");
    ana->add_option("--window", acli.window, "correlogram window (s)");
    ana->add_option("--tau", acli.tau, "leak time for eigen reports (s)");
    ana->add_option("--sigma", acli.sigma, "noise std for eigen/marginal");
    ana->add_option("--marginal-points", acli.marginal_points, "marginal grid size");
    ana->add_option("--marginal-span", acli.marginal_span, "marginal half-width");

    auto* ben = app.add_subcommand("bench", "runtime scaling sweep");
    std::string ben_out = "bench.csv";
    std::uint64_t ben_seed = 0;
    double ben_budget = 240.0;
    std::vector<int> ben_n = {20, 40, 80};
    std::vector<long> ben_s = {25000, 50000, 100000};
    ben->add_option("--out", ben_out, "timing table CSV");
    ben->add_option("--seed", ben_seed, "RNG seed");
    ben->add_option("--budget", ben_budget, "time budget (s)");
    ben->add_option("--sizes-n", ben_n, "neuron counts");
    ben->add_option("--sizes-s", ben_s, "spike counts");

    auto* mk = app.add_subcommand("make-model", "write a model JSON, optionally a random network");
    int mk_n = 2;
    double mk_c = 1.0, mk_g = 0.0, mk_vth = 1.0, mk_sigma = 0.0, mk_current = 1.0;
    double mk_p = 0.0, mk_j0 = 0.0;
    std::string mk_mode = "uniform-signed", mk_out = "model.json";
    std::uint64_t mk_seed = 0;
    mk->add_option("--n", mk_n, "neuron count")->required();
    mk->add_option("--capacitance", mk_c, "C (farad)");
    mk->add_option("--conductance", mk_g, "g (siemens)");
    mk->add_option("--threshold", mk_vth, "V_th (volt)");
    mk->add_option("--sigma", mk_sigma, "noise std");
    mk->add_option("--current", mk_current, "common external current");
    mk->add_option("--p", mk_p, "connection fraction");
    mk->add_option("--j0", mk_j0, "max coupling amplitude (coulomb)");
    mk->add_option("--net-mode", mk_mode, "uniform-signed|dale");
    mk->add_option("--seed", mk_seed, "RNG seed");
    mk->add_option("--out", mk_out, "output model JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim)
            return cmd_simulate(sim_model, sim_duration, sim_seed, sim_dt, sim_out, sim_max_rate);
        if (*inf) {
            icli.prior_set = pj1->count() || pj2->count() || pj3->count();
            return cmd_infer(icli);
        }
        if (*ana) return cmd_analyze(acli);
        if (*ben) return cmd_bench(ben_out, ben_seed, ben_budget, ben_n, ben_s);
        if (*mk)
            return cmd_make_model(mk_n, mk_c, mk_g, mk_vth, mk_sigma, mk_current, mk_p, mk_j0,
                                  mk_mode, mk_seed, mk_out);
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what();
        if (e.line > 0) std::cerr << " (line " << e.line << ")";
        std::cerr << "\n";
        return kExitInput;
    } catch (const saturation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSaturation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

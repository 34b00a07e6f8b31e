#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lifnet/io.hpp"
#include "lifnet/simulate.hpp"

using namespace lifnet;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& args) {
    const std::string cmd = std::string(LIFNET_CLI) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("spike file round trip") {
    Recording rec;
    rec.neuron_count = 3;
    rec.duration = 2.5;
    rec.trains = {{0.125, 1.0}, {0.3}, {0.7, 1.9999}};
    write_spikes("/tmp/lifnet_rt.txt", rec, "abc");
    auto back = read_spikes("/tmp/lifnet_rt.txt");
    CHECK(back.neuron_count == 3);
    CHECK(back.duration == rec.duration);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(back.trains[i].size() == rec.trains[i].size());
        for (std::size_t k = 0; k < rec.trains[i].size(); ++k)
            CHECK(back.trains[i][k] == rec.trains[i][k]);
    }
}

TEST_CASE("malformed spike row reports the line number") {
    std::ofstream out("/tmp/lifnet_bad.txt");
    out << "# neurons 2\n# duration 5\n0\t0.5\nnot_a_row\n";
    out.close();
    try {
        read_spikes("/tmp/lifnet_bad.txt");
        FAIL("expected io_error");
    } catch (const io_error& e) {
        CHECK(e.line == 4);
    }
}

TEST_CASE("model file round trip") {
    auto p = ModelParams::uniform(2, 1.5, 0.3, 1.1, 0.21, 0.9);
    p.couplings[0][1] = -0.12;
    p.refractory = 0.002;
    write_model("/tmp/lifnet_model.json", p);
    auto back = read_model("/tmp/lifnet_model.json");
    CHECK(back.capacitance == p.capacitance);
    CHECK(back.conductance == p.conductance);
    CHECK(back.couplings[0][1] == p.couplings[0][1]);
    CHECK(back.refractory == p.refractory);
}

TEST_CASE("manifest run id is stable across wall times") {
    RunManifest a;
    a.command = "simulate";
    a.config_json = "{\"dt\":1e-05}";
    a.seed = 9;
    a.wall_seconds = 1.0;
    RunManifest b = a;
    b.wall_seconds = 99.0;
    CHECK(a.run_id() == b.run_id());
    RunManifest c = a;
    c.seed = 10;
    CHECK(a.run_id() != c.run_id());
}

TEST_CASE("cli: simulate is byte-identical per seed and honors exit codes") {
    const int mk = run("make-model --n 2 --conductance 0 --sigma 0.05 --current 1 "
                       "--out /tmp/lifnet_m.json");
    REQUIRE(mk == 0);
    REQUIRE(run("simulate --model /tmp/lifnet_m.json --duration 30 --seed 5 --dt 1e-3 "
                "--out /tmp/lifnet_a.txt") == 0);
    REQUIRE(run("simulate --model /tmp/lifnet_m.json --duration 30 --seed 5 --dt 1e-3 "
                "--out /tmp/lifnet_b.txt") == 0);
    CHECK(slurp("/tmp/lifnet_a.txt") == slurp("/tmp/lifnet_b.txt"));
    CHECK(run("simulate --model /tmp/missing.json --duration 1 --out /tmp/x.txt") == 2);

    // deterministic periodic model: exact period, repeat-identical
    const int mk2 = run("make-model --n 1 --conductance 1 --current 2 --out /tmp/lifnet_det.json");
    REQUIRE(mk2 == 0);
    REQUIRE(run("simulate --model /tmp/lifnet_det.json --duration 4 --dt 1e-4 "
                "--out /tmp/lifnet_det.txt") == 0);
    auto rec = read_spikes("/tmp/lifnet_det.txt");
    REQUIRE(rec.trains[0].size() >= 3);
    const double p1 = rec.trains[0][1] - rec.trains[0][0];
    const double p2 = rec.trains[0][2] - rec.trains[0][1];
    CHECK(std::fabs(p1 - p2) < 2e-4);

    // saturation exit code
    const int mk3 = run("make-model --n 1 --conductance 0 --current 1000 --out /tmp/lifnet_sat.json");
    REQUIRE(mk3 == 0);
    CHECK(run("simulate --model /tmp/lifnet_sat.json --duration 2 --dt 1e-4 --max-rate 50 "
              "--out /tmp/lifnet_sat.txt") == 3);
}

TEST_CASE("cli: infer round trip and analyze tasks") {
    // incommensurate rates so per-ISI input counts vary and the current
    // and coupling stay identifiable
    REQUIRE(run("make-model --n 2 --conductance 0 --sigma 0.05 --current 1 "
                "--out /tmp/lifnet_i.json") == 0);
    {
        auto m = read_model("/tmp/lifnet_i.json");
        m.currents[1] = 1.618;
        write_model("/tmp/lifnet_i.json", m);
    }
    REQUIRE(run("simulate --model /tmp/lifnet_i.json --duration 400 --seed 2 --dt 1e-3 "
                "--out /tmp/lifnet_i.txt") == 0);
    REQUIRE(run("infer --spikes /tmp/lifnet_i.txt --config /tmp/lifnet_i.json "
                "--out /tmp/lifnet_r.json") == 0);
    auto rf = read_results("/tmp/lifnet_r.json");
    CHECK(rf.params.currents[0] == doctest::Approx(1.0).epsilon(0.05));
    CHECK(rf.params.currents[1] == doctest::Approx(1.618).epsilon(0.05));
    CHECK(std::fabs(rf.params.couplings[0][1]) < 0.05);

    // unknown analyze task exits 2
    CHECK(run("analyze --spikes /tmp/lifnet_i.txt --tasks nonsense") == 2);
    // correlogram + latency run
    CHECK(run("analyze --spikes /tmp/lifnet_i.txt --tasks correlogram,latency "
              "--out-prefix /tmp/lifnet_an") == 0);
    CHECK(slurp("/tmp/lifnet_an_correlogram.csv").rfind("delay_seconds", 0) == 0);
    // compare of a results file with itself gives R = 1
    CHECK(run("analyze --spikes /tmp/lifnet_i.txt --tasks compare --results /tmp/lifnet_r.json "
              "--results-b /tmp/lifnet_r.json --out-prefix /tmp/lifnet_cmp") == 0);
    std::istringstream cmp(slurp("/tmp/lifnet_cmp_compare.csv"));
    std::string header, value;
    std::getline(cmp, header);
    std::getline(cmp, value);
    CHECK(std::stod(value) == doctest::Approx(1.0).epsilon(1e-9));
    // malformed spike file exit code
    std::ofstream bad("/tmp/lifnet_badrow.txt");
    bad << "# neurons 1\n# duration 1\nx y\n";
    bad.close();
    CHECK(run("infer --spikes /tmp/lifnet_badrow.txt --config /tmp/lifnet_i.json "
              "--out /tmp/x.json") == 2);
}

TEST_CASE("cli: moving mode without sigma is an input error") {
    CHECK(run("infer --spikes /tmp/lifnet_i.txt --config /tmp/lifnet_i.json "
              "--out /tmp/x.json --mode moving") == 2);
}

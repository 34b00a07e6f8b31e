#include <doctest.h>

#include "helpers.hpp"
#include "lifnet/core.hpp"

using namespace lifnet;
using namespace testing_helpers;

TEST_CASE("nondimensionalize direct substitutions") {
    auto p = ModelParams::uniform(1, 1.0, 1.0, 1.0, 0.1, 0.5);
    auto dp = nondimensionalize(p);
    CHECK(dp.sigma_bar.has_value());
    CHECK(*dp.sigma_bar == doctest::Approx(0.1).epsilon(1e-14));

    auto p2 = ModelParams::uniform(1, 1.0, 4.0, 2.0, 1.0, 0.5);
    auto dp2 = nondimensionalize(p2);
    CHECK(*dp2.sigma_bar == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("nondimensionalize without leak leaves sigma undefined") {
    auto p = ModelParams::uniform(2, 1.0, 0.0, 1.0, 0.7, 0.5);
    p.couplings[0][1] = 0.3;
    auto dp = nondimensionalize(p);
    CHECK(!dp.sigma_bar.has_value());
    CHECK(dp.currents.empty());
    CHECK(dp.couplings[0][1] == doctest::Approx(0.3));
}

TEST_CASE("nondimensionalize round trip within 1e-12") {
    auto p = ModelParams::uniform(3, 2.3, 0.7, 1.4, 0.31, 0.9);
    p.couplings[0][1] = 0.11;
    p.couplings[2][0] = -0.07;
    p.currents[1] = 1.7;
    auto dp = nondimensionalize(p);
    auto back = redimensionalize(dp, p.capacitance, p.conductance, p.threshold);
    for (int i = 0; i < 3; ++i) {
        CHECK(back.currents[i] == doctest::Approx(p.currents[i]).epsilon(1e-12));
        for (int j = 0; j < 3; ++j)
            CHECK(back.couplings[i][j] == doctest::Approx(p.couplings[i][j]).epsilon(1e-12));
    }
    CHECK(back.noise_std == doctest::Approx(p.noise_std).epsilon(1e-12));
}

TEST_CASE("merge_simultaneous_inputs") {
    auto [t1, a1] = merge_simultaneous_inputs({1.0, 1.0}, {0.2, -0.1});
    REQUIRE(t1.size() == 1);
    CHECK(t1[0] == 1.0);
    CHECK(a1[0] == doctest::Approx(0.1));

    auto [t2, a2] = merge_simultaneous_inputs({}, {});
    CHECK(t2.empty());
    CHECK(a2.empty());

    auto [t3, a3] = merge_simultaneous_inputs({1, 2, 2, 3}, {1.0, 2.0, 3.0, 4.0});
    REQUIRE(t3.size() == 3);
    CHECK(a3[0] == 1.0);
    CHECK(a3[1] == doctest::Approx(5.0));
    CHECK(a3[2] == 4.0);

    auto [t4, a4] = merge_simultaneous_inputs({1.0, 1.0005, 2.0}, {1.0, 1.0, 1.0}, 1e-3);
    CHECK(t4.size() == 2);
    (void)a4;
}

TEST_CASE("build_isi_problems basic, refractory and delay") {
    Recording rec;
    rec.neuron_count = 2;
    rec.duration = 2.0;
    rec.trains = {{0.0, 1.0}, {0.5}};
    auto p = ModelParams::uniform(2, 1.0, 0.0, 1.0, 0.0, 1.0);
    p.couplings[0][1] = 0.2;

    auto probs = build_isi_problems(rec, p, 0);
    REQUIRE(probs.size() == 1);
    REQUIRE(probs[0].inputs.size() == 1);
    CHECK(probs[0].inputs[0].time == doctest::Approx(0.5));
    CHECK(probs[0].inputs[0].amplitude == doctest::Approx(0.2));
    CHECK(probs[0].v_begin == 0.0);

    p.refractory = 0.6;
    auto probs_r = build_isi_problems(rec, p, 0);
    CHECK(probs_r[0].inputs.empty());

    p.refractory = 0.0;
    p.delay = 0.3;
    auto probs_d = build_isi_problems(rec, p, 0);
    REQUIRE(probs_d[0].inputs.size() == 1);
    CHECK(probs_d[0].inputs[0].time == doctest::Approx(0.8));
}

TEST_CASE("boundary spikes of other neurons are excluded (open interval)") {
    Recording rec;
    rec.neuron_count = 2;
    rec.duration = 3.0;
    rec.trains = {{0.0, 1.0, 2.0}, {1.0, 1.5, 2.0}};
    auto p = ModelParams::uniform(2, 1.0, 0.0, 1.0, 0.0, 1.0);
    p.couplings[0][1] = 0.1;
    auto probs = build_isi_problems(rec, p, 0);
    REQUIRE(probs.size() == 2);
    CHECK(probs[0].inputs.empty());        // spikes at either edge excluded
    REQUIRE(probs[1].inputs.size() == 1);  // only the interior 1.5 remains
    CHECK(probs[1].inputs[0].time == 1.5);
}

TEST_CASE("ISI count partition: each neuron with n spikes yields n-1 problems") {
    Rng rng(77);
    Recording rec;
    rec.neuron_count = 4;
    rec.duration = 50.0;
    rec.trains.resize(4);
    for (int i = 0; i < 4; ++i) {
        double t = rng.uniform(0.0, 1.0);
        while (t < rec.duration) {
            rec.trains[i].push_back(t);
            t += rng.uniform(0.1, 2.0);
        }
    }
    auto p = ModelParams::uniform(4, 1.0, 0.5, 1.0, 0.0, 1.0);
    int total = 0;
    for (int i = 0; i < 4; ++i) total += static_cast<int>(build_isi_problems(rec, p, i).size());
    CHECK(total == rec.total_spikes() - 4);
    for (int i = 0; i < 4; ++i)
        for (const auto& pr : build_isi_problems(rec, p, i)) CHECK_NOTHROW(pr.validate());
}

TEST_CASE("fewer than 2 spikes yields no problems") {
    Recording rec;
    rec.neuron_count = 1;
    rec.duration = 1.0;
    rec.trains = {{0.4}};
    auto p = ModelParams::uniform(1, 1.0, 0.0, 1.0, 0.0, 1.0);
    CHECK(build_isi_problems(rec, p, 0).empty());
}

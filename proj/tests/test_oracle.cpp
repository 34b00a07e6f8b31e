#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lifnet/oracle.hpp"

using namespace lifnet;
using namespace testing_helpers;

TEST_CASE("grid path: no-input leakless line") {
    auto p = unit_params(0.0, 0.0);
    auto pr = single_isi(2.0, {});
    auto gp = grid_optimal_path(pr, p, 801);
    REQUIRE(gp.converged);
    for (std::size_t k = 0; k < gp.times.size(); k += 100)
        CHECK(gp.potentials[k] == doctest::Approx(gp.times[k] / 2.0).epsilon(1e-4));
    // objective matches the straight-line action -(C V_th)^2 / (2 T)
    CHECK(gp.objective == doctest::Approx(-0.25).epsilon(1e-3));
}

TEST_CASE("grid path reproduces the strong-positive pinned tail") {
    auto p = unit_params(0.0, 0.0);
    auto pr = single_isi(1.0, {{0.5, 1.2}});
    auto gp = grid_optimal_path(pr, p, 1001);
    REQUIRE(gp.converged);
    // after the input the potential rides the threshold
    for (std::size_t k = 0; k < gp.times.size(); ++k)
        if (gp.times[k] > 0.55 && gp.times[k] < 0.99)
            CHECK(gp.potentials[k] == doctest::Approx(1.0).epsilon(1e-3));
    const double expect = -(1.0 - 1.2) * (1.0 - 1.2) / (2.0 * 0.5);
    CHECK(gp.objective == doctest::Approx(expect).epsilon(2e-2));
}

TEST_CASE("grid objective approaches the solver objective under refinement") {
    Rng rng(41);
    const int coarse = 1001, fine = 2001;  // nested, inputs snapped to coarse
    for (double g : {0.0, 0.7}) {
        auto p = unit_params(g, 1.0);
        auto pr = random_isi(rng, 1.6, 4, 0.5);
        const double h = pr.length() / (coarse - 1);
        for (auto& in : pr.inputs)
            in.time = std::max(h, std::round(in.time / h) * h);
        for (std::size_t k = 1; k < pr.inputs.size(); ++k)
            if (pr.inputs[k].time <= pr.inputs[k - 1].time)
                pr.inputs[k].time = pr.inputs[k - 1].time + h;
        while (!pr.inputs.empty() && pr.inputs.back().time >= pr.t_end - h / 2)
            pr.inputs.pop_back();
        OptimalPath fast;
        try {
            fast = solve_isi(pr, p, ThresholdFn::constant(1.0));
        } catch (const infeasible_isi&) {
            continue;
        }
        auto c1 = grid_optimal_path(pr, p, coarse);
        auto c2 = grid_optimal_path(pr, p, fine);
        REQUIRE(c1.converged);
        REQUIRE(c2.converged);
        const double d1 = std::fabs(c1.objective - fast.log_weight);
        const double d2 = std::fabs(c2.objective - fast.log_weight);
        CHECK(d2 <= 0.8 * d1 + 1e-9);
        CHECK(d2 <= 1e-2 * std::max(1.0, std::fabs(fast.log_weight)));
    }
}

TEST_CASE("grid path objective never increases under nested refinement") {
    auto p = unit_params(0.6, 1.1);
    // inputs on the coarsest grid so every level sees the same problem
    auto pr = single_isi(2.0, {{90.0 / 128.0, -0.4}, {166.0 / 128.0, 0.3}});
    double prev = -kInf;
    for (int nodes : {257, 513, 1025}) {
        auto gp = grid_optimal_path(pr, p, nodes);
        REQUIRE(gp.converged);
        if (prev != -kInf) CHECK(gp.objective >= prev - 2e-5 * std::fabs(prev));
        prev = gp.objective;
    }
}

TEST_CASE("mc_survival endpoints") {
    OuSpec s;
    s.conductance = 1.0;
    s.capacitance = 1.0;
    s.noise_std = 0.2;
    s.current = 0.8;
    s.threshold = 1.0;
    auto low = mc_survival(0.01, 0.1, s, 4000, 3);
    CHECK(low.value > 0.995);
    auto at = mc_survival(0.5, 1.0, s, 4000, 3);
    CHECK(at.value == 0.0);
}

TEST_CASE("oracles are seed deterministic") {
    OuSpec s;
    s.conductance = 1.0;
    s.capacitance = 1.0;
    s.noise_std = 0.2;
    s.current = 0.8;
    s.threshold = 1.0;
    auto a = mc_survival(1.0, 0.4, s, 2000, 7);
    auto b = mc_survival(1.0, 0.4, s, 2000, 7);
    CHECK(a.value == b.value);
    auto params = ModelParams::uniform(1, 1.0, 1.0, 1.0, 0.3, 0.0);
    auto v1 = mc_bridge_variance(1.0, params, 2000, 9);
    auto v2 = mc_bridge_variance(1.0, params, 2000, 9);
    CHECK(v1.value == v2.value);
}

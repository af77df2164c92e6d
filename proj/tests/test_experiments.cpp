#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <vector>

#include "doctest.h"

#include "choquard/experiments.hpp"
#include "choquard/functionals.hpp"
#include "choquard/util.hpp"

using namespace chq;
using doctest::Approx;

TEST_SUITE("experiments") {

TEST_CASE("parallel_for visits every index once") {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    setenv("CHOQUARD_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    unsetenv("CHOQUARD_THREADS");
    CHECK(worker_count() >= 1);
}

TEST_CASE("log spacing and line fits") {
    const auto v = log_spaced(1e-3, 1e-1, 5);
    CHECK(v.size() == 5);
    CHECK(v.front() == 1e-3);
    CHECK(v.back() == 1e-1);
    CHECK(v[2] == Approx(1e-2));
    const LinearFit f = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
    CHECK(f.slope == Approx(2.0));
    CHECK(f.intercept == Approx(1.0));
    CHECK_THROWS_AS(fit_line({1.0}, {1.0}), InvalidInput);
}

TEST_CASE("dilation matching recovers the scale") {
    const GridPtr g = RadialGrid::build(3, 1024, 20.0, 2.0);
    auto field = [](const GridPtr& grid, double w) {
        return sample(grid, [w](double r) { return std::pow(w, -1.5) * std::exp(-r * r / (w * w)); });
    };
    const RadialField ut = field(g, 1.0), vt = field(g, 1.3);
    SUBCASE("aligned grids") {
        // u = s * ut exactly represented on the grid scaled by e^{-s}
        const double s = -0.8;
        const GridPtr gs = g->scaled(std::exp(-s));
        RadialField u{gs, ut.values, std::nullopt}, v{gs, vt.values, std::nullopt};
        for (double& x : u.values) x *= std::exp(1.5 * s);
        for (double& x : v.values) x *= std::exp(1.5 * s);
        const auto [fit, d] = match_dilation(u, v, ut, vt, s + 1e-4);
        CHECK(fit == Approx(s).epsilon(1e-6));
        CHECK(d < 1e-6);
    }
    SUBCASE("interpolated") {
        const GridPtr other = RadialGrid::build(3, 700, 30.0, 2.0);
        const RadialField u = field(other, std::exp(0.5)), v = field(other, 1.3 * std::exp(0.5));
        // wider by e^{0.5} means u = (-0.5) * ut
        const auto [fit, d] = match_dilation(u, v, ut, vt, -0.3);
        CHECK(fit == Approx(-0.5).epsilon(1e-4));
        CHECK(d < 1e-4);
    }
}

TEST_CASE("bubble profile fit recovers an exact bubble") {
    const GridPtr g = RadialGrid::build(4, 1024, 200.0, 3.0);
    const BubbleFields b = bubble(g, 2.0, 0.05, 50.0);
    const ProfileFit pf = fit_bubble_profile(b.U_tilde, 2.0);
    CHECK(pf.misfit < 1e-6);
    // the half-radius of |U_eps|^{2N/(N-2)} is eps for N = 4
    CHECK(pf.r == Approx(0.05).epsilon(1e-3));
    CHECK(pf.eps == Approx(1.0).epsilon(1e-3));
    RadialField half = b.U_tilde;
    for (double& x : half.values) x *= 0.5;
    CHECK(fit_bubble_profile(half, 2.0).misfit > 0.4);
}

TEST_CASE("subcritical asymptotics: exact self-similar rates") {
    AsymptoticsSpec s;
    s.base = {3, 1.0, 2.0, 2.0, 0.1, 1.0, 1.0};
    s.nu_values = log_spaced(1e-3, 1e-1, 5);
    s.grid = {512, 20.0, 2.0};
    const AsymptoticsReport r = fit_asymptotics(s);
    REQUIRE(r.fitted);
    CHECK(r.predicted == Approx(1.0));
    CHECK(r.slope_scale == Approx(1.0).epsilon(1e-6));
    CHECK(r.slope_alpha == Approx(2.0).epsilon(1e-6));
    CHECK(r.slope_lambda == Approx(2.0).epsilon(1e-6));
    // the critical terms are below 1e-8 relative here, so the distance sits at the solver floor
    CHECK(r.at_floor);
    CHECK(r.m_tilde == Approx(-0.108513).epsilon(1e-3));
}

TEST_CASE("supercritical asymptotics: distance to the limit state decreases") {
    AsymptoticsSpec s;
    s.base = {4, 2.0, 2.6, 2.6, 10.0, 1.0, 1.0};
    s.nu_values = {30.0, 100.0, 300.0, 1000.0};
    s.grid = {512, 20.0, 2.0};
    s.solve.tol_grad = 1e-9;
    const AsymptoticsReport r = fit_asymptotics(s);
    REQUIRE(r.fitted);
    CHECK(r.predicted == Approx(-5.0 / 12.0));
    CHECK(r.slope_scale == Approx(r.predicted).epsilon(0.01));
    CHECK(r.slope_alpha == Approx(2.0 * r.predicted).epsilon(0.01));
    CHECK(r.distance_decreasing);
    CHECK_FALSE(r.at_floor);
    CHECK(r.m_tilde > 0.0);
}

TEST_CASE("asymptotics refuse the critical class and too few points") {
    AsymptoticsSpec s;
    s.base = {4, 2.0, 1.8, 2.2, 0.1, 1.0, 1.0};
    s.nu_values = {0.1, 0.01};
    s.grid = {256, 20.0, 2.0};
    CHECK_THROWS_AS(fit_asymptotics(s), InvalidInput);
    s.base = {3, 1.0, 2.0, 2.0, 0.1, 1.0, 1.0};
    const AsymptoticsReport r = fit_asymptotics(s);
    CHECK_FALSE(r.fitted);
    CHECK(r.refusal.find("fewer than 4") != std::string::npos);
}

TEST_CASE("nonexistence probe stays above the bubble level") {
    NonexistenceSpec s;
    s.base = {4, 2.0, 2.3, 2.3, 0.0, 1.0, 1.0};
    s.random_pairs = 20;
    s.grid = {1024, 200.0, 3.0};
    const NonexistenceReport r = probe_nonexistence(s);
    CHECK(r.all_above);
    CHECK(r.bubbles_decreasing);
    for (const auto& c : r.cases) CHECK(c.inf_found >= r.bubble_level * (1.0 - 1e-6));
    s.nu_values = {0.5};
    CHECK_THROWS_AS(probe_nonexistence(s), InvalidInput);
}

TEST_CASE("projected energy is invariant along the fiber") {
    const GridPtr g = RadialGrid::build(4, 512, 30.0, 2.0);
    const RieszKernel K = RieszKernel::build(g, 2.0, 1.0);
    const ProblemParams P{4, 2.0, 2.3, 2.3, -0.5, 1.0, 1.0};
    const RadialField u = sample(g, [](double r) { return std::exp(-r * r); });
    const RadialField v = sample(g, [](double r) { return std::exp(-r * r / 4.0); });
    const double j0 = jbar_projected(P, K, u.values, v.values);
    const double t = 0.4, amp = std::exp(2.0 * t);
    std::vector<double> ut = u.values, vt = v.values;
    for (double& x : ut) x *= amp;
    for (double& x : vt) x *= amp;
    CHECK(jbar_projected(P, K.rescaled(std::exp(-t)), ut, vt) == Approx(j0).epsilon(1e-11));
}

TEST_CASE("command dispatch reports errors as JSON") {
    CommandResult r = run_command("bogus", nlohmann::json::object());
    CHECK(r.exit_code == 1);
    CHECK(r.output.at("error").get<std::string>().find("unknown command") != std::string::npos);

    r = run_command("solve", nlohmann::json{{"N", 3}, {"p", 2.0}, {"q", 2.0}, {"nu", 0.1}, {"a", 1.0}, {"b", 1.0}});
    CHECK(r.exit_code == 1);
    CHECK(r.output.at("error").get<std::string>().find("mu") != std::string::npos);

    r = run_command("solve", nlohmann::json{{"N", 3}, {"mu", 1.0}, {"p", 2.0}, {"q", 6.0}, {"nu", 0.1}, {"a", 1.0}, {"b", 1.0}});
    CHECK(r.exit_code == 1);
    CHECK(r.output.at("error").get<std::string>().find("upper bound q") != std::string::npos);

    const auto bad_dir = std::filesystem::temp_directory_path() / "choquard_not_a_dir";
    write_text_file(bad_dir.string(), "x");
    r = run_command("solve", nlohmann::json{{"N", 3}, {"mu", 1.0}, {"p", 2.0}, {"q", 2.0}, {"nu", 0.2}, {"a", 1.0},
                                            {"b", 1.0}, {"grid", {{"M", 256}}},
                                            {"outputs", {{"record", (bad_dir / "r.json").string()}}}});
    CHECK(r.exit_code == 1);
    CHECK(r.output.at("kind") == "io");
    std::filesystem::remove(bad_dir);
}

TEST_CASE("solve records are deterministic") {
    const nlohmann::json cfg{{"N", 3}, {"mu", 1.0}, {"p", 2.0}, {"q", 2.0}, {"nu", 0.2}, {"a", 1.0}, {"b", 1.0},
                             {"grid", {{"M", 256}}}, {"solve", {{"seed", 5}}}};
    const CommandResult a = run_command("solve", cfg), b = run_command("solve", cfg);
    REQUIRE(a.exit_code == 0);
    CHECK(a.output.dump(2) == b.output.dump(2));
    CHECK(a.output.at("result").at("J").get<double>() < 0.0);
    CHECK(parse_record(a.output.dump(2) + "\n").hash == a.output.at("hash").get<std::string>());
}

}

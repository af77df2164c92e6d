#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"

#include "choquard/ground_state.hpp"
#include "choquard/params.hpp"

using namespace chq;
using doctest::Approx;

namespace {

const ProblemParams kSub{3, 1.0, 2.0, 2.0, 0.2, 1.0, 1.0};

struct Setup {
    GridPtr g = RadialGrid::build(3, 512, 20.0, 2.0);
    RieszKernel K = RieszKernel::build(g, 1.0, 1.0);
};

const Setup& setup() {
    static const Setup s;
    return s;
}

const SolveReport& subcritical_solution() {
    static const SolveReport r = solve_ground_state(kSub, setup().K, SolveConfig{});
    return r;
}

double wdot(const RadialGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int i = 0; i < g.M(); ++i) s += g.weights()[i] * a[i] * b[i];
    return s;
}

}  // namespace

TEST_SUITE("ground_state") {

TEST_CASE("tangent projection is W-orthogonal and idempotent") {
    const GridPtr g = setup().g;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> Z;
    std::vector<double> u(g->M()), v(g->M()), gu(g->M()), gv(g->M());
    for (int i = 0; i < g->M(); ++i) {
        const double r = g->nodes()[i];
        u[i] = std::exp(-r * r);
        v[i] = std::exp(-r);
        gu[i] = Z(rng) * std::exp(-0.1 * r);
        gv[i] = Z(rng) * std::exp(-0.1 * r);
    }
    const auto [pu, pv] = project_tangent(*g, u, v, gu, gv);
    CHECK(std::abs(wdot(*g, pu, u)) < 1e-12 * std::sqrt(wdot(*g, pu, pu) * wdot(*g, u, u)));
    CHECK(std::abs(wdot(*g, pv, v)) < 1e-12 * std::sqrt(wdot(*g, pv, pv) * wdot(*g, v, v)));
    const auto [qu, qv] = project_tangent(*g, u, v, pu, pv);
    for (int i = 0; i < g->M(); i += 17) {
        CHECK(qu[i] == Approx(pu[i]).epsilon(1e-12).scale(1e-12));
        CHECK(qv[i] == Approx(pv[i]).epsilon(1e-12).scale(1e-12));
    }
    std::vector<double> zero(g->M(), 0.0);
    CHECK_THROWS_AS(project_tangent(*g, zero, v, gu, gv), InvalidInput);
}

TEST_CASE("subcritical ground state invariants") {
    const SolveReport& r = subcritical_solution();
    REQUIRE(r.converged);
    CHECK(r.J < 0.0);
    CHECK(r.lambda1 > 0.0);
    CHECK(r.lambda2 > 0.0);
    CHECK(r.pohozaev_residual <= 1e-6);
    CHECK(r.res1 <= 1e-4);
    CHECK(r.res2 <= 1e-4);
    CHECK(r.branch == Branch::plus);
    CHECK(r.psi_curvature > 0.0);
    CHECK(mass_of(*r.u.grid, r.u.values) == Approx(1.0).epsilon(1e-10));
    CHECK(mass_of(*r.v.grid, r.v.values) == Approx(1.0).epsilon(1e-10));
    for (std::size_t i = 0; i + 1 < r.u.values.size(); ++i) {
        REQUIRE(r.u.values[i] >= 0.0);
        REQUIRE(r.v.values[i] >= 0.0);
    }
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i) REQUIRE(r.trace[i].J <= r.trace[i - 1].J + 1e-14);
    // symmetric masses and exponents: both components coincide
    CHECK(r.lambda1 == Approx(r.lambda2).epsilon(1e-4));
}

TEST_CASE("runs are bitwise reproducible") {
    const SolveReport again = solve_ground_state(kSub, setup().K, SolveConfig{});
    CHECK(again.J == subcritical_solution().J);
    CHECK(again.u.values == subcritical_solution().u.values);
    CHECK(again.iterations == subcritical_solution().iterations);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run") {
    const auto path = (std::filesystem::temp_directory_path() / "choquard_resume_test.json").string();
    std::filesystem::remove(path);
    SolveConfig c;
    c.checkpoint_every = 7;
    c.checkpoint_path = path;
    const SolveReport full = solve_ground_state(kSub, setup().K, c);
    REQUIRE(std::filesystem::exists(path));
    SolveConfig resumed;
    resumed.resume_path = path;
    const SolveReport tail = solve_ground_state(kSub, setup().K, resumed);
    CHECK(tail.J == Approx(full.J).epsilon(1e-10));
    CHECK(tail.iterations == full.iterations);
    CHECK(tail.trace.size() == full.trace.size());

    ProblemParams other = kSub;
    other.nu = 0.3;
    CHECK_THROWS_AS(solve_ground_state(other, setup().K, resumed), InvalidInput);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(solve_ground_state(kSub, setup().K, resumed), IOError);
}

TEST_CASE("limit system: Pekar energy and the scaling identity") {
    // With u = v the limit functional is |grad u|^2 - D(u^2, u^2), whose minimum at unit mass is -0.108513
    const SolveReport lim = solve_limit_system(kSub, setup().K, SolveConfig{});
    REQUIRE(lim.converged);
    REQUIRE(lim.m_tilde);
    CHECK(*lim.m_tilde == Approx(-0.108513).epsilon(1e-4));
    // m~ = (g-2)/(2g) (D0 g)^{2/(2-g)}, g = 1 here
    const double g = 1.0;
    CHECK(*lim.m_tilde == Approx((g - 2.0) / (2.0 * g) * std::pow(*lim.D0 * g, 2.0 / (2.0 - g))).epsilon(1e-8));
    CHECK(lim.lambda1 > 0.0);
    CHECK(lim.pohozaev_residual <= 1e-6);
}

TEST_CASE("configuration validation") {
    SolveConfig c;
    c.init = "spiral";
    CHECK_THROWS_AS(validate(c), InvalidInput);
    c.init = "bubble";
    c.checkpoint_every = 5;
    CHECK_THROWS_AS(validate(c), InvalidInput);
    ProblemParams zero = kSub;
    zero.nu = 0.0;
    CHECK_THROWS_AS(solve_ground_state(zero, setup().K, SolveConfig{}), InvalidInput);
    const GridPtr other = RadialGrid::build(3, 256, 20.0, 2.0);
    InitialFields wrong{std::vector<double>(256, 1.0), std::vector<double>(256, 1.0)};
    CHECK_THROWS_AS(solve_ground_state(kSub, setup().K, SolveConfig{}, wrong), InvalidInput);
}

TEST_CASE("initial fields depend only on the seed") {
    SolveConfig a, b;
    a.seed = b.seed = 42;
    const InitialFields fa = initial_fields(*setup().g, kSub, a), fb = initial_fields(*setup().g, kSub, b);
    CHECK(fa.u == fb.u);
    b.seed = 43;
    CHECK(initial_fields(*setup().g, kSub, b).u != fa.u);
}

}

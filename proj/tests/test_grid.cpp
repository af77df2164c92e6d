#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "choquard/params.hpp"
#include "choquard/radial_grid.hpp"

using namespace chq;
using doctest::Approx;

namespace {

RadialField gaussian(const GridPtr& g, double width = 1.0) {
    return sample(g, [&](double r) { return std::exp(-r * r / (width * width)); });
}

}  // namespace

TEST_SUITE("radial_grid") {

TEST_CASE("nodes are graded and end at R_max") {
    const GridPtr g = RadialGrid::build(3, 256, 10.0, 2.0);
    const auto& r = g->nodes();
    CHECK(r.front() == Approx(10.0 / (256.0 * 256.0)));
    CHECK(r.back() == 10.0);
    for (std::size_t i = 1; i < r.size(); ++i) REQUIRE(r[i] > r[i - 1]);
    const GridPtr h = g->scaled(0.5);
    CHECK(h->nodes()[17] == Approx(0.5 * r[17]).epsilon(1e-14));
    CHECK(g->same_shape(*RadialGrid::build(3, 256, 10.0, 2.0)));
    CHECK_FALSE(g->same_shape(*h));
    CHECK_THROWS_AS(RadialGrid::build(3, 16, 10.0, 2.0), InvalidInput);
    CHECK_THROWS_AS(RadialGrid::build(3, 256, 10.0, 0.5), InvalidInput);
}

TEST_CASE("Gaussian moments integrate to closed forms") {
    for (int N : {3, 4}) {
        const GridPtr g = RadialGrid::build(N, 2048, 12.0, 2.0);
        const RadialField f = gaussian(g);
        CHECK(integrate(f) == Approx(std::pow(M_PI, 0.5 * N)).epsilon(1e-8));
        CHECK(mass_of(*g, f.values) == Approx(std::pow(M_PI / 2.0, 0.5 * N)).epsilon(1e-8));
        // |grad e^{-r^2}|_2^2 = N (pi/2)^{N/2}; P1 stiffness is second order
        CHECK(kinetic_of(*g, f.values) == Approx(N * std::pow(M_PI / 2.0, 0.5 * N)).epsilon(1e-5));
        CHECK(std::pow(lp_norm(*g, f.values, 3.0), 3.0) == Approx(std::pow(M_PI / 3.0, 0.5 * N)).epsilon(1e-8));
    }
}

TEST_CASE("kinetic quadrature converges at second order") {
    double prev_err = 0.0;
    for (int M : {256, 512, 1024}) {
        const GridPtr g = RadialGrid::build(3, M, 12.0, 2.0);
        const double err = std::abs(kinetic_of(*g, gaussian(g).values) / (3.0 * std::pow(M_PI / 2.0, 1.5)) - 1.0);
        if (prev_err > 0.0) CHECK(prev_err / err > 3.5);
        prev_err = err;
    }
}

TEST_CASE("stiffness matrix reproduces the kinetic form") {
    const GridPtr g = RadialGrid::build(3, 300, 8.0, 2.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> u(g->M()), Lu;
    for (double& x : u) x = U(rng);
    apply_stiffness(*g, u, Lu);
    double uLu = 0.0;
    for (int i = 0; i < g->M(); ++i) uLu += u[i] * Lu[i];
    CHECK(g->surface() * uLu == Approx(kinetic_of(*g, u)).epsilon(1e-12));
}

TEST_CASE("three-point Laplacian of a Gaussian") {
    const GridPtr g = RadialGrid::build(3, 2048, 10.0, 2.0);
    const RadialField f = gaussian(g);
    const std::vector<double> lap = radial_laplacian(*g, f.values);
    double worst = 0.0;
    for (int i = 0; i + 1 < g->M(); ++i) {
        const double r = g->nodes()[i];
        worst = std::max(worst, std::abs(lap[i] - (4.0 * r * r - 6.0) * std::exp(-r * r)));
    }
    CHECK(worst < 1e-4);
    CHECK(std::isnan(lap.back()));
    CHECK(lap.front() == Approx(-6.0).epsilon(1e-4));
}

TEST_CASE("dilation preserves mass and matches the analytic rescaling") {
    const GridPtr g = RadialGrid::build(3, 2048, 20.0, 2.0);
    const RadialField f = gaussian(g);
    for (double s : {-0.7, 0.4}) {
        const DilateResult d = dilate(f, s);
        CHECK_FALSE(d.flagged);
        CHECK(mass_of(*g, d.field.values) == Approx(mass_of(*g, f.values)).epsilon(1e-6));
        CHECK(kinetic_of(*g, d.field.values) == Approx(std::exp(2.0 * s) * kinetic_of(*g, f.values)).epsilon(1e-4));
        const double amp = std::exp(1.5 * s), lam = std::exp(s);
        double worst = 0.0;
        for (int i = 0; i < g->M(); ++i) {
            const double r = g->nodes()[i];
            worst = std::max(worst, std::abs(d.field.values[i] - amp * std::exp(-lam * lam * r * r)));
        }
        CHECK(worst < 1e-6);
    }
    // pushing most of the mass past R_max is flagged
    CHECK(dilate(f, -3.0).flagged);
}

TEST_CASE("dilation generator is the derivative of the dilation") {
    const GridPtr g = RadialGrid::build(4, 2048, 20.0, 2.0);
    const RadialField f = gaussian(g, 1.5);
    const std::vector<double> z = dilation_generator(*g, f.values);
    const double h = 1e-4;
    const auto up = dilate(f, h).field.values, dn = dilate(f, -h).field.values;
    double worst = 0.0;
    for (int i = 0; i + 1 < g->M(); ++i) worst = std::max(worst, std::abs(z[i] - (up[i] - dn[i]) / (2.0 * h)));
    CHECK(worst < 1e-4);
    // exact for the Gaussian: z = (N/2 - 2 r^2 / w^2) f
    const double r = g->nodes()[1000];
    CHECK(z[1000] == Approx((2.0 - 2.0 * r * r / 2.25) * f.values[1000]).epsilon(1e-5));
}

TEST_CASE("monotone interpolant") {
    const GridPtr g = RadialGrid::build(3, 128, 5.0, 2.0);
    const RadialField f = gaussian(g);
    const MonotoneInterpolant I(*g, f.values);
    CHECK(I(g->nodes()[40]) == Approx(f.values[40]));
    CHECK(I(0.0) == Approx(f.values[0]));
    CHECK(I(6.0) == 0.0);
    double prev = I(0.01);
    for (double r = 0.02; r < 5.0; r += 0.01) {
        const double x = I(r);
        REQUIRE(x <= prev + 1e-15);
        prev = x;
    }
}

TEST_CASE("symmetric decreasing rearrangement") {
    const GridPtr g = RadialGrid::build(3, 512, 10.0, 2.0);
    const RadialField bump = sample(g, [](double r) { return std::exp(-(r - 3.0) * (r - 3.0)); });
    const RadialField star = rearrange_decreasing(bump);
    for (int i = 1; i < g->M(); ++i) REQUIRE(star.values[i] <= star.values[i - 1] + 1e-14);
    CHECK(mass_of(*g, star.values) == Approx(mass_of(*g, bump.values)).epsilon(1e-10));
    // Polya-Szego
    CHECK(kinetic_of(*g, star.values) < kinetic_of(*g, bump.values));
    const RadialField again = rearrange_decreasing(gaussian(g));
    CHECK(again.values[100] == Approx(gaussian(g).values[100]).epsilon(1e-3));
}

TEST_CASE("algebraic tails are added to integrals") {
    const GridPtr g = RadialGrid::build(3, 1024, 10.0, 2.0);
    // (1 + r^2)^{-2}: int over R^3 = pi^2
    RadialField f = sample(g, [](double r) { return 1.0 / ((1.0 + r * r) * (1.0 + r * r)); });
    const double without = integrate(f);
    f.tail_exponent = 4.0;
    CHECK(std::abs(integrate(f) - M_PI * M_PI) < 0.1 * std::abs(without - M_PI * M_PI));
    CHECK(integrate(f) == Approx(M_PI * M_PI).epsilon(3e-3));
}

}

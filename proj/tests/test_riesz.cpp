#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"

#include "choquard/functionals.hpp"
#include "choquard/params.hpp"
#include "choquard/riesz.hpp"

using namespace chq;
using doctest::Approx;

namespace {

// Relative L2 residual of -Delta(I * f) - f over interior nodes, Newtonian kernel with its normalization.
double newton_residual(int N, int M) {
    const GridPtr g = RadialGrid::build(N, M, 12.0, 2.0);
    const RieszKernel K = RieszKernel::build(g, N - 2.0, riesz_normalization(N, N - 2.0));
    const RadialField f = sample(g, [](double r) { return std::exp(-r * r); });
    const RadialField pot = apply_riesz(K, f);
    const std::vector<double> lap = radial_laplacian(*g, pot.values);
    double num = 0.0, den = 0.0;
    for (int i = 1; i + 1 < M; ++i) {
        const double d = -lap[i] - f.values[i];
        num += g->weights()[i] * d * d;
        den += g->weights()[i] * f.values[i] * f.values[i];
    }
    return std::sqrt(num / den);
}

std::vector<double> random_positive(std::mt19937_64& rng, const RadialGrid& g) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double w = 0.3 + 3.0 * U(rng), c = 2.0 * U(rng), a = 0.2 + U(rng);
    std::vector<double> f(g.M());
    for (int i = 0; i < g.M(); ++i) {
        const double r = g.nodes()[i];
        f[i] = std::exp(-(r - c) * (r - c) / (w * w)) + a * std::exp(-r * r);
    }
    return f;
}

}  // namespace

TEST_SUITE("riesz") {

TEST_CASE("spherical mean of the kernel in three dimensions") {
    // mean over S^2 of |r e1 - s w|^{-mu} = ((r+s)^{2-mu} - |r-s|^{2-mu}) / (2 r s (2-mu))
    for (double mu : {0.5, 1.0, 1.7}) {
        for (auto [r, s] : {std::pair{0.3, 1.1}, std::pair{2.0, 0.7}, std::pair{5.0, 4.9}}) {
            const double expected =
                (std::pow(r + s, 2.0 - mu) - std::pow(std::abs(r - s), 2.0 - mu)) / (2.0 * r * s * (2.0 - mu));
            CHECK(angular_mean(3, mu, r, s) == Approx(expected).epsilon(1e-10));
        }
    }
    // Newtonian case in N=4: max(r, s)^{-2}
    CHECK(angular_mean(4, 2.0, 0.5, 2.0) == Approx(0.25).epsilon(1e-12));
    CHECK(angular_mean(4, 2.0, 3.0, 1.0) == Approx(1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("Coulomb potential of a Gaussian") {
    // |x|^{-1} * e^{-|x|^2} = pi^{3/2} erf(r) / r
    const GridPtr g = RadialGrid::build(3, 1024, 12.0, 2.0);
    const RieszKernel K = RieszKernel::build(g, 1.0, 1.0);
    const RadialField f = sample(g, [](double r) { return std::exp(-r * r); });
    const RadialField pot = apply_riesz(K, f);
    double worst = 0.0;
    for (int i = 0; i < g->M(); i += 7) {
        const double r = g->nodes()[i];
        const double exact = std::pow(M_PI, 1.5) * std::erf(r) / r;
        worst = std::max(worst, std::abs(pot.values[i] / exact - 1.0));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("potential at the origin for general mu") {
    // int e^{-|y|^2} |y|^{-mu} dy = |S^{N-1}| Gamma((N-mu)/2) / 2
    for (auto [N, mu] : {std::pair{3, 0.7}, std::pair{3, 2.2}, std::pair{4, 2.0}, std::pair{4, 3.1}}) {
        const GridPtr g = RadialGrid::build(N, N == 3 ? 1024 : 256, 12.0, 2.0);
        const RieszKernel K = RieszKernel::build(g, mu, 1.0);
        const RadialField pot = apply_riesz(K, sample(g, [](double r) { return std::exp(-r * r); }));
        const double exact = sphere_area(N) * std::tgamma(0.5 * (N - mu)) / 2.0;
        CHECK(pot.values[0] == Approx(exact).epsilon(2e-3));
    }
}

TEST_CASE("Newtonian identity converges under mesh doubling") {
    for (int N : {3, 4}) {
        const double coarse = newton_residual(N, 1024);
        const double fine = newton_residual(N, 2048);
        CHECK(fine < 1e-3);
        CHECK(coarse / fine >= 2.0);
    }
}

TEST_CASE("weighted symmetry of the kernel") {
    for (auto [N, mu] : {std::pair{3, 1.0}, std::pair{4, 2.0}, std::pair{3, 2.5}}) {
        const GridPtr g = RadialGrid::build(N, 256, 15.0, 2.0);
        const RieszKernel K = RieszKernel::build(g, mu, 1.0);
        const auto& w = g->weights();
        double worst = 0.0;
        for (int i = 0; i < K.size(); ++i)
            for (int j = 0; j < i; ++j) {
                const double a = w[i] * K.entry(i, j), b = w[j] * K.entry(j, i);
                worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
            }
        CHECK(worst < 1e-12);

        std::mt19937_64 rng(11);
        double pair_worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const auto f = random_positive(rng, *g), h = random_positive(rng, *g);
            const double a = pair_values(K, f, h), b = pair_values(K, h, f);
            pair_worst = std::max(pair_worst, std::abs(a - b) / std::abs(a));
        }
        CHECK(pair_worst < 1e-12);
    }
}

TEST_CASE("rescaled kernel equals the kernel built on the scaled grid") {
    const GridPtr g = RadialGrid::build(3, 200, 10.0, 2.0);
    const RieszKernel K = RieszKernel::build(g, 1.3, 1.0);
    const RieszKernel Kr = K.rescaled(0.37);
    const RieszKernel Kb = RieszKernel::build(g->scaled(0.37), 1.3, 1.0);
    for (int i = 0; i < K.size(); i += 13)
        for (int j = 0; j < K.size(); j += 11) CHECK(Kr.entry(i, j) == Approx(Kb.entry(i, j)).epsilon(1e-12));
    CHECK(Kr.grid()->R_max() == Approx(3.7));
}

TEST_CASE("HLS inequality on random fields and near-equality at the bubble") {
    const GridPtr g = RadialGrid::build(3, 1024, 400.0, 3.0);
    const double mu = 1.0;
    const RieszKernel K = RieszKernel::build(g, mu, 1.0);
    const double C = hls_constant(3, mu);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const RadialField f{g, random_positive(rng, *g), std::nullopt};
        const RadialField h{g, random_positive(rng, *g), std::nullopt};
        const HLSReport rep = verify_hls(K, f, h, C);
        REQUIRE(rep.within_bound);
        REQUIRE(rep.ratio < 1.0);
    }
    const BubbleFields b = bubble(g, mu, 1.0, 100.0);
    RadialField ext = b.U_tilde;
    for (double& x : ext.values) x = std::pow(x, upper_critical(3, mu));
    CHECK(verify_hls(K, ext, ext, C).ratio == Approx(1.0).epsilon(0.02));
}

TEST_CASE("kernel cache round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "choquard_kernel_cache_test";
    std::filesystem::remove_all(dir);
    const GridPtr g = RadialGrid::build(3, 128, 10.0, 2.0);
    const RieszKernel built = RieszKernel::build_cached(g, 1.0, 1.0, dir.string());
    CHECK(std::filesystem::exists(dir));
    const RieszKernel loaded = RieszKernel::build_cached(g, 1.0, 1.0, dir.string());
    CHECK(loaded.raw_matrix() == built.raw_matrix());
    const GridPtr other = RadialGrid::build(3, 128, 11.0, 2.0);
    CHECK(RieszKernel::cache_key(*g, 1.0, 1.0) != RieszKernel::cache_key(*other, 1.0, 1.0));
    std::filesystem::remove_all(dir);
}

}

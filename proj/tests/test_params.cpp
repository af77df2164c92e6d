#include <cmath>
#include <string>

#include "doctest.h"

#include "choquard/params.hpp"

using namespace chq;
using doctest::Approx;

namespace {

std::string message_of(const ProblemParams& p) {
    try {
        validate(p);
    } catch (const InvalidInput& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("params") {

TEST_CASE("validation names the violated bound") {
    ProblemParams p{3, 1.0, 2.0, 2.0, 0.1, 1.0, 1.0};
    CHECK(message_of(p).empty());

    p.N = 2;
    CHECK(message_of(p).find("N must be an integer >= 3") != std::string::npos);
    p.N = 3;
    p.mu = 3.0;
    CHECK(message_of(p).find("0 < mu < N") != std::string::npos);
    p.mu = 1.0;
    p.p = 5.0 / 3.0;  // == 2_{mu,*}
    CHECK(message_of(p).find("lower bound p") != std::string::npos);
    p.p = 2.0;
    p.q = 5.0;  // == 2*_mu
    CHECK(message_of(p).find("upper bound q") != std::string::npos);
    p.q = 2.0;
    p.a = 0.0;
    CHECK(message_of(p).find("a must be > 0") != std::string::npos);
    p.a = 1.0;
    p.nu = NAN;
    CHECK(message_of(p).find("nu must be finite") != std::string::npos);
}

TEST_CASE("critical exponents and mass classes") {
    CHECK(upper_critical(3, 1.0) == Approx(5.0));
    CHECK(lower_critical(3, 1.0) == Approx(5.0 / 3.0));
    CHECK(upper_critical(4, 2.0) == Approx(3.0));

    ProblemParams sub{3, 1.0, 2.0, 2.0, 0.1, 1.0, 1.0};
    DerivedExponents d = derived_exponents(sub);
    CHECK(d.gamma_p == Approx(0.5));
    CHECK(d.gamma() == Approx(1.0));
    CHECK(d.mass_class == MassClass::subcritical);

    ProblemParams crit{4, 2.0, 1.8, 2.2, 0.1, 1.0, 1.0};
    CHECK(derived_exponents(crit).mass_class == MassClass::critical);

    ProblemParams sup{4, 2.0, 2.6, 2.6, 0.1, 1.0, 1.0};
    CHECK(derived_exponents(sup).mass_class == MassClass::supercritical);

    // gamma_p runs from 0 at the lower critical exponent to 2*_mu at the upper one
    CHECK(gamma_exponent(3, 1.0, lower_critical(3, 1.0)) == Approx(0.0).epsilon(1e-12));
    CHECK(gamma_exponent(4, 2.0, upper_critical(4, 2.0)) == Approx(upper_critical(4, 2.0)));
}

TEST_CASE("Riesz normalization against the Newtonian potential") {
    // -Delta of A |x|^{2-N} is the Dirac mass, so A = 1 / ((N-2) |S^{N-1}|)
    for (int N : {3, 4, 5}) {
        CHECK(riesz_normalization(N, N - 2.0) == Approx(1.0 / ((N - 2.0) * sphere_area(N))).epsilon(1e-13));
    }
    CHECK(sphere_area(3) == Approx(4.0 * M_PI));
    CHECK(sphere_area(4) == Approx(2.0 * M_PI * M_PI));
}

TEST_CASE("HLS constant reduces to the Coulomb value") {
    // Lieb's constant for N=3, mu=1 written out by hand
    const double expected = std::sqrt(M_PI) / std::tgamma(2.5) * std::pow(std::tgamma(1.5) / 2.0, -2.0 / 3.0);
    CHECK(hls_constant(3, 1.0) == Approx(expected).epsilon(1e-13));
}

TEST_CASE("sharp constant chain") {
    for (auto [N, mu] : {std::pair{3, 1.0}, std::pair{4, 2.0}, std::pair{3, 2.5}}) {
        const SharpConstants s = sharp_constants(N, mu);
        const double ts = upper_critical(N, mu);
        // Aubin-Talenti value
        const double S_exact = M_PI * N * (N - 2.0) * std::pow(std::tgamma(0.5 * N) / std::tgamma(double(N)), 2.0 / N);
        CHECK(s.S == Approx(S_exact).epsilon(1e-6));
        CHECK(s.S_HL * std::pow(hls_constant(N, mu), 1.0 / ts) == Approx(s.S).epsilon(1e-10));
        CHECK(s.bubble_level == Approx((ts - 1.0) / (2.0 * ts) * std::pow(s.S_HL, ts / (ts - 1.0))).epsilon(1e-12));
    }
}

TEST_CASE("thresholds") {
    ProblemParams sub{3, 1.0, 2.0, 2.0, 0.1, 1.0, 1.0};
    ConstantsTable c = base_constants(sub);
    c.C_Npq = 0.3;
    fill_thresholds(sub, c);
    REQUIRE(c.nu0);
    CHECK_FALSE(c.nu0_prime);
    // nu0 scales like 1 / C_Npq
    ConstantsTable c2 = c;
    c2.C_Npq = 0.6;
    fill_thresholds(sub, c2);
    CHECK(*c2.nu0 == Approx(*c.nu0 / 2.0));

    ProblemParams crit{4, 2.0, 1.8, 2.2, 0.1, 1.0, 1.0};
    ConstantsTable k = base_constants(crit);
    k.C_Npq = 0.25;
    fill_thresholds(crit, k);
    REQUIRE(k.nu0_prime);
    // 2 nu0' C_Npq (a^2 + b^2)^{(p+q-2)/2} = 1
    CHECK(2.0 * *k.nu0_prime * 0.25 * std::pow(2.0, 0.5 * (1.8 + 2.2 - 2.0)) == Approx(1.0));
    CHECK_THROWS_AS(threshold_nu0(crit, k), InvalidInput);
    CHECK(vector_gn_bound(0.5, 0.5) == Approx(0.5));
    CHECK(vector_gn_bound(2.0, 3.0) == Approx(6.0));
}

TEST_CASE("landscape below nu0: local minimum, mountain pass, two zeros") {
    ProblemParams sub{3, 1.0, 2.0, 2.0, 0.0, 1.0, 1.0};
    ConstantsTable c = base_constants(sub);
    c.C_Npq = 0.465858;
    fill_thresholds(sub, c);
    sub.nu = *c.nu0 / 4.0;
    const LandscapeReport L = landscape(sub, c);
    const DerivedExponents d = derived_exponents(sub);
    auto h = [&](double rho) { return landscape_h(L, d.gamma(), d.two_star_mu, rho); };
    CHECK(L.rho1 < L.R0);
    CHECK(L.R0 < L.rho2);
    CHECK(L.rho2 < L.R1);
    CHECK(L.h_min < 0.0);
    CHECK(L.h_max > 0.0);
    CHECK(std::abs(h(L.R0)) < 1e-9 * L.h_max);
    CHECK(std::abs(h(L.R1)) < 1e-9 * L.h_max);
    for (double rho : {L.rho1, L.rho2}) {
        const double e = 1e-5 * rho;
        CHECK(std::abs(h(rho + e) - h(rho - e)) / (2.0 * e) < 1e-6);
    }
    sub.nu = 1.01 * *c.nu0;
    CHECK_THROWS_AS(landscape(sub, c), NumericalError);
}

}

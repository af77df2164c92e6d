#include "choquard/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/constants/constants.hpp>
#include <boost/math/tools/roots.hpp>

#include "choquard/radial_grid.hpp"

namespace chq {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();
constexpr double kClassBand = 1e-12;

std::string fmt_num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

template <class F>
double bisect_root(F f, double lo, double hi) {
    boost::math::tools::eps_tolerance<double> tol(40);
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::bisect(f, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

// int_R^inf r^a (eps^2 + r^2)^{-b} dr by the binomial series in (eps/R)^2.
double algebraic_tail(double a, double b, double eps, double R) {
    double coeff = 1.0;
    double sum = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double expo = 2.0 * b + 2.0 * k - a - 1.0;
        const double term = coeff * std::pow(R, -expo) / expo;
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        coeff *= -(b + k) / (k + 1.0) * eps * eps;
    }
    return sum;
}

double bubble_quotient(int N, double eps, int M) {
    const double R = 50.0 * eps;
    auto grid = RadialGrid::build(N, M, R, 2.0);
    const double c = std::pow(N * (N - 2.0), 0.25 * (N - 2.0)) * std::pow(eps, 0.5 * (N - 2.0));
    const double two_star = 2.0 * N / (N - 2.0);
    double kin = 0.0;
    double crit = 0.0;
    const auto& r = grid->nodes();
    const auto& w = grid->weights();
    for (int i = 0; i < M; ++i) {
        const double base = eps * eps + r[i] * r[i];
        const double du = -(N - 2.0) * c * r[i] * std::pow(base, -0.5 * N);
        const double u = c * std::pow(base, -0.5 * (N - 2.0));
        kin += w[i] * du * du;
        crit += w[i] * std::pow(u, two_star);
    }
    kin += (N - 2.0) * (N - 2.0) * c * c * algebraic_tail(N + 1.0, N, eps, R);
    crit += std::pow(c, two_star) * algebraic_tail(N - 1.0, N, eps, R);
    const double area = grid->surface();
    return area * kin / std::pow(area * crit, 2.0 / two_star);
}

}  // namespace

std::string_view to_string(MassClass c) {
    switch (c) {
        case MassClass::subcritical: return "subcritical";
        case MassClass::critical: return "critical";
        case MassClass::supercritical: return "supercritical";
    }
    return "unknown";
}

void validate_dimension_order(int N, double mu) {
    if (N < 3) throw InvalidInput("N must be an integer >= 3 (got " + std::to_string(N) + ")");
    if (!std::isfinite(mu) || !(mu > 0.0) || !(mu < N))
        throw InvalidInput("mu must satisfy 0 < mu < N (got mu=" + fmt_num(mu) + ")");
}

double upper_critical(int N, double mu) { return (2.0 * N - mu) / (N - 2.0); }
double lower_critical(int N, double mu) { return (2.0 * N - mu) / N; }
double gamma_exponent(int N, double mu, double p) { return 0.5 * (N * (p - 2.0) + mu); }

void validate(const ProblemParams& params) {
    validate_dimension_order(params.N, params.mu);
    const double lo = lower_critical(params.N, params.mu);
    const double hi = upper_critical(params.N, params.mu);
    auto check = [&](const char* name, double x) {
        if (!std::isfinite(x)) throw InvalidInput(std::string(name) + " must be finite");
        if (!(x > lo))
            throw InvalidInput(std::string(name) + "=" + fmt_num(x) + " violates lower bound " + name +
                               " > 2_{mu,*} = (2N-mu)/N = " + fmt_num(lo));
        if (!(x < hi))
            throw InvalidInput(std::string(name) + "=" + fmt_num(x) + " violates upper bound " + name +
                               " < 2*_mu = (2N-mu)/(N-2) = " + fmt_num(hi));
    };
    check("p", params.p);
    check("q", params.q);
    if (!std::isfinite(params.nu)) throw InvalidInput("nu must be finite");
    if (!(params.a > 0.0) || !std::isfinite(params.a)) throw InvalidInput("a must be > 0");
    if (!(params.b > 0.0) || !std::isfinite(params.b)) throw InvalidInput("b must be > 0");
}

DerivedExponents derived_exponents(const ProblemParams& params) {
    validate(params);
    DerivedExponents ex;
    ex.gamma_p = gamma_exponent(params.N, params.mu, params.p);
    ex.gamma_q = gamma_exponent(params.N, params.mu, params.q);
    ex.two_star_mu = upper_critical(params.N, params.mu);
    ex.two_lower = lower_critical(params.N, params.mu);
    const double d = ex.gamma() - 2.0;
    if (std::abs(d) <= kClassBand)
        ex.mass_class = MassClass::critical;
    else
        ex.mass_class = d < 0.0 ? MassClass::subcritical : MassClass::supercritical;
    return ex;
}

double sphere_area(int N) { return 2.0 * std::exp(0.5 * N * std::log(kPi) - std::lgamma(0.5 * N)); }

double riesz_normalization(int N, double mu) {
    validate_dimension_order(N, mu);
    const double lg = std::lgamma(0.5 * mu) - std::lgamma(0.5 * (N - mu)) - 0.5 * N * std::log(kPi) -
                      (N - mu) * std::log(2.0);
    return std::exp(lg);
}

double hls_constant(int N, double mu) {
    validate_dimension_order(N, mu);
    const double lg = 0.5 * mu * std::log(kPi) + std::lgamma(0.5 * (N - mu)) - std::lgamma(N - 0.5 * mu) +
                      (-1.0 + mu / N) * (std::lgamma(0.5 * N) - std::lgamma(static_cast<double>(N)));
    return std::exp(lg);
}

double bubble_level_from(double S_HL, double two_star) {
    return (two_star - 1.0) / (2.0 * two_star) * std::pow(S_HL, two_star / (two_star - 1.0));
}

SharpConstants sharp_constants(int N, double mu) {
    validate_dimension_order(N, mu);
    const double coarse = bubble_quotient(N, 1.0, 4096);
    const double fine = bubble_quotient(N, 1.0, 8192);
    SharpConstants out;
    out.S = fine + (fine - coarse) / 15.0;
    const double two_star = upper_critical(N, mu);
    out.S_HL = out.S * std::pow(hls_constant(N, mu), -1.0 / two_star);
    out.bubble_level = bubble_level_from(out.S_HL, two_star);
    return out;
}

double vector_gn_bound(double C_Np, double C_Nq) {
    const double product = C_Np * C_Nq;
    return std::max(product, std::sqrt(product));
}

ConstantsTable base_constants(const ProblemParams& params) {
    validate(params);
    ConstantsTable t;
    t.A_Nmu = riesz_normalization(params.N, params.mu);
    t.C_Nmu = hls_constant(params.N, params.mu);
    const SharpConstants sc = sharp_constants(params.N, params.mu);
    t.S = sc.S;
    t.S_HL = sc.S_HL;
    t.bubble_level = sc.bubble_level;
    return t;
}

double threshold_nu0(const ProblemParams& params, const ConstantsTable& c) {
    const DerivedExponents ex = derived_exponents(params);
    if (ex.mass_class != MassClass::subcritical)
        throw InvalidInput("nu0 is defined only for the subcritical mass class (got " +
                           std::string(to_string(ex.mass_class)) + ")");
    if (!c.C_Npq || !(*c.C_Npq > 0.0)) throw InvalidInput("nu0 requires a positive C_Npq");
    const double g = ex.gamma();
    const double ts = ex.two_star_mu;
    const double m2 = 2.0 * ts - 2.0;
    const double mass = params.a * params.a + params.b * params.b;
    const double num = std::pow(c.S_HL, (2.0 - g) * ts / m2) / *c.C_Npq * m2 * std::pow(2.0 - g, (2.0 - g) / m2);
    const double den = std::pow(2.0 * ts - g, (2.0 * ts - g) / m2) * std::pow(mass, 0.5 * (params.p + params.q - g));
    return num / den / g;
}

double threshold_nu0_prime(const ProblemParams& params, const ConstantsTable& c) {
    const DerivedExponents ex = derived_exponents(params);
    if (ex.mass_class != MassClass::critical)
        throw InvalidInput("nu0_prime is defined only for the critical mass class (got " +
                           std::string(to_string(ex.mass_class)) + ")");
    if (!c.C_Npq || !(*c.C_Npq > 0.0)) throw InvalidInput("nu0_prime requires a positive C_Npq");
    const double mass = params.a * params.a + params.b * params.b;
    return 0.5 * std::pow(mass, -0.5 * (params.p + params.q - 2.0)) / *c.C_Npq;
}

void fill_thresholds(const ProblemParams& params, ConstantsTable& c) {
    c.nu0.reset();
    c.nu0_prime.reset();
    if (!c.C_Npq) return;
    const DerivedExponents ex = derived_exponents(params);
    if (ex.mass_class == MassClass::subcritical) c.nu0 = threshold_nu0(params, c);
    if (ex.mass_class == MassClass::critical) c.nu0_prime = threshold_nu0_prime(params, c);
}

double landscape_h(const LandscapeReport& land, double gamma, double two_star, double rho) {
    return 0.5 * rho * rho - land.A * std::pow(rho, gamma) - land.B * std::pow(rho, 2.0 * two_star);
}

LandscapeReport landscape(const ProblemParams& params, const ConstantsTable& c) {
    const DerivedExponents ex = derived_exponents(params);
    if (ex.mass_class != MassClass::subcritical) throw InvalidInput("landscape requires the subcritical mass class");
    if (!(params.nu > 0.0)) throw InvalidInput("landscape requires nu > 0");
    if (!c.C_Npq) throw InvalidInput("landscape requires C_Npq");
    const double g = ex.gamma();
    const double ts = ex.two_star_mu;
    const double mass = params.a * params.a + params.b * params.b;
    LandscapeReport L;
    L.A = params.nu * *c.C_Npq * std::pow(mass, 0.5 * (params.p + params.q - g));
    L.B = std::pow(c.S_HL, -ts) / (2.0 * ts);

    // h'(rho) = rho^{g-1} (gfun(rho) - g A), gfun rises on (0, rho_bar) and falls after.
    auto gfun = [&](double rho) { return std::pow(rho, 2.0 - g) - 2.0 * ts * L.B * std::pow(rho, 2.0 * ts - g); };
    auto dh = [&](double rho) { return gfun(rho) - g * L.A; };
    auto h = [&](double rho) { return landscape_h(L, g, ts, rho); };
    const double rho_bar = std::pow((2.0 - g) / (2.0 * ts - g) * std::pow(c.S_HL, ts), 1.0 / (2.0 * ts - 2.0));
    if (!(dh(rho_bar) > 0.0))
        throw NumericalError("landscape degenerate: critical radii rho1 and rho2 vanished (h' has no sign change; nu >= nu0?)");

    double lo = rho_bar;
    while (dh(lo) > 0.0) lo *= 0.5;
    L.rho1 = bisect_root(dh, lo, rho_bar);
    double hi = rho_bar;
    while (dh(hi) > 0.0) hi *= 2.0;
    L.rho2 = bisect_root(dh, rho_bar, hi);
    L.h_min = h(L.rho1);
    L.h_max = h(L.rho2);
    if (!(L.h_min < 0.0)) throw NumericalError("landscape degenerate: h(rho1) >= 0, zero R0 vanished");
    if (!(L.h_max > 0.0)) throw NumericalError("landscape degenerate: h(rho2) <= 0, zeros R0 and R1 vanished");
    L.R0 = bisect_root(h, L.rho1, L.rho2);
    double top = L.rho2;
    while (h(top) > 0.0) top *= 2.0;
    L.R1 = bisect_root(h, L.rho2, top);
    return L;
}

}  // namespace chq

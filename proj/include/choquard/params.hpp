#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chq {

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IOError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class MassClass { subcritical, critical, supercritical };

std::string_view to_string(MassClass c);

struct ProblemParams {
    int N = 3;
    double mu = 1.0;
    double p = 2.0;
    double q = 2.0;
    double nu = 0.0;
    double a = 1.0;
    double b = 1.0;
};

struct DerivedExponents {
    double gamma_p = 0.0;
    double gamma_q = 0.0;
    double two_star_mu = 0.0;
    double two_lower = 0.0;
    MassClass mass_class = MassClass::subcritical;

    double gamma() const { return gamma_p + gamma_q; }
};

struct ConstantsTable {
    double A_Nmu = 0.0;
    double C_Nmu = 0.0;
    double S = 0.0;
    double S_HL = 0.0;
    double bubble_level = 0.0;
    std::optional<double> C_Np;
    std::optional<double> C_Nq;
    std::optional<double> C_Npq;
    std::optional<double> nu0;
    std::optional<double> nu0_prime;
};

struct LandscapeReport {
    double A = 0.0;
    double B = 0.0;
    double rho1 = 0.0;
    double rho2 = 0.0;
    double R0 = 0.0;
    double R1 = 0.0;
    double h_min = 0.0;
    double h_max = 0.0;
};

struct SharpConstants {
    double S = 0.0;
    double S_HL = 0.0;
    double bubble_level = 0.0;
};

// Throws InvalidInput naming the violated bound.
void validate(const ProblemParams& params);
void validate_dimension_order(int N, double mu);

DerivedExponents derived_exponents(const ProblemParams& params);
double gamma_exponent(int N, double mu, double p);
double upper_critical(int N, double mu);
double lower_critical(int N, double mu);

double sphere_area(int N);
double riesz_normalization(int N, double mu);
double hls_constant(int N, double mu);

// Bubble Rayleigh quotient on a fine graded grid, Richardson-extrapolated in M.
SharpConstants sharp_constants(int N, double mu);
double bubble_level_from(double S_HL, double two_star);

// Upper bound for C_Npq: max(C_Np C_Nq, sqrt(C_Np C_Nq)); the square root is the Cauchy-Schwarz bound.
ConstantsTable base_constants(const ProblemParams& params);
double vector_gn_bound(double C_Np, double C_Nq);

double threshold_nu0(const ProblemParams& params, const ConstantsTable& constants);
double threshold_nu0_prime(const ProblemParams& params, const ConstantsTable& constants);
void fill_thresholds(const ProblemParams& params, ConstantsTable& constants);

double landscape_h(const LandscapeReport& land, double gamma, double two_star, double rho);
LandscapeReport landscape(const ProblemParams& params, const ConstantsTable& constants);

}  // namespace chq

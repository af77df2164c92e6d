#pragma once

#include <string>
#include <vector>

#include "choquard/params.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"

namespace chq {

struct EnergyBreakdown {
    double alpha_u = 0.0;
    double alpha_v = 0.0;
    double beta_u = 0.0;
    double beta_v = 0.0;
    double delta = 0.0;
    double mass_u = 0.0;
    double mass_v = 0.0;

    double alpha() const { return alpha_u + alpha_v; }
    double beta() const { return beta_u + beta_v; }
};

enum class Branch { plus, minus, degenerate };
std::string_view to_string(Branch b);

struct FiberReport {
    std::vector<double> roots;
    std::vector<Branch> kinds;
    std::vector<double> values;
};

struct FiberValues {
    double psi = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

struct EnergyResult {
    double J = 0.0;
    EnergyBreakdown breakdown;
};

struct PohozaevResult {
    double P = 0.0;
    double normalized = 0.0;
};

struct ELResult {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double res1 = 0.0;
    double res2 = 0.0;
    bool lambda1_defined = true;
    bool lambda2_defined = true;
};

struct ScalarK {
    double K = 0.0;
    double fiber_max = 0.0;
};

struct BubbleFields {
    RadialField U;
    RadialField U_tilde;
    RadialField eta;
};

// Nonlinear-term ingredients of one (u, v) evaluation. The kernel is used as given,
// so energies carry whatever prefactor it was built with.
struct Evaluation {
    EnergyBreakdown br;
    std::vector<double> abs_u_crit;  // |u|^{2*}
    std::vector<double> abs_v_crit;
    std::vector<double> abs_u_p;     // |u|^p
    std::vector<double> abs_v_q;
    std::vector<double> K_u_crit;    // I*|u|^{2*}
    std::vector<double> K_v_crit;
    std::vector<double> K_u_p;
    std::vector<double> K_v_q;       // filled only when gradients are requested
};

struct TermGradients {
    std::vector<double> alpha_u, alpha_v;
    std::vector<double> beta_u, beta_v;
    std::vector<double> delta_u, delta_v;
    std::vector<double> mass_u, mass_v;
};

Evaluation evaluate(const ProblemParams& params, const RieszKernel& K, const std::vector<double>& u,
                    const std::vector<double>& v, bool with_gradient_data, bool with_critical = true);
TermGradients term_gradients(const ProblemParams& params, const RieszKernel& K, const Evaluation& ev,
                             const std::vector<double>& u, const std::vector<double>& v);

double J_of(const EnergyBreakdown& br, const ProblemParams& params);
double P_of(const EnergyBreakdown& br, const ProblemParams& params);

EnergyResult energy(const ProblemParams& params, const RieszKernel& K, const RadialField& u, const RadialField& v);
PohozaevResult pohozaev(const ProblemParams& params, const RieszKernel& K, const RadialField& u, const RadialField& v);
PohozaevResult pohozaev_from(const EnergyBreakdown& br, const ProblemParams& params);

FiberValues fiber(const EnergyBreakdown& br, const ProblemParams& params, double t);
FiberReport fiber_critical_points(const EnergyBreakdown& br, const ProblemParams& params);

ELResult el_residual_and_multipliers(const ProblemParams& params, const RieszKernel& K, const RadialField& u,
                                     const RadialField& v, bool with_critical = true);

ScalarK scalar_K_and_max(const RieszKernel& K, const RadialField& u);

BubbleFields bubble(const GridPtr& grid, double mu, double eps, double cutoff_delta);
double cutoff_profile(double r, double delta);

// Discrete H^{-1} norm of a weak residual vector: sqrt(g^T (L + kappa W)^{-1} g) / sqrt(|S|).
class DualNorm {
public:
    DualNorm(const RadialGrid& grid, double kappa);
    double operator()(const std::vector<double>& g) const;
    // x = (|S|(L + kappa W))^{-1} g with the Dirichlet node held at zero.
    void solve(const std::vector<double>& g, std::vector<double>& x) const;

private:
    std::vector<double> diag_, off_;
    double area_ = 1.0;
};

}  // namespace chq

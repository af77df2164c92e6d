#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "choquard/functionals.hpp"
#include "choquard/params.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"

namespace chq {

struct SolveConfig {
    int max_iter = 5000;
    double step0 = 1.0;
    double armijo_ratio = 0.5;
    double armijo_c = 1e-4;
    double tol_P = 1e-6;
    double tol_grad = 1e-7;
    double tol_el = 1e-4;
    std::optional<double> R0;
    bool positivity = true;
    std::uint64_t seed = 1;
    std::string init = "gaussian";  // "gaussian" | "bubble"
    int checkpoint_every = 0;
    std::string checkpoint_path;
    std::string resume_path;
    bool keep_trace = true;
};

void validate(const SolveConfig& config);

struct TraceEntry {
    double J = 0.0;
    double P_abs = 0.0;
    double step = 0.0;
};

struct SolveReport {
    // Fields live on the grid dilated by the optimal fiber parameter, where P = Psi'(0).
    RadialField u;
    RadialField v;
    double J = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double pohozaev_residual = 0.0;
    double res1 = 0.0;
    double res2 = 0.0;
    double gradient_residual = 0.0;
    Branch branch = Branch::minus;
    int iterations = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;
    EnergyBreakdown breakdown;
    double t_star = 0.0;
    double psi_curvature = 0.0;
    int ball_warnings = 0;
    std::string message;
    // Base-grid representatives (same values, undilated grid) for warm starts.
    std::vector<double> base_u;
    std::vector<double> base_v;
    // Limit system only.
    std::optional<double> m_tilde;
    std::optional<double> D0;
};

struct InitialFields {
    std::vector<double> u;
    std::vector<double> v;
};

// Removes the W-orthogonal projections onto u and v (L2 tangent space of the mass torus).
std::pair<std::vector<double>, std::vector<double>> project_tangent(const RadialGrid& grid, const std::vector<double>& u,
                                                                    const std::vector<double>& v,
                                                                    const std::vector<double>& grad_u,
                                                                    const std::vector<double>& grad_v);

InitialFields initial_fields(const RadialGrid& grid, const ProblemParams& params, const SolveConfig& config);

// K must be the bare kernel on the solve grid.
SolveReport solve_ground_state(const ProblemParams& params, const RieszKernel& K, const SolveConfig& config,
                               const std::optional<InitialFields>& warm = std::nullopt);

// Critical terms disabled and unit coupling; params.nu is ignored.
SolveReport solve_limit_system(const ProblemParams& params, const RieszKernel& K, const SolveConfig& config,
                               const std::optional<InitialFields>& warm = std::nullopt);

}  // namespace chq

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "choquard/gn_extremal.hpp"
#include "choquard/ground_state.hpp"
#include "choquard/params.hpp"
#include "choquard/records.hpp"
#include "choquard/riesz.hpp"

namespace chq {

GridPtr make_grid(int N, const GridSpec& spec);
// Bare kernel, read from / written to cache_dir when it is non-empty.
RieszKernel make_kernel(const GridPtr& grid, double mu, const std::string& cache_dir = {});

struct ConstantsOptions {
    GridSpec gn_grid{512, 20.0, 2.0};
    GNConfig gn;
    // Skip the ascent when values are supplied.
    std::optional<double> C_Np, C_Nq, C_Npq;
    bool need_gn = true;
    std::string kernel_cache;
};

// Sharp constants, GN constants when the mass class needs them, and thresholds.
ConstantsTable compute_constants(const ProblemParams& params, const ConstantsOptions& options);

struct RunConfig {
    ProblemParams params;
    GridSpec grid;
    SolveConfig solve;
    ConstantsOptions constants;
    std::string record_path;
    std::string fields_path;
    std::string csv_path;
    std::string kernel_cache;
    nlohmann::json raw;  // full config, for command-specific keys
};

RunConfig parse_run_config(const nlohmann::json& config);

struct SolveOutcome {
    RunRecord record;
    SolveReport report;
};

// Validates, computes constants, solves, persists outputs named in the config.
SolveOutcome run_solve(const RunConfig& config);
SolveOutcome run_limit(const RunConfig& config);

// ---- nu sweep ----

struct SweepSpec {
    ProblemParams base;
    std::vector<double> nu_values;
    GridSpec grid;
    SolveConfig solve;
    std::vector<std::string> inits{"gaussian", "bubble"};
    double tol_level = 0.01;
    int refine_steps = 3;
    std::string csv_path;
    std::string records_path;
    std::string kernel_cache;
};

struct SweepPoint {
    double nu = 0.0;
    double J = 0.0;
    double level_gap = 0.0;  // (bubble_level - J) / bubble_level
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double pohozaev_residual = 0.0;
    bool converged = false;
    bool refinement = false;
};

struct SweepResult {
    std::vector<SweepPoint> points;  // sorted by nu
    double bubble_level = 0.0;
    double threshold = 0.0;          // bubble_level * (1 - tol_level)
    // nu2_hat lies in (lo, hi]; lo = 0 when the smallest sampled nu is already below.
    std::optional<double> nu2_lo, nu2_hi;
    bool monotone = true;
    std::string note;
};

std::vector<double> log_spaced(double lo, double hi, int count);
SweepResult sweep_nu(const SweepSpec& spec);
std::string sweep_csv(const SweepResult& result);

// ---- asymptotics ----

struct AsymptoticsSpec {
    ProblemParams base;
    std::vector<double> nu_values;
    GridSpec grid;
    SolveConfig solve;
    double distance_floor = 1e-6;
    // Start every solve from the limit state instead of the configured initialization.
    bool warm_start = false;
    std::string kernel_cache;
};

struct AsymptoticsPoint {
    double nu = 0.0;
    bool converged = false;
    double J = 0.0;
    double scale = 0.0;        // s with (u_nu, v_nu) ~ s * (u~, v~); s = -t_nu
    double alpha = 0.0;
    double lambda_sum = 0.0;
    double distance = 0.0;     // L2 distance of (-s) * (u_nu, v_nu) to the limit state
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct AsymptoticsReport {
    std::vector<AsymptoticsPoint> points;
    double m_tilde = 0.0;
    double D0 = 0.0;
    bool limit_converged = false;
    double predicted = 0.0;  // 1 / (2 - gamma)
    bool fitted = false;
    std::string refusal;
    double slope_scale = 0.0;
    double slope_alpha = 0.0;
    double slope_lambda = 0.0;
    bool distance_decreasing = false;
    double max_distance = 0.0;
    // Every distance is below distance_floor: the states coincide with the rescaled limit state to solver
    // accuracy and a monotone trend cannot be resolved.
    bool at_floor = false;
};

AsymptoticsReport fit_asymptotics(const AsymptoticsSpec& spec);

// L2 distance between (-s) * (u, v) and (ut, vt), minimized over s near s0; returns (s, distance).
std::pair<double, double> match_dilation(const RadialField& u, const RadialField& v, const RadialField& ut,
                                         const RadialField& vt, double s0);

// ---- bubble concentration ----

struct BubbleCheckSpec {
    ProblemParams base;
    std::vector<double> nu_values;  // descending
    GridSpec grid;
    SolveConfig solve;
    double misfit_budget = 0.2;
    double share_budget = 0.1;
    std::string kernel_cache;
};

struct BubblePoint {
    double nu = 0.0;
    bool converged = false;
    double J = 0.0;
    double kinetic_u = 0.0;
    double kinetic_v = 0.0;
    double min_share = 0.0;
    char surviving = '?';
    double surviving_kinetic = 0.0;
    double r_nu = 0.0;
    double eps_fit = 0.0;
    double misfit = 0.0;
};

struct BubbleReport {
    std::vector<BubblePoint> points;
    double target_kinetic = 0.0;  // S_HL^{2*/(2*-1)}
    double bubble_level = 0.0;
    bool share_decreasing = false;
    bool ambiguous = false;
    std::string note;
};

// Fits eps in U~_{eps,0} to the field rescaled by r (u_r(x) = r^{(N-2)/2} u(r x)); relative gradient misfit.
struct ProfileFit {
    double r = 0.0;
    double eps = 0.0;
    double misfit = 0.0;
};
ProfileFit fit_bubble_profile(const RadialField& f, double mu);

BubbleReport bubble_concentration_check(const BubbleCheckSpec& spec);

// ---- nonexistence ----

struct NonexistenceSpec {
    ProblemParams base;  // nu taken from nu_values
    std::vector<double> nu_values{0.0, -0.5};
    std::vector<double> eps_values{0.2, 0.1, 0.05};
    int random_pairs = 200;
    std::uint64_t seed = 7;
    GridSpec grid{2048, 200.0, 3.0};
    std::string kernel_cache;
};

struct NonexistenceCase {
    double nu = 0.0;
    std::vector<double> bubble_values;  // one per eps
    double random_min = 0.0;
    double inf_found = 0.0;
};

struct NonexistenceReport {
    std::vector<NonexistenceCase> cases;
    double bubble_level = 0.0;
    bool all_above = false;
    bool bubbles_decreasing = false;
    double closest_gap = 0.0;  // (min bubble value - level) / level at the smallest eps
    std::string statement;
};

// Jbar = J - P / (2 2*) at the P-root of the fiber through (u, v).
double jbar_projected(const ProblemParams& params, const RieszKernel& K, const std::vector<double>& u,
                      const std::vector<double>& v);

NonexistenceReport probe_nonexistence(const NonexistenceSpec& spec);

// ---- dispatch ----

struct CommandResult {
    int exit_code = 0;  // 0 ok / converged, 1 invalid input, 2 not converged
    ojson output;
};

CommandResult run_command(const std::string& command, const nlohmann::json& config);

}  // namespace chq

#pragma once

#include <vector>

#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"

namespace chq {

struct GNConfig {
    int max_iter = 6000;
    double tol = 1e-8;
    int rearrange_every = 10;
    std::vector<double> widths{0.5, 1.0, 2.0, 4.0, 8.0};
};

struct GNResult {
    RadialField Qp;          // on grid().scaled(1/lambda), solves the extremal equation
    RadialField maximizer;   // best W-maximizer on the input grid, unit mass
    double C_Np = 0.0;
    std::vector<double> ratio_history;
    std::vector<double> restart_values;
    double spread = 0.0;     // (max - min) / max over restarts
    double residual = 0.0;
    double lambda = 1.0;     // Q(x) = c u(lambda x)
    double amplitude = 1.0;  // c
    int iterations = 0;
    int restarts = 0;
    bool stale = false;
};

struct CoupledGNResult {
    double estimate = 0.0;
    double found = 0.0;
    double bound = 0.0;
    bool clamped = false;
    int iterations = 0;
};

// W(u) = D(|u|^p,|u|^p) / (|grad u|^{2 gamma_p} |u|_2^{2p - 2 gamma_p}); K must be the bare kernel.
double weinstein_ratio(const RieszKernel& K, double p, const std::vector<double>& u);
double coupled_ratio(const RieszKernel& K, double p, double q, const std::vector<double>& u,
                     const std::vector<double>& v);

// Residual of -2g Delta Q + 2(p-g) Q = 2 (I*|Q|^p)|Q|^{p-2}Q for a field on K's grid.
double extremal_equation_residual(const RieszKernel& K, double p, const std::vector<double>& Q);

GNResult gn_extremal_solve(int N, double mu, double p, const GridPtr& grid, const RieszKernel& K,
                           const GNConfig& config = {});

CoupledGNResult coupled_gn_estimate(int N, double mu, double p, double q, const GridPtr& grid, const RieszKernel& K,
                                    double C_Np, double C_Nq, const GNConfig& config = {});

}  // namespace chq

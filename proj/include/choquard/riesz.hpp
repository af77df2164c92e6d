#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "choquard/radial_grid.hpp"

namespace chq {

// Spherical mean of |r e_1 - s w|^{-mu} over w in S^{N-1}; infinite on r == s when mu >= N-1.
double angular_mean(int N, double mu, double r, double s);

// Dense Nystrom matrix of f -> c |x|^{-mu} * f for radial f, c = prefactor.
class RieszKernel {
public:
    static RieszKernel build(const GridPtr& grid, double mu, double prefactor);

    const GridPtr& grid() const { return grid_; }
    double mu() const { return mu_; }
    double prefactor() const { return prefactor_; }
    bool diagonal_singular() const { return mu_ >= grid_->N() - 1.0; }
    int size() const { return grid_->M(); }

    // (I*f)(r_i) = sum_j entry(i,j) f_j
    double entry(int i, int j) const { return scale_ * (*matrix_)[static_cast<std::size_t>(i) * size() + j]; }
    double scale() const { return scale_; }
    const std::vector<double>& raw_matrix() const { return *matrix_; }

    void apply(const std::vector<double>& f, std::vector<double>& out) const;

    // Kernel on grid().scaled(lambda); shares storage and multiplies by lambda^{N-mu}.
    RieszKernel rescaled(double lambda) const;

    std::string cache_key() const;
    static std::string cache_key(const RadialGrid& grid, double mu, double prefactor);
    void save(const std::string& path) const;
    static std::optional<RieszKernel> load(const std::string& path, const GridPtr& grid, double mu, double prefactor);
    // Loads from cache_dir when present, otherwise builds and stores there.
    static RieszKernel build_cached(const GridPtr& grid, double mu, double prefactor, const std::string& cache_dir);

private:
    GridPtr grid_;
    double mu_ = 1.0;
    double prefactor_ = 1.0;
    double scale_ = 1.0;
    std::shared_ptr<const std::vector<double>> matrix_;
};

RadialField apply_riesz(const RieszKernel& K, const RadialField& f);

// D(f,g) = int (I*f) g
double pair_values(const RieszKernel& K, const std::vector<double>& f, const std::vector<double>& g);
double pair_energy(const RieszKernel& K, const RadialField& f, const RadialField& g);

struct HLSReport {
    double ratio = 0.0;
    bool within_bound = false;
};

// D(|f|,|g|) / (C |f|_r |g|_r), r = 2N/(2N-mu); bound allows 1e-3 slack.
HLSReport verify_hls(const RieszKernel& K, const RadialField& f, const RadialField& g, double C_Nmu);

}  // namespace chq

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace chq {

// Graded mesh r_i = R_max (i/M)^stretch, i = 1..M. Weights approximate
// int_0^R f(r) r^{N-1} dr and already carry the r^{N-1} factor.
class RadialGrid {
public:
    static std::shared_ptr<const RadialGrid> build(int N, int M, double R_max, double stretch);

    int N() const { return N_; }
    int M() const { return static_cast<int>(nodes_.size()); }
    double R_max() const { return R_max_; }
    double stretch() const { return stretch_; }
    double surface() const { return surface_; }

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    // P1 cell coefficients: int_{r_k}^{r_{k+1}} r^{N-1} dr / (r_{k+1}-r_k)^2.
    const std::vector<double>& stiffness() const { return stiffness_; }

    // Same (N, M, stretch) with every node multiplied by lambda.
    std::shared_ptr<const RadialGrid> scaled(double lambda) const;

    bool same_shape(const RadialGrid& other) const;

private:
    RadialGrid() = default;

    int N_ = 3;
    double R_max_ = 1.0;
    double stretch_ = 1.0;
    double surface_ = 0.0;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<double> stiffness_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

struct RadialField {
    GridPtr grid;
    std::vector<double> values;
    // Algebraic decay u ~ r^{-k} beyond R_max, used by norm tail corrections.
    std::optional<double> tail_exponent;
};

struct FieldNorms {
    double mass = 0.0;
    double kinetic = 0.0;
};

struct DilateResult {
    RadialField field;
    double lost_mass_fraction = 0.0;
    bool flagged = false;
};

RadialField sample(const GridPtr& grid, const std::function<double(double)>& f);

void require_same_grid(const RadialGrid& a, const RadialGrid& b);

// Integral over R^N of the radial function: |S^{N-1}| sum_i w_i f_i (+ tail).
double integrate(const RadialField& f);
double integrate_values(const RadialGrid& grid, const std::vector<double>& f);

double mass_of(const RadialGrid& grid, const std::vector<double>& u);
double kinetic_of(const RadialGrid& grid, const std::vector<double>& u);
double lp_norm(const RadialGrid& grid, const std::vector<double>& u, double p);
FieldNorms field_norms(const RadialField& f);

// out = L u, with kinetic_of(u) = |S^{N-1}| u^T L u.
void apply_stiffness(const RadialGrid& grid, const std::vector<double>& u, std::vector<double>& out);

// Three-point radial Laplacian u'' + (N-1)u'/r; even extension at the first node, NaN at the last.
std::vector<double> radial_laplacian(const RadialGrid& grid, const std::vector<double>& u);

// Evaluates the monotone cubic interpolant of u at arbitrary radii: flat below r_1, zero beyond R_max.
class MonotoneInterpolant {
public:
    MonotoneInterpolant(const RadialGrid& grid, const std::vector<double>& u);
    ~MonotoneInterpolant();
    MonotoneInterpolant(const MonotoneInterpolant&) = delete;
    MonotoneInterpolant& operator=(const MonotoneInterpolant&) = delete;
    double operator()(double r) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// (s * f)(r) = e^{Ns/2} f(e^s r), resampled on the same grid.
DilateResult dilate(const RadialField& f, double s);

RadialField rearrange_decreasing(const RadialField& f);

// d/ds (s * u) at s = 0, i.e. (N/2) u + r u', by three-point differences; zero at the Dirichlet node.
std::vector<double> dilation_generator(const RadialGrid& grid, const std::vector<double>& u);

}  // namespace chq

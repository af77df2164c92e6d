#include "choquard/radial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <math.h>  // boost 1.74 pchip calls unqualified isnan
#include <boost/math/interpolators/pchip.hpp>

#include "choquard/params.hpp"

namespace chq {

namespace {

constexpr double kGregory[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};

double tail_integral(double value_at_R, double R, int N, double decay) {
    // int_R^inf (value_at_R (R/r)^decay) r^{N-1} dr
    if (value_at_R == 0.0) return 0.0;
    if (decay <= N) return std::copysign(std::numeric_limits<double>::infinity(), value_at_R);
    return value_at_R * std::pow(R, N) / (decay - N);
}

}  // namespace

GridPtr RadialGrid::build(int N, int M, double R_max, double stretch) {
    if (N < 3) throw InvalidInput("grid: N must be >= 3");
    if (M < 64) throw InvalidInput("grid: M must be >= 64");
    if (!std::isfinite(R_max) || R_max <= 0.0) throw InvalidInput("grid: R_max must be finite and > 0");
    if (!std::isfinite(stretch) || stretch < 1.0) throw InvalidInput("grid: stretch must be finite and >= 1");

    std::shared_ptr<RadialGrid> g(new RadialGrid());
    g->N_ = N;
    g->R_max_ = R_max;
    g->stretch_ = stretch;
    g->surface_ = sphere_area(N);
    g->nodes_.resize(M);
    g->weights_.resize(M);
    const double dx = 1.0 / M;
    for (int i = 0; i < M; ++i) {
        const double x = static_cast<double>(i + 1) / M;
        const double r = (i + 1 == M) ? R_max : R_max * std::pow(x, stretch);
        g->nodes_[i] = r;
        const double drdx = R_max * stretch * std::pow(x, stretch - 1.0);
        double c = 1.0;
        const int from_end = M - 1 - i;
        if (from_end < 3) c = kGregory[from_end];
        g->weights_[i] = c * dx * drdx * std::pow(r, N - 1);
    }
    g->stiffness_.resize(M - 1);
    for (int k = 0; k + 1 < M; ++k) {
        const double r0 = g->nodes_[k];
        const double r1 = g->nodes_[k + 1];
        const double h = r1 - r0;
        g->stiffness_[k] = (std::pow(r1, N) - std::pow(r0, N)) / (N * h * h);
    }
    return g;
}

GridPtr RadialGrid::scaled(double lambda) const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidInput("grid: scale factor must be positive");
    return build(N_, M(), R_max_ * lambda, stretch_);
}

bool RadialGrid::same_shape(const RadialGrid& other) const {
    return N_ == other.N_ && M() == other.M() && R_max_ == other.R_max_ && stretch_ == other.stretch_;
}

void require_same_grid(const RadialGrid& a, const RadialGrid& b) {
    if (&a != &b && !a.same_shape(b)) throw InvalidInput("grid mismatch between operands");
}

RadialField sample(const GridPtr& grid, const std::function<double(double)>& f) {
    RadialField out{grid, std::vector<double>(grid->M()), std::nullopt};
    for (int i = 0; i < grid->M(); ++i) out.values[i] = f(grid->nodes()[i]);
    return out;
}

double integrate_values(const RadialGrid& grid, const std::vector<double>& f) {
    if (static_cast<int>(f.size()) != grid.M()) throw InvalidInput("field size does not match grid");
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return grid.surface() * s;
}

double integrate(const RadialField& f) {
    double s = integrate_values(*f.grid, f.values);
    if (f.tail_exponent) {
        s += f.grid->surface() * tail_integral(f.values.back(), f.grid->R_max(), f.grid->N(), *f.tail_exponent);
    }
    return s;
}

double mass_of(const RadialGrid& grid, const std::vector<double>& u) {
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * u[i] * u[i];
    return grid.surface() * s;
}

double kinetic_of(const RadialGrid& grid, const std::vector<double>& u) {
    const auto& c = grid.stiffness();
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double d = u[k + 1] - u[k];
        s += c[k] * d * d;
    }
    return grid.surface() * s;
}

double lp_norm(const RadialGrid& grid, const std::vector<double>& u, double p) {
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * std::pow(std::abs(u[i]), p);
    return std::pow(grid.surface() * s, 1.0 / p);
}

FieldNorms field_norms(const RadialField& f) {
    const RadialGrid& g = *f.grid;
    if (static_cast<int>(f.values.size()) != g.M()) throw InvalidInput("field size does not match grid");
    FieldNorms n{mass_of(g, f.values), kinetic_of(g, f.values)};
    if (f.tail_exponent) {
        const double k = *f.tail_exponent;
        const double uR = f.values.back();
        const double R = g.R_max();
        const int N = g.N();
        n.mass += g.surface() * tail_integral(uR * uR, R, N, 2.0 * k);
        // u' = -k u(R) R^k r^{-k-1} beyond R
        n.kinetic += g.surface() * tail_integral(k * k * uR * uR / (R * R), R, N, 2.0 * k + 2.0);
    }
    return n;
}

void apply_stiffness(const RadialGrid& grid, const std::vector<double>& u, std::vector<double>& out) {
    const auto& c = grid.stiffness();
    const std::size_t M = u.size();
    out.assign(M, 0.0);
    for (std::size_t k = 0; k + 1 < M; ++k) {
        const double flux = c[k] * (u[k + 1] - u[k]);
        out[k] -= flux;
        out[k + 1] += flux;
    }
}

std::vector<double> radial_laplacian(const RadialGrid& grid, const std::vector<double>& u) {
    const auto& r = grid.nodes();
    const int M = grid.M();
    const int N = grid.N();
    std::vector<double> lap(M, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i + 1 < M; ++i) {
        // Even extension supplies the ghost point -r_1 for the first node.
        const double rm = i == 0 ? -r[0] : r[i - 1];
        const double um = i == 0 ? u[0] : u[i - 1];
        const double hm = r[i] - rm;
        const double hp = r[i + 1] - r[i];
        const double den = hm * hp * (hm + hp);
        const double d2 = 2.0 * (hm * u[i + 1] - (hm + hp) * u[i] + hp * um) / den;
        const double d1 = (hm * hm * u[i + 1] - hp * hp * um + (hp * hp - hm * hm) * u[i]) / den;
        lap[i] = d2 + (N - 1) * d1 / r[i];
    }
    return lap;
}

struct MonotoneInterpolant::Impl {
    double r_first = 0.0;
    double r_last = 0.0;
    double v_first = 0.0;
    std::unique_ptr<boost::math::interpolators::pchip<std::vector<double>>> spline;
};

MonotoneInterpolant::MonotoneInterpolant(const RadialGrid& grid, const std::vector<double>& u)
    : impl_(std::make_unique<Impl>()) {
    std::vector<double> x = grid.nodes();
    std::vector<double> y = u;
    impl_->r_first = x.front();
    impl_->r_last = x.back();
    impl_->v_first = y.front();
    impl_->spline = std::make_unique<boost::math::interpolators::pchip<std::vector<double>>>(
        std::move(x), std::move(y), 0.0);
}

MonotoneInterpolant::~MonotoneInterpolant() = default;

double MonotoneInterpolant::operator()(double r) const {
    if (r <= impl_->r_first) return impl_->v_first;
    if (r > impl_->r_last) return 0.0;
    return (*impl_->spline)(r);
}

DilateResult dilate(const RadialField& f, double s) {
    if (!std::isfinite(s) || std::abs(s) > 20.0) throw InvalidInput("dilate: |s| must be <= 20");
    DilateResult out;
    out.field = RadialField{f.grid, f.values, std::nullopt};
    if (s == 0.0) return out;
    const RadialGrid& g = *f.grid;
    MonotoneInterpolant interp(g, f.values);
    const double amp = std::exp(0.5 * g.N() * s);
    const double scale = std::exp(s);
    for (int i = 0; i < g.M(); ++i) out.field.values[i] = amp * interp(scale * g.nodes()[i]);
    const double m0 = mass_of(g, f.values);
    if (m0 > 0.0) {
        out.lost_mass_fraction = std::max(0.0, 1.0 - mass_of(g, out.field.values) / m0);
        out.flagged = out.lost_mass_fraction > 0.01;
    }
    return out;
}

RadialField rearrange_decreasing(const RadialField& f) {
    const RadialGrid& g = *f.grid;
    const int M = g.M();
    const auto& w = g.weights();
    std::vector<int> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return std::abs(f.values[i]) > std::abs(f.values[j]); });

    // Decreasing step function of squared values against cumulative measure, averaged over node cells.
    RadialField out{f.grid, std::vector<double>(M, 0.0), f.tail_exponent};
    int k = 0;
    double left_in_k = w[order[0]];
    for (int i = 0; i < M; ++i) {
        double need = w[i];
        double acc = 0.0;
        while (need > 0.0 && k < M) {
            const double take = std::min(need, left_in_k);
            const double v = f.values[order[k]];
            acc += take * v * v;
            need -= take;
            left_in_k -= take;
            if (left_in_k <= 0.0) {
                ++k;
                if (k < M) left_in_k = w[order[k]];
            }
        }
        out.values[i] = std::sqrt(acc / w[i]);
    }
    return out;
}

std::vector<double> dilation_generator(const RadialGrid& grid, const std::vector<double>& u) {
    const auto& r = grid.nodes();
    const std::size_t M = u.size();
    std::vector<double> z(M, 0.0);
    for (std::size_t i = 0; i + 1 < M; ++i) {
        double du;
        if (i == 0) {
            du = (u[1] - u[0]) / (r[1] - r[0]);
        } else {
            const double h0 = r[i] - r[i - 1], h1 = r[i + 1] - r[i];
            du = (u[i + 1] * h0 * h0 - u[i - 1] * h1 * h1 + u[i] * (h1 * h1 - h0 * h0)) / (h0 * h1 * (h0 + h1));
        }
        z[i] = 0.5 * grid.N() * u[i] + r[i] * du;
    }
    return z;
}

}  // namespace chq

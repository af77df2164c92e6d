#include "choquard/riesz.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include "json.hpp"

#include "choquard/params.hpp"
#include "choquard/util.hpp"

namespace chq {

namespace {

bool is_newtonian(int N, double mu) { return std::abs(mu - (N - 2.0)) < 1e-14; }

double hypergeometric_mean(int N, double mu, double x) {
    // 2F1(mu/2, (mu-N+2)/2; N/2; x^2)
    const double a = 0.5 * mu;
    const double b = 0.5 * (mu - N + 2.0);
    const double c = 0.5 * N;
    const double z = x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 400; ++k) {
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

double sphere_slice_norm(int N) {
    // int_0^pi sin^{N-2}
    return std::sqrt(M_PI) * std::exp(std::lgamma(0.5 * (N - 1.0)) - std::lgamma(0.5 * N));
}

// TODO: evaluate via the 2F1 connection formula at z = 1 - x^2 instead; this quadrature dominates kernel
// assembly for N >= 4 away from mu = N - 2.
// omx = 1 - x, passed separately so that it keeps full precision as x -> 1.
double quadrature_mean(int N, double mu, double x, double omx) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    // log form: omx^2 + 4 x sin^2(th/2) underflows near th = 0 when omx is tiny
    auto f = [&](double th) {
        const double c = 2.0 * std::sqrt(x) * std::sin(0.5 * th);
        const double m = std::max(omx, c);
        const double sn = std::sin(th);
        if (m == 0.0 || sn == 0.0) return 0.0;
        const double o = std::min(omx, c) / m;
        const double log_d2 = 2.0 * std::log(m) + std::log1p(o * o);
        return std::exp(-0.5 * mu * log_d2 + (N - 2) * std::log(sn));
    };
    const double v = integrator.integrate(f, 0.0, M_PI, 1e-13);
    return v / sphere_slice_norm(N);
}

// Spherical mean with hi = max(r, s), lo = min(r, s) and gap = hi - lo supplied exactly.
double mean_with_gap(int N, double mu, double hi, double lo, double gap) {
    if (hi <= 0.0) return std::numeric_limits<double>::infinity();
    const double base = std::pow(hi, -mu);
    if (is_newtonian(N, mu)) return base;
    const double x = lo / hi;
    if (x < 0.5) return base * hypergeometric_mean(N, mu, x);
    const double omx = gap / hi;
    if (omx == 0.0 && mu >= N - 1.0) return std::numeric_limits<double>::infinity();
    if (N == 3) {
        if (omx == 0.0) return base * std::pow(2.0, 1.0 - mu) / (2.0 - mu);
        if (std::abs(mu - 2.0) < 1e-14) return base * std::log((1.0 + x) / omx) / (2.0 * x);
        const double k = 2.0 - mu;
        return base * (std::pow(1.0 + x, k) - std::pow(omx, k)) / (2.0 * x * k);
    }
    return base * quadrature_mean(N, mu, x, omx);
}

double potential_of_constant(int N, double mu, double r, double R) {
    // int_0^R F(r,s) s^{N-1} ds, integrated in the gap |s - r| so the diagonal singularity sits at 0
    if (is_newtonian(N, mu)) return r * r / N + 0.5 * (R * R - r * r);
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    auto inner = [&](double g) {
        const double s = r - g;
        return mean_with_gap(N, mu, r, s, g) * std::pow(s, N - 1);
    };
    auto outer = [&](double g) {
        const double s = r + g;
        return mean_with_gap(N, mu, s, r, g) * std::pow(s, N - 1);
    };
    double total = integrator.integrate(inner, 0.0, r, 1e-12);
    if (R > r) total += integrator.integrate(outer, 0.0, R - r, 1e-12);
    return total;
}

}  // namespace

double angular_mean(int N, double mu, double r, double s) {
    const double hi = std::max(r, s);
    const double lo = std::min(r, s);
    return mean_with_gap(N, mu, hi, lo, hi - lo);
}

RieszKernel RieszKernel::build(const GridPtr& grid, double mu, double prefactor) {
    validate_dimension_order(grid->N(), mu);
    const int M = grid->M();
    const int N = grid->N();
    const auto& r = grid->nodes();
    const auto& w = grid->weights();
    const double area = grid->surface() * prefactor;
    auto F = std::make_shared<std::vector<double>>(static_cast<std::size_t>(M) * M, 0.0);
    auto& mat = *F;

    parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
        for (int j = static_cast<int>(i) + 1; j < M; ++j) {
            const double v = angular_mean(N, mu, r[i], r[j]);
            mat[i * M + j] = v;
            mat[static_cast<std::size_t>(j) * M + i] = v;
        }
    });
    std::vector<double> phi(M);
    parallel_for(static_cast<std::size_t>(M),
                 [&](std::size_t i) { phi[i] = potential_of_constant(N, mu, r[i], grid->R_max()); });
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
        double* row = &mat[i * M];
        double off = 0.0;
        for (int j = 0; j < M; ++j) {
            if (j == static_cast<int>(i)) continue;
            row[j] *= w[j];
            off += row[j];
        }
        row[i] = phi[i] - off;
        for (int j = 0; j < M; ++j) row[j] *= area;
    });

    RieszKernel K;
    K.grid_ = grid;
    K.mu_ = mu;
    K.prefactor_ = prefactor;
    K.scale_ = 1.0;
    K.matrix_ = F;
    return K;
}

void RieszKernel::apply(const std::vector<double>& f, std::vector<double>& out) const {
    const int M = size();
    if (static_cast<int>(f.size()) != M) throw InvalidInput("riesz: field size does not match kernel grid");
    out.assign(M, 0.0);
    const double* m = matrix_->data();
    for (int i = 0; i < M; ++i) {
        const double* row = m + static_cast<std::size_t>(i) * M;
        double acc = 0.0;
        for (int j = 0; j < M; ++j) acc += row[j] * f[j];
        out[i] = scale_ * acc;
    }
}

RieszKernel RieszKernel::rescaled(double lambda) const {
    RieszKernel K = *this;
    K.grid_ = grid_->scaled(lambda);
    K.scale_ = scale_ * std::pow(lambda, grid_->N() - mu_);
    return K;
}

std::string RieszKernel::cache_key(const RadialGrid& g, double mu, double prefactor) {
    nlohmann::json key = {{"N", g.N()},           {"M", g.M()},   {"R_max", g.R_max()},
                          {"stretch", g.stretch()}, {"mu", mu},     {"prefactor", prefactor}};
    return sha256_hex(key.dump());
}

std::string RieszKernel::cache_key() const { return cache_key(*grid_, mu_, prefactor_); }

void RieszKernel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("kernel cache: cannot open '" + path + "' for writing");
    nlohmann::json header = {{"N", grid_->N()},        {"M", grid_->M()},   {"R_max", grid_->R_max()},
                             {"stretch", grid_->stretch()}, {"mu", mu_},        {"prefactor", prefactor_},
                             {"scale", scale_},          {"key", cache_key()}, {"layout", "row-major-f64"}};
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(matrix_->data()),
              static_cast<std::streamsize>(matrix_->size() * sizeof(double)));
    if (!out) throw std::runtime_error("kernel cache: write failed for '" + path + "'");
}

std::optional<RieszKernel> RieszKernel::load(const std::string& path, const GridPtr& grid, double mu,
                                             double prefactor) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    const auto header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("key", std::string()) != cache_key(*grid, mu, prefactor))
        return std::nullopt;
    const std::size_t M = grid->M();
    auto data = std::make_shared<std::vector<double>>(M * M);
    in.read(reinterpret_cast<char*>(data->data()), static_cast<std::streamsize>(M * M * sizeof(double)));
    if (!in) throw std::runtime_error("kernel cache: truncated file '" + path + "'");
    RieszKernel K;
    K.grid_ = grid;
    K.mu_ = mu;
    K.prefactor_ = prefactor;
    K.scale_ = header.value("scale", 1.0);
    K.matrix_ = data;
    return K;
}

RieszKernel RieszKernel::build_cached(const GridPtr& grid, double mu, double prefactor, const std::string& cache_dir) {
    if (cache_dir.empty()) return build(grid, mu, prefactor);
    namespace fs = std::filesystem;
    const fs::path path = fs::path(cache_dir) / ("kernel-" + cache_key(*grid, mu, prefactor) + ".bin");
    if (auto K = load(path.string(), grid, mu, prefactor)) return *K;
    RieszKernel K = build(grid, mu, prefactor);
    fs::create_directories(cache_dir);
    K.save(path.string());
    return K;
}

RadialField apply_riesz(const RieszKernel& K, const RadialField& f) {
    require_same_grid(*K.grid(), *f.grid);
    RadialField out{K.grid(), {}, std::nullopt};
    K.apply(f.values, out.values);
    return out;
}

double pair_values(const RieszKernel& K, const std::vector<double>& f, const std::vector<double>& g) {
    std::vector<double> kf;
    K.apply(f, kf);
    const auto& w = K.grid()->weights();
    double s = 0.0;
    for (std::size_t i = 0; i < kf.size(); ++i) s += w[i] * g[i] * kf[i];
    return K.grid()->surface() * s;
}

double pair_energy(const RieszKernel& K, const RadialField& f, const RadialField& g) {
    require_same_grid(*K.grid(), *f.grid);
    require_same_grid(*K.grid(), *g.grid);
    return pair_values(K, f.values, g.values);
}

HLSReport verify_hls(const RieszKernel& K, const RadialField& f, const RadialField& g, double C_Nmu) {
    require_same_grid(*K.grid(), *f.grid);
    require_same_grid(*K.grid(), *g.grid);
    const RadialGrid& grid = *K.grid();
    const double r = 2.0 * grid.N() / (2.0 * grid.N() - K.mu());
    std::vector<double> af(f.values.size());
    std::vector<double> ag(g.values.size());
    for (std::size_t i = 0; i < af.size(); ++i) af[i] = std::abs(f.values[i]);
    for (std::size_t i = 0; i < ag.size(); ++i) ag[i] = std::abs(g.values[i]);
    const double d = pair_values(K, af, ag) / K.prefactor();
    HLSReport rep;
    rep.ratio = d / (C_Nmu * lp_norm(grid, af, r) * lp_norm(grid, ag, r));
    rep.within_bound = rep.ratio <= 1.0 + 1e-3;
    return rep;
}

}  // namespace chq

#include "choquard/gn_extremal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "choquard/functionals.hpp"
#include "choquard/params.hpp"
#include "choquard/util.hpp"

namespace chq {

namespace {

struct Ingredients {
    double A = 0.0;  // kinetic
    double B = 0.0;  // mass
    double D = 0.0;  // D(|u|^p, |u|^p) or D(|u|^p, |v|^q)
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double signed_pow(double u, double e) { return u == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(u), e - 1.0), u); }

std::vector<double> abs_pow(const std::vector<double>& u, double p) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::pow(std::abs(u[i]), p);
    return out;
}

// factor * d/du of D(|u|^p, g) where Kg = I*g is given.
std::vector<double> pair_gradient(const RadialGrid& grid, double factor, double p, const std::vector<double>& u,
                                  const std::vector<double>& Kg) {
    std::vector<double> out(u.size());
    const auto& w = grid.weights();
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = factor * p * grid.surface() * w[i] * Kg[i] * signed_pow(u[i], p);
    return out;
}

void scale_to(std::vector<double>& u, double factor) {
    for (double& x : u) x *= factor;
}

std::vector<double> gaussian(const RadialGrid& grid, double width) {
    std::vector<double> u(grid.M());
    for (int i = 0; i < grid.M(); ++i) {
        const double r = grid.nodes()[i] / width;
        u[i] = std::exp(-0.5 * r * r);
    }
    return u;
}

using Fields = std::vector<std::vector<double>>;

// Scale- and amplitude-invariant log-ratio objective over one or two positive radial fields.
class RatioObjective {
public:
    virtual ~RatioObjective() = default;
    virtual double log_value(const Fields& f) const = 0;
    // Gradient per block; rel receives ||grad|| / ||numerator part|| in the dual norm.
    virtual Fields gradient(const Fields& f, double* rel) const = 0;
};

class WeinsteinObjective : public RatioObjective {
public:
    WeinsteinObjective(const RieszKernel& K, double p)
        : K_(K), g_(*K.grid()), p_(p), gamma_(gamma_exponent(g_.N(), K.mu(), p)) {}

    double log_value(const Fields& f) const override {
        const auto& u = f[0];
        const auto up = abs_pow(u, p_);
        return std::log(pair_values(K_, up, up)) - gamma_ * std::log(kinetic_of(g_, u)) -
               (p_ - gamma_) * std::log(mass_of(g_, u));
    }

    Fields gradient(const Fields& f, double* rel) const override {
        const auto& u = f[0];
        const auto up = abs_pow(u, p_);
        std::vector<double> Kup;
        K_.apply(up, Kup);
        const double D = pair_values(K_, up, up);
        const double A = kinetic_of(g_, u);
        const double B = mass_of(g_, u);
        auto dD = pair_gradient(g_, 2.0, p_, u, Kup);
        std::vector<double> dA;
        apply_stiffness(g_, u, dA);
        std::vector<double> out(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            dD[i] /= D;
            out[i] = dD[i] - gamma_ * 2.0 * g_.surface() * dA[i] / A -
                     (p_ - gamma_) * 2.0 * g_.surface() * g_.weights()[i] * u[i] / B;
        }
        out.back() = 0.0;
        dD.back() = 0.0;
        if (rel) {
            const DualNorm norm(g_, A / B);
            *rel = norm(out) / norm(dD);
        }
        return {out};
    }

private:
    const RieszKernel& K_;
    const RadialGrid& g_;
    double p_, gamma_;
};

class CoupledObjective : public RatioObjective {
public:
    CoupledObjective(const RieszKernel& K, double p, double q)
        : K_(K), g_(*K.grid()), p_(p), q_(q),
          gamma_(gamma_exponent(g_.N(), K.mu(), p) + gamma_exponent(g_.N(), K.mu(), q)) {}

    double log_value(const Fields& f) const override { return std::log(coupled_ratio(K_, p_, q_, f[0], f[1])); }

    Fields gradient(const Fields& f, double* rel) const override {
        const auto up = abs_pow(f[0], p_);
        const auto vq = abs_pow(f[1], q_);
        std::vector<double> Kup, Kvq;
        K_.apply(up, Kup);
        K_.apply(vq, Kvq);
        const double D = pair_values(K_, up, vq);
        const double A = kinetic_of(g_, f[0]) + kinetic_of(g_, f[1]);
        const double B = mass_of(g_, f[0]) + mass_of(g_, f[1]);
        const double tail = 0.5 * (p_ + q_ - gamma_);
        Fields out(2);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < 2; ++k) {
            const auto& x = f[k];
            auto dD = pair_gradient(g_, 1.0, k == 0 ? p_ : q_, x, k == 0 ? Kvq : Kup);
            std::vector<double> dA;
            apply_stiffness(g_, x, dA);
            out[k].resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                dD[i] /= D;
                out[k][i] = dD[i] - gamma_ * g_.surface() * dA[i] / A -
                            tail * 2.0 * g_.surface() * g_.weights()[i] * x[i] / B;
            }
            out[k].back() = 0.0;
            dD.back() = 0.0;
            if (rel) {
                const DualNorm norm(g_, A / B);
                num += std::pow(norm(out[k]), 2);
                den += std::pow(norm(dD), 2);
            }
        }
        if (rel) *rel = std::sqrt(num / den);
        return out;
    }

private:
    const RieszKernel& K_;
    const RadialGrid& g_;
    double p_, q_, gamma_;
};

struct AscentRun {
    Fields fields;
    double value = 0.0;  // exp of the log objective
    double rel_gradient = 0.0;
    std::vector<double> history;
    int iterations = 0;
    bool converged = false;
};

// Preconditioned nonlinear CG ascent on the unit joint-mass sphere, with periodic decreasing
// rearrangement and a 1-D search along the common dilation.
class RatioAscent {
public:
    RatioAscent(const RieszKernel& K, const RatioObjective& obj) : K_(K), g_(*K.grid()), obj_(obj) {}

    AscentRun run(Fields f, const GNConfig& cfg) const {
        AscentRun out;
        normalize(f);
        double L = obj_.log_value(f);
        double rel = 0.0;
        Fields grad = obj_.gradient(f, &rel);
        Fields pg = precondition(f, grad);
        Fields dir = pg;
        Fields grad_prev, pg_prev;
        double tau = 1.0;
        out.history.push_back(std::exp(L));
        int it = 0;
        for (; it < cfg.max_iter; ++it) {
            if (rel < cfg.tol) {
                out.converged = true;
                break;
            }
            double slope = dot_all(grad, dir);
            if (!(slope > 0.0)) {
                dir = pg;
                slope = dot_all(grad, dir);
            }
            tau = std::min(2.0 * tau, 1e6);
            Fields trial;
            double Lt = -INFINITY;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                trial = f;
                for (std::size_t k = 0; k < f.size(); ++k)
                    for (std::size_t i = 0; i < f[k].size(); ++i) trial[k][i] += tau * dir[k][i];
                normalize(trial);
                Lt = obj_.log_value(trial);
                if (std::isfinite(Lt) && Lt >= L + 1e-4 * tau * slope) {
                    accepted = true;
                    break;
                }
                tau *= 0.5;
            }
            if (!accepted) {
                // Line search exhausted at round-off level: numerically stationary.
                out.converged = rel < 1e3 * cfg.tol;
                break;
            }
            if (Lt < L - 1e-12) throw NumericalError("ratio ascent lost monotonicity");
            f.swap(trial);
            L = Lt;
            bool reset = false;
            if (cfg.rearrange_every > 0 && (it + 1) % cfg.rearrange_every == 0 && rearrange(f, L)) reset = true;
            if ((it + 1) % 25 == 0 && scale_search(f, L)) reset = true;
            out.history.push_back(std::exp(L));
            grad_prev = std::move(grad);
            pg_prev = std::move(pg);
            grad = obj_.gradient(f, &rel);
            pg = precondition(f, grad);
            double beta = 0.0;
            if (!reset) {
                const double den = dot_all(grad_prev, pg_prev);
                if (den > 0.0) {
                    double num = 0.0;
                    for (std::size_t k = 0; k < grad.size(); ++k)
                        for (std::size_t i = 0; i < grad[k].size(); ++i)
                            num += pg[k][i] * (grad[k][i] - grad_prev[k][i]);
                    beta = std::max(0.0, num / den);
                }
            }
            for (std::size_t k = 0; k < dir.size(); ++k)
                for (std::size_t i = 0; i < dir[k].size(); ++i) dir[k][i] = pg[k][i] + beta * dir[k][i];
        }
        out.fields = std::move(f);
        out.value = std::exp(L);
        out.rel_gradient = rel;
        out.iterations = it;
        return out;
    }

private:
    static double dot_all(const Fields& a, const Fields& b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += dot(a[k], b[k]);
        return s;
    }

    void normalize(Fields& f) const {
        double m = 0.0;
        for (auto& x : f) {
            for (double& e : x) e = std::abs(e);
            x.back() = 0.0;
            m += mass_of(g_, x);
        }
        const double s = 1.0 / std::sqrt(m);
        for (auto& x : f) scale_to(x, s);
    }

    Fields precondition(const Fields& f, const Fields& grad) const {
        Fields out(f.size());
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double B = mass_of(g_, f[k]);
            const double A = kinetic_of(g_, f[k]);
            const DualNorm pre(g_, B > 0.0 && A > 0.0 ? A / B : 1.0);
            pre.solve(grad[k], out[k]);
        }
        return out;
    }

    bool rearrange(Fields& f, double& L) const {
        Fields star = f;
        double moved = 0.0, top = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            star[k] = rearrange_decreasing(RadialField{K_.grid(), f[k], std::nullopt}).values;
            for (std::size_t i = 0; i < f[k].size(); ++i) {
                moved = std::max(moved, std::abs(star[k][i] - f[k][i]));
                top = std::max(top, std::abs(f[k][i]));
            }
        }
        if (!(moved > 1e-13 * top)) return false;
        normalize(star);
        const double Ls = obj_.log_value(star);
        if (!(Ls > L)) return false;
        f.swap(star);
        L = Ls;
        return true;
    }

    bool scale_search(Fields& f, double& L) const {
        auto value = [&](double s, Fields* keep) {
            Fields d(f.size());
            for (std::size_t k = 0; k < f.size(); ++k)
                d[k] = dilate(RadialField{K_.grid(), f[k], std::nullopt}, s).field.values;
            normalize(d);
            const double v = obj_.log_value(d);
            if (keep) *keep = std::move(d);
            return std::isfinite(v) ? v : -INFINITY;
        };
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = -0.5, b = 0.5;
        double c = b - phi * (b - a), d = a + phi * (b - a);
        double fc = value(c, nullptr), fd = value(d, nullptr);
        for (int k = 0; k < 24; ++k) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = value(c, nullptr);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = value(d, nullptr);
            }
        }
        Fields best;
        const double Lb = value(0.5 * (a + b), &best);
        if (!(Lb > L + 1e-14)) return false;
        f.swap(best);
        L = Lb;
        return true;
    }

    const RieszKernel& K_;
    const RadialGrid& g_;
    const RatioObjective& obj_;
};

}  // namespace

double weinstein_ratio(const RieszKernel& K, double p, const std::vector<double>& u) {
    const RadialGrid& g = *K.grid();
    const double gamma = gamma_exponent(g.N(), K.mu(), p);
    const auto up = abs_pow(u, p);
    const double D = pair_values(K, up, up);
    return D / (std::pow(kinetic_of(g, u), gamma) * std::pow(mass_of(g, u), p - gamma));
}

double coupled_ratio(const RieszKernel& K, double p, double q, const std::vector<double>& u,
                     const std::vector<double>& v) {
    const RadialGrid& g = *K.grid();
    const double gamma = gamma_exponent(g.N(), K.mu(), p) + gamma_exponent(g.N(), K.mu(), q);
    const double D = pair_values(K, abs_pow(u, p), abs_pow(v, q));
    const double A = kinetic_of(g, u) + kinetic_of(g, v);
    const double B = mass_of(g, u) + mass_of(g, v);
    return D / (std::pow(A, 0.5 * gamma) * std::pow(B, 0.5 * (p + q - gamma)));
}

double extremal_equation_residual(const RieszKernel& K, double p, const std::vector<double>& Q) {
    const RadialGrid& g = *K.grid();
    const double gamma = gamma_exponent(g.N(), K.mu(), p);
    const auto Qp = abs_pow(Q, p);
    std::vector<double> KQ;
    K.apply(Qp, KQ);
    std::vector<double> LQ;
    apply_stiffness(g, Q, LQ);
    const auto& w = g.weights();
    const std::size_t M = Q.size();
    // weak form: 2 gamma |S| L Q + 2 (p - gamma) |S| W Q - 2 |S| W (I*|Q|^p)|Q|^{p-2}Q
    std::vector<double> t1(M), t2(M), t3(M), r(M);
    for (std::size_t i = 0; i < M; ++i) {
        t1[i] = 2.0 * gamma * g.surface() * LQ[i];
        t2[i] = 2.0 * (p - gamma) * g.surface() * w[i] * Q[i];
        t3[i] = 2.0 * g.surface() * w[i] * KQ[i] * signed_pow(Q[i], p);
        r[i] = t1[i] + t2[i] - t3[i];
    }
    const DualNorm norm(g, kinetic_of(g, Q) / mass_of(g, Q));
    return norm(r) / (norm(t1) + norm(t2) + norm(t3));
}

GNResult gn_extremal_solve(int N, double mu, double p, const GridPtr& grid, const RieszKernel& K,
                           const GNConfig& config) {
    validate_dimension_order(N, mu);
    if (!(p > lower_critical(N, mu)) || !(p < upper_critical(N, mu)))
        throw InvalidInput("gn_extremal: p must lie strictly between 2_{mu,*} and 2*_mu");
    require_same_grid(*K.grid(), *grid);
    if (config.widths.empty()) throw InvalidInput("gn_extremal: at least one restart width is required");

    const WeinsteinObjective objective(K, p);
    const RatioAscent ascent(K, objective);
    std::vector<AscentRun> runs(config.widths.size());
    parallel_for(runs.size(), [&](std::size_t k) { runs[k] = ascent.run({gaussian(*grid, config.widths[k])}, config); });

    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k)
        if (runs[k].value > runs[best].value) best = k;
    GNResult res;
    double lo = runs[best].value;
    for (const auto& r : runs) {
        res.restart_values.push_back(r.value);
        lo = std::min(lo, r.value);
    }
    const AscentRun& b = runs[best];
    const std::vector<double>& u = b.fields[0];
    res.C_Np = b.value;
    res.spread = (b.value - lo) / b.value;
    res.ratio_history = b.history;
    res.iterations = b.iterations;
    res.restarts = static_cast<int>(runs.size());
    res.stale = !b.converged;
    res.maximizer = RadialField{grid, u, std::nullopt};

    const double A = kinetic_of(*grid, u);
    const double B = mass_of(*grid, u);
    const auto up = abs_pow(u, p);
    const double D = pair_values(K, up, up);
    res.lambda = std::sqrt(B / A);
    res.amplitude = std::pow(p * B * std::pow(res.lambda, N - mu) / D, 1.0 / (2.0 * p - 2.0));
    const RieszKernel KQ = K.rescaled(1.0 / res.lambda);
    res.Qp = RadialField{KQ.grid(), u, std::nullopt};
    scale_to(res.Qp.values, res.amplitude);
    res.residual = extremal_equation_residual(KQ, p, res.Qp.values);
    return res;
}

CoupledGNResult coupled_gn_estimate(int N, double mu, double p, double q, const GridPtr& grid, const RieszKernel& K,
                                    double C_Np, double C_Nq, const GNConfig& config) {
    validate_dimension_order(N, mu);
    for (double e : {p, q})
        if (!(e > lower_critical(N, mu)) || !(e < upper_critical(N, mu)))
            throw InvalidInput("coupled_gn: exponents must lie strictly between 2_{mu,*} and 2*_mu");
    require_same_grid(*K.grid(), *grid);
    const CoupledObjective objective(K, p, q);
    const RatioAscent ascent(K, objective);
    const std::vector<std::pair<double, double>> starts{{1.0, 1.0}, {0.5, 2.0}, {2.0, 0.5}};
    std::vector<AscentRun> runs(starts.size());
    parallel_for(starts.size(), [&](std::size_t k) {
        runs[k] = ascent.run({gaussian(*grid, starts[k].first), gaussian(*grid, starts[k].second)}, config);
    });
    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k)
        if (runs[k].value > runs[best].value) best = k;

    CoupledGNResult out;
    out.found = runs[best].value;
    out.iterations = runs[best].iterations;
    out.bound = vector_gn_bound(C_Np, C_Nq);
    out.clamped = out.found > out.bound;
    out.estimate = std::min(out.found, out.bound);
    return out;
}

}  // namespace chq

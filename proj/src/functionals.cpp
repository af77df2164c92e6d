#include "choquard/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chq {

namespace {

void abs_pow(const std::vector<double>& u, double p, std::vector<double>& out) {
    out.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::pow(std::abs(u[i]), p);
}

double weighted_dot(const RadialGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
    const auto& w = g.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
    return g.surface() * s;
}

// |u|^{e-2} u, finite for e > 1 at u = 0
double signed_pow(double u, double e) { return u == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(u), e - 1.0), u); }

void check_finite(double x, const char* name) {
    if (!std::isfinite(x)) throw NumericalError(std::string("non-finite energy term: ") + name);
}

}  // namespace

std::string_view to_string(Branch b) {
    switch (b) {
        case Branch::plus: return "plus";
        case Branch::minus: return "minus";
        case Branch::degenerate: return "degenerate";
    }
    return "unknown";
}

Evaluation evaluate(const ProblemParams& params, const RieszKernel& K, const std::vector<double>& u,
                    const std::vector<double>& v, bool with_gradient_data, bool with_critical) {
    const RadialGrid& g = *K.grid();
    const double ts = upper_critical(params.N, params.mu);
    Evaluation ev;
    ev.br.alpha_u = kinetic_of(g, u);
    ev.br.alpha_v = kinetic_of(g, v);
    ev.br.mass_u = mass_of(g, u);
    ev.br.mass_v = mass_of(g, v);
    if (with_critical) {
        abs_pow(u, ts, ev.abs_u_crit);
        abs_pow(v, ts, ev.abs_v_crit);
        K.apply(ev.abs_u_crit, ev.K_u_crit);
        K.apply(ev.abs_v_crit, ev.K_v_crit);
        ev.br.beta_u = weighted_dot(g, ev.K_u_crit, ev.abs_u_crit);
        ev.br.beta_v = weighted_dot(g, ev.K_v_crit, ev.abs_v_crit);
    }
    abs_pow(u, params.p, ev.abs_u_p);
    abs_pow(v, params.q, ev.abs_v_q);
    K.apply(ev.abs_u_p, ev.K_u_p);
    ev.br.delta = weighted_dot(g, ev.K_u_p, ev.abs_v_q);
    if (with_gradient_data) K.apply(ev.abs_v_q, ev.K_v_q);
    check_finite(ev.br.alpha_u, "alpha_u");
    check_finite(ev.br.alpha_v, "alpha_v");
    check_finite(ev.br.beta_u, "beta_u");
    check_finite(ev.br.beta_v, "beta_v");
    check_finite(ev.br.delta, "delta");
    return ev;
}

TermGradients term_gradients(const ProblemParams& params, const RieszKernel& K, const Evaluation& ev,
                             const std::vector<double>& u, const std::vector<double>& v) {
    const RadialGrid& g = *K.grid();
    const auto& w = g.weights();
    const double area = g.surface();
    const double ts = upper_critical(params.N, params.mu);
    const std::size_t M = u.size();
    TermGradients tg;
    apply_stiffness(g, u, tg.alpha_u);
    apply_stiffness(g, v, tg.alpha_v);
    tg.beta_u.assign(M, 0.0);
    tg.beta_v.assign(M, 0.0);
    tg.delta_u.assign(M, 0.0);
    tg.delta_v.assign(M, 0.0);
    tg.mass_u.assign(M, 0.0);
    tg.mass_v.assign(M, 0.0);
    const bool crit = !ev.K_u_crit.empty();
    for (std::size_t i = 0; i < M; ++i) {
        tg.alpha_u[i] *= 2.0 * area;
        tg.alpha_v[i] *= 2.0 * area;
        const double aw = area * w[i];
        if (crit) {
            tg.beta_u[i] = 2.0 * ts * aw * ev.K_u_crit[i] * signed_pow(u[i], ts);
            tg.beta_v[i] = 2.0 * ts * aw * ev.K_v_crit[i] * signed_pow(v[i], ts);
        }
        tg.delta_u[i] = params.p * aw * ev.K_v_q[i] * signed_pow(u[i], params.p);
        tg.delta_v[i] = params.q * aw * ev.K_u_p[i] * signed_pow(v[i], params.q);
        tg.mass_u[i] = 2.0 * aw * u[i];
        tg.mass_v[i] = 2.0 * aw * v[i];
    }
    return tg;
}

double J_of(const EnergyBreakdown& br, const ProblemParams& params) {
    const double ts = upper_critical(params.N, params.mu);
    return 0.5 * br.alpha() - br.beta() / (2.0 * ts) - params.nu * br.delta;
}

double P_of(const EnergyBreakdown& br, const ProblemParams& params) {
    const double g = gamma_exponent(params.N, params.mu, params.p) + gamma_exponent(params.N, params.mu, params.q);
    return br.alpha() - br.beta() - params.nu * g * br.delta;
}

EnergyResult energy(const ProblemParams& params, const RieszKernel& K, const RadialField& u, const RadialField& v) {
    require_same_grid(*K.grid(), *u.grid);
    require_same_grid(*K.grid(), *v.grid);
    const Evaluation ev = evaluate(params, K, u.values, v.values, false);
    return {J_of(ev.br, params), ev.br};
}

PohozaevResult pohozaev_from(const EnergyBreakdown& br, const ProblemParams& params) {
    PohozaevResult r;
    r.P = P_of(br, params);
    r.normalized = r.P / std::max(br.alpha(), 1e-30);
    return r;
}

PohozaevResult pohozaev(const ProblemParams& params, const RieszKernel& K, const RadialField& u,
                        const RadialField& v) {
    return pohozaev_from(energy(params, K, u, v).breakdown, params);
}

FiberValues fiber(const EnergyBreakdown& br, const ProblemParams& params, double t) {
    const double ts = upper_critical(params.N, params.mu);
    const double g = gamma_exponent(params.N, params.mu, params.p) + gamma_exponent(params.N, params.mu, params.q);
    const double e2 = std::exp(2.0 * t) * br.alpha();
    const double ec = std::exp(2.0 * ts * t) * br.beta();
    const double eg = params.nu * std::exp(g * t) * br.delta;
    FiberValues f;
    f.psi = 0.5 * e2 - ec / (2.0 * ts) - eg;
    f.d1 = e2 - ec - g * eg;
    f.d2 = 2.0 * e2 - 2.0 * ts * ec - g * g * eg;
    return f;
}

namespace {

struct ReducedDerivative {
    // f(t) = e^{-2t} Psi'(t) = alpha - beta e^{m t} - c e^{(g-2) t}
    double alpha, beta, c, m, g;
    double operator()(double t) const { return alpha - beta * std::exp(m * t) - c * std::exp((g - 2.0) * t); }
    double slope(double t) const { return -m * beta * std::exp(m * t) - c * (g - 2.0) * std::exp((g - 2.0) * t); }
};

double refine_root(const ReducedDerivative& f, double lo, double hi) {
    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        const double d = f.slope(t);
        if (d == 0.0) break;
        const double next = t - f(t) / d;
        if (!(next >= lo - 1e-12 && next <= hi + 1e-12)) break;
        t = next;
    }
    return t;
}

template <class Pred>
double walk(const ReducedDerivative& f, double start, double direction, Pred done) {
    double step = 1.0;
    double t = start;
    for (int it = 0; it < 80; ++it) {
        if (done(f(t))) return t;
        t = start + direction * step;
        step *= 2.0;
        if (std::abs(t - start) > 1e4) break;
    }
    throw NumericalError("fiber root bracketing failed (fiber degenerate)");
}

}  // namespace

FiberReport fiber_critical_points(const EnergyBreakdown& br, const ProblemParams& params) {
    const double ts = upper_critical(params.N, params.mu);
    const double g = gamma_exponent(params.N, params.mu, params.p) + gamma_exponent(params.N, params.mu, params.q);
    const double alpha = br.alpha();
    const double beta = br.beta();
    if (!(beta > 0.0)) throw InvalidInput("fiber map requires beta > 0 (critical terms absent)");
    if (!(alpha > 0.0)) throw InvalidInput("fiber map requires alpha > 0");
    ReducedDerivative f{alpha, beta, params.nu * g * br.delta, 2.0 * ts - 2.0, g};
    std::vector<double> roots;

    if (f.c == 0.0) {
        roots.push_back(std::log(alpha / beta) / f.m);
    } else if (std::abs(g - 2.0) <= 1e-12) {
        if (alpha - f.c > 0.0) roots.push_back(std::log((alpha - f.c) / beta) / f.m);
    } else {
        const double guess = std::log(alpha / beta) / f.m;
        const bool has_max = f.c * (g - 2.0) < 0.0;
        double left_limit;
        if (g < 2.0)
            left_limit = f.c > 0.0 ? -1.0 : 1.0;
        else
            left_limit = alpha;
        if (left_limit > 0.0) {
            double start = guess;
            if (has_max) start = std::log(-f.c * (g - 2.0) / (f.m * beta)) / (f.m - g + 2.0);
            const double lo = walk(f, start, -1.0, [](double v) { return v > 0.0; });
            const double hi = walk(f, lo, 1.0, [](double v) { return v < 0.0; });
            roots.push_back(refine_root(f, lo, hi));
        } else if (has_max) {
            const double tm = std::log(-f.c * (g - 2.0) / (f.m * beta)) / (f.m - g + 2.0);
            const double fmax = f(tm);
            if (fmax > 1e-14 * alpha) {
                const double lo = walk(f, tm, -1.0, [](double v) { return v < 0.0; });
                const double hi = walk(f, tm, 1.0, [](double v) { return v < 0.0; });
                roots.push_back(refine_root(f, lo, tm));
                roots.push_back(refine_root(f, tm, hi));
            } else if (fmax >= -1e-14 * alpha) {
                roots.push_back(tm);
            }
        }
    }

    FiberReport rep;
    for (double t : roots) {
        const FiberValues fv = fiber(br, params, t);
        rep.roots.push_back(t);
        rep.values.push_back(fv.psi);
        // Psi'' = e^{2t} f'(t) at a root
        const double curv = f.slope(t);
        if (std::abs(curv) < 1e-10 * alpha)
            rep.kinds.push_back(Branch::degenerate);
        else
            rep.kinds.push_back(curv > 0.0 ? Branch::plus : Branch::minus);
    }
    return rep;
}

DualNorm::DualNorm(const RadialGrid& grid, double kappa) : area_(grid.surface()) {
    const int n = grid.M() - 1;
    const auto& c = grid.stiffness();
    const auto& w = grid.weights();
    std::vector<double> d(n), e(n, 0.0);
    for (int i = 0; i < n; ++i) {
        d[i] = kappa * w[i] + c[i] + (i > 0 ? c[i - 1] : 0.0);
        if (i + 1 < n) e[i] = -c[i];
    }
    // Thomas factorization: diag_ holds pivots, off_ the multipliers.
    diag_.resize(n);
    off_ = e;
    diag_[0] = d[0];
    for (int i = 1; i < n; ++i) diag_[i] = d[i] - e[i - 1] * e[i - 1] / diag_[i - 1];
}

void DualNorm::solve(const std::vector<double>& g, std::vector<double>& x) const {
    const int n = static_cast<int>(diag_.size());
    x.assign(g.size(), 0.0);
    std::vector<double> y(n);
    y[0] = g[0];
    for (int i = 1; i < n; ++i) y[i] = g[i] - off_[i - 1] / diag_[i - 1] * y[i - 1];
    x[n - 1] = y[n - 1] / diag_[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = (y[i] - off_[i] * x[i + 1]) / diag_[i];
    for (int i = 0; i < n; ++i) x[i] /= area_;
}

double DualNorm::operator()(const std::vector<double>& g) const {
    std::vector<double> x;
    solve(g, x);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) s += g[i] * x[i];
    return std::sqrt(std::max(s, 0.0));
}

ELResult el_residual_and_multipliers(const ProblemParams& params, const RieszKernel& K, const RadialField& u,
                                     const RadialField& v, bool with_critical) {
    require_same_grid(*K.grid(), *u.grid);
    require_same_grid(*K.grid(), *v.grid);
    const double ts = upper_critical(params.N, params.mu);
    const Evaluation ev = evaluate(params, K, u.values, v.values, true, with_critical);
    const TermGradients tg = term_gradients(params, K, ev, u.values, v.values);
    const EnergyBreakdown& br = ev.br;
    ELResult out;
    out.lambda1_defined = br.mass_u > 0.0;
    out.lambda2_defined = br.mass_v > 0.0;
    out.lambda1 = out.lambda1_defined ? (-br.alpha_u + br.beta_u + params.nu * params.p * br.delta) / br.mass_u
                                      : std::numeric_limits<double>::quiet_NaN();
    out.lambda2 = out.lambda2_defined ? (-br.alpha_v + br.beta_v + params.nu * params.q * br.delta) / br.mass_v
                                      : std::numeric_limits<double>::quiet_NaN();

    auto residual = [&](const std::vector<double>& ga, const std::vector<double>& gb, const std::vector<double>& gd,
                        const std::vector<double>& gm, double lambda, double kinetic, double mass) {
        if (!(mass > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const DualNorm norm(*K.grid(), std::max(kinetic / mass, 1e-12));
        const std::size_t M = ga.size();
        std::vector<double> r(M), t1(M), t2(M), t3(M), t4(M);
        for (std::size_t i = 0; i < M; ++i) {
            t1[i] = 0.5 * ga[i];
            t2[i] = gb[i] / (2.0 * ts);
            t3[i] = params.nu * gd[i];
            t4[i] = 0.5 * lambda * gm[i];
            r[i] = t1[i] - t2[i] - t3[i] + t4[i];
        }
        const double scale = norm(t1) + norm(t2) + norm(t3) + norm(t4);
        return scale > 0.0 ? norm(r) / scale : 0.0;
    };
    out.res1 = residual(tg.alpha_u, tg.beta_u, tg.delta_u, tg.mass_u, out.lambda1, br.alpha_u, br.mass_u);
    out.res2 = residual(tg.alpha_v, tg.beta_v, tg.delta_v, tg.mass_v, out.lambda2, br.alpha_v, br.mass_v);
    return out;
}

ScalarK scalar_K_and_max(const RieszKernel& K, const RadialField& u) {
    require_same_grid(*K.grid(), *u.grid);
    const RadialGrid& g = *K.grid();
    const double ts = upper_critical(g.N(), K.mu());
    const double a = kinetic_of(g, u.values);
    std::vector<double> c;
    abs_pow(u.values, ts, c);
    const double d = pair_values(K, c, c);
    if (!(a > 0.0) || !(d > 0.0)) throw InvalidInput("scalar_K_and_max: zero field");
    ScalarK out;
    out.K = 0.5 * a - d / (2.0 * ts);
    out.fiber_max = (ts - 1.0) / (2.0 * ts) * std::pow(a, ts / (ts - 1.0)) / std::pow(d, 1.0 / (ts - 1.0));
    return out;
}

double cutoff_profile(double r, double delta) {
    if (r <= delta) return 1.0;
    if (r >= 2.0 * delta) return 0.0;
    const double x = (r - delta) / delta;
    return 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

BubbleFields bubble(const GridPtr& grid, double mu, double eps, double cutoff_delta) {
    const int N = grid->N();
    validate_dimension_order(N, mu);
    if (!(eps > 0.0)) throw InvalidInput("bubble: eps must be > 0");
    if (!(cutoff_delta > 0.0) || !(cutoff_delta < 0.5 * grid->R_max()))
        throw InvalidInput("bubble: cutoff delta must lie in (0, R_max/2)");
    const SharpConstants sc = sharp_constants(N, mu);
    const double C = hls_constant(N, mu);
    const double amp = std::pow(N * (N - 2.0), 0.25 * (N - 2.0)) * std::pow(eps, 0.5 * (N - 2.0));
    // Amplitude that makes U_tilde solve -Δu = (|x|^{-mu} * |u|^{2*})|u|^{2*-2}u, so that
    // |∇U_tilde|_2^2 = S_HL^{2*/(2*-1)}.
    const double tilde = std::pow(sc.S, (N - mu) * (2.0 - N) / (4.0 * (N - mu + 2.0))) *
                         std::pow(C, (2.0 - N) / (2.0 * (N - mu + 2.0)));
    BubbleFields b;
    b.U = sample(grid, [&](double r) { return amp * std::pow(eps * eps + r * r, -0.5 * (N - 2.0)); });
    b.U.tail_exponent = N - 2.0;
    b.U_tilde = b.U;
    for (double& x : b.U_tilde.values) x *= tilde;
    b.eta = b.U;
    b.eta.tail_exponent.reset();
    for (int i = 0; i < grid->M(); ++i) b.eta.values[i] *= cutoff_profile(grid->nodes()[i], cutoff_delta);
    return b;
}

}  // namespace chq

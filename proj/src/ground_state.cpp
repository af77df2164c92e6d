#include "choquard/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

namespace chq {

void validate(const SolveConfig& c) {
    if (c.max_iter < 0) throw InvalidInput("solve.max_iter must be >= 0");
    if (!(c.step0 > 0.0)) throw InvalidInput("solve.step0 must be > 0");
    if (!(c.armijo_ratio > 0.0 && c.armijo_ratio < 1.0)) throw InvalidInput("solve.armijo_ratio must lie in (0,1)");
    if (!(c.armijo_c > 0.0 && c.armijo_c < 1.0)) throw InvalidInput("solve.armijo_c must lie in (0,1)");
    if (!(c.tol_P > 0.0)) throw InvalidInput("solve.tol_P must be > 0");
    if (!(c.tol_grad > 0.0)) throw InvalidInput("solve.tol_grad must be > 0");
    if (!(c.tol_el > 0.0)) throw InvalidInput("solve.tol_el must be > 0");
    if (c.R0 && !(*c.R0 > 0.0)) throw InvalidInput("solve.R0 must be > 0");
    if (c.init != "gaussian" && c.init != "bubble") throw InvalidInput("solve.init must be \"gaussian\" or \"bubble\"");
    if (c.checkpoint_every < 0) throw InvalidInput("solve.checkpoint_every must be >= 0");
    if (c.checkpoint_every > 0 && c.checkpoint_path.empty())
        throw InvalidInput("solve.checkpoint_path required when checkpoint_every > 0");
}

namespace {

double wdot(const RadialGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
    const auto& w = g.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
    return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void normalize_mass(const RadialGrid& g, std::vector<double>& u, double target_mass) {
    const double m = mass_of(g, u);
    if (!(m > 0.0)) throw NumericalError("field collapsed to zero mass");
    const double s = std::sqrt(target_mass / m);
    for (double& x : u) x *= s;
}

// Uniform double in [0,1) from the raw 64-bit stream; identical on every platform.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Fiber-reduced objective: value at the selected root and the envelope gradient.
struct Reduced {
    ProblemParams params;
    const RieszKernel* K = nullptr;
    bool limit = false;
    MassClass cls = MassClass::subcritical;
    double gamma = 0.0;
    double ts = 0.0;

    struct Point {
        Evaluation ev;
        double t = 0.0;
        double E = 0.0;
    };

    // Returns false when the fiber does not have the expected structure.
    bool root(const EnergyBreakdown& br, double& t, std::string* why) const {
        if (limit) {
            if (!(br.delta > 0.0) || !(br.alpha() > 0.0)) {
                if (why) *why = "limit fiber requires alpha > 0 and delta > 0";
                return false;
            }
            t = std::log(br.alpha() / (gamma * br.delta)) / (gamma - 2.0);
            return std::isfinite(t);
        }
        FiberReport fr;
        try {
            fr = fiber_critical_points(br, params);
        } catch (const std::exception& e) {
            if (why) *why = e.what();
            return false;
        }
        if (cls == MassClass::subcritical) {
            if (fr.roots.size() != 2 || fr.kinds[0] != Branch::plus || fr.kinds[1] != Branch::minus) {
                if (why) *why = "near-degenerate landscape: fiber does not have two separated critical points";
                return false;
            }
            t = fr.roots[0];
            return true;
        }
        if (fr.roots.size() != 1 || fr.kinds[0] != Branch::minus) {
            if (why) *why = "fiber root bracketing failed: expected a single maximum";
            return false;
        }
        t = fr.roots[0];
        return true;
    }

    double psi(const EnergyBreakdown& br, double t) const {
        if (limit) return 0.5 * std::exp(2.0 * t) * br.alpha() - std::exp(gamma * t) * br.delta;
        return fiber(br, params, t).psi;
    }

    bool eval(const std::vector<double>& u, const std::vector<double>& v, bool grad_data, Point& pt,
              std::string* why) const {
        pt.ev = evaluate(params, *K, u, v, grad_data, !limit);
        if (!root(pt.ev.br, pt.t, why)) return false;
        pt.E = psi(pt.ev.br, pt.t);
        return std::isfinite(pt.E);
    }

    void complete(Point& pt, const std::vector<double>& v) const {
        if (!pt.ev.K_v_q.empty()) return;
        std::vector<double> a;
        a.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::pow(std::abs(v[i]), params.q);
        pt.ev.abs_v_q = a;
        K->apply(a, pt.ev.K_v_q);
    }

    void gradient(const Point& pt, const std::vector<double>& u, const std::vector<double>& v, std::vector<double>& gu,
                  std::vector<double>& gv) const {
        const TermGradients tg = term_gradients(params, *K, pt.ev, u, v);
        const double e2 = std::exp(2.0 * pt.t);
        const double ec = limit ? 0.0 : std::exp(2.0 * ts * pt.t) / (2.0 * ts);
        const double eg = params.nu * std::exp(gamma * pt.t);
        const std::size_t M = u.size();
        gu.resize(M);
        gv.resize(M);
        for (std::size_t i = 0; i < M; ++i) {
            gu[i] = 0.5 * e2 * tg.alpha_u[i] - ec * tg.beta_u[i] - eg * tg.delta_u[i];
            gv[i] = 0.5 * e2 * tg.alpha_v[i] - ec * tg.beta_v[i] - eg * tg.delta_v[i];
        }
        gu.back() = 0.0;
        gv.back() = 0.0;
    }
};

// Preconditioned tangent gradient for one component: x = P^{-1}g - c P^{-1}(W u).
struct Tangent {
    std::vector<double> pg;
    double gpg = 0.0;
};

Tangent precondition(const RadialGrid& grid, const std::vector<double>& u, const std::vector<double>& g, double kinetic,
                     double mass, double metric_scale) {
    const DualNorm P(grid, std::max(kinetic / mass, 1e-12));
    const std::size_t M = u.size();
    std::vector<double> wu(M), x, y;
    const auto& w = grid.weights();
    for (std::size_t i = 0; i < M; ++i) wu[i] = grid.surface() * w[i] * u[i];
    wu.back() = 0.0;
    P.solve(g, x);
    P.solve(wu, y);
    const double c = dot(wu, x) / dot(wu, y);
    Tangent t;
    t.pg.resize(M);
    for (std::size_t i = 0; i < M; ++i) t.pg[i] = (x[i] - c * y[i]) / metric_scale;
    t.pg.back() = 0.0;
    t.gpg = dot(g, t.pg);
    return t;
}

// z^T |S|(L + kappa W) z
double metric_norm2(const RadialGrid& grid, const std::vector<double>& z, double kappa) {
    return grid.surface() * (kinetic_of(grid, z) / grid.surface() + kappa * wdot(grid, z, z));
}

// Removes the W-component along u (tangent to the mass sphere through u).
void project_w(const RadialGrid& grid, const std::vector<double>& u, std::vector<double>& d) {
    const double c = wdot(grid, d, u) / wdot(grid, u, u);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= c * u[i];
    d.back() = 0.0;
}

struct LoopState {
    std::vector<double> u, v;
    std::vector<double> du, dv;    // previous direction (empty: none)
    std::vector<double> pgu, pgv;  // previous preconditioned gradient
    double gpg = 0.0;
    double tau = 1.0;
    int it = 0;
    int ball_warnings = 0;
    std::vector<TraceEntry> trace;
};

std::string grid_signature(const RadialGrid& g) {
    std::ostringstream os;
    os.precision(17);
    os << g.N() << ',' << g.M() << ',' << g.R_max() << ',' << g.stretch();
    return os.str();
}

void write_checkpoint(const std::string& path, const LoopState& s, const ProblemParams& p, const RadialGrid& g,
                      bool limit) {
    nlohmann::json j;
    j["kind"] = "choquard-solver-checkpoint";
    j["limit"] = limit;
    j["params"] = {{"N", p.N}, {"mu", p.mu}, {"p", p.p}, {"q", p.q}, {"nu", p.nu}, {"a", p.a}, {"b", p.b}};
    j["grid"] = grid_signature(g);
    j["it"] = s.it;
    j["tau"] = s.tau;
    j["gpg"] = s.gpg;
    j["ball_warnings"] = s.ball_warnings;
    j["u"] = s.u;
    j["v"] = s.v;
    j["du"] = s.du;
    j["dv"] = s.dv;
    j["pgu"] = s.pgu;
    j["pgv"] = s.pgv;
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& e : s.trace) tr.push_back({e.J, e.P_abs, e.step});
    j["trace"] = tr;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IOError("cannot write checkpoint: " + tmp);
        os << j.dump() << '\n';
        if (!os) throw IOError("checkpoint write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

LoopState read_checkpoint(const std::string& path, const ProblemParams& p, const RadialGrid& g, bool limit) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw InvalidInput("malformed checkpoint " + path + ": " + e.what());
    }
    if (j.value("kind", "") != "choquard-solver-checkpoint") throw InvalidInput("not a solver checkpoint: " + path);
    const auto& jp = j.at("params");
    const bool same = jp.at("N").get<int>() == p.N && jp.at("mu").get<double>() == p.mu &&
                      jp.at("p").get<double>() == p.p && jp.at("q").get<double>() == p.q &&
                      jp.at("nu").get<double>() == p.nu && jp.at("a").get<double>() == p.a &&
                      jp.at("b").get<double>() == p.b && j.at("grid").get<std::string>() == grid_signature(g) &&
                      j.at("limit").get<bool>() == limit;
    if (!same) throw InvalidInput("checkpoint " + path + " was written for different params or grid");
    LoopState s;
    s.it = j.at("it");
    s.tau = j.at("tau");
    s.gpg = j.at("gpg");
    s.ball_warnings = j.at("ball_warnings");
    s.u = j.at("u").get<std::vector<double>>();
    s.v = j.at("v").get<std::vector<double>>();
    s.du = j.at("du").get<std::vector<double>>();
    s.dv = j.at("dv").get<std::vector<double>>();
    s.pgu = j.at("pgu").get<std::vector<double>>();
    s.pgv = j.at("pgv").get<std::vector<double>>();
    for (const auto& e : j.at("trace")) s.trace.push_back({e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
    if (static_cast<int>(s.u.size()) != g.M() || s.v.size() != s.u.size())
        throw InvalidInput("checkpoint " + path + " field length does not match the grid");
    return s;
}

SolveReport run(const ProblemParams& params_in, const RieszKernel& K, const SolveConfig& config,
                const std::optional<InitialFields>& warm, bool limit) {
    validate(config);
    ProblemParams params = params_in;
    if (limit) params.nu = 1.0;
    validate(params);
    const RadialGrid& grid = *K.grid();
    if (grid.N() != params.N) throw InvalidInput("kernel dimension does not match params.N");
    if (std::abs(K.mu() - params.mu) > 1e-14) throw InvalidInput("kernel mu does not match params.mu");

    const DerivedExponents de = derived_exponents(params);
    Reduced R;
    R.params = params;
    R.K = &K;
    R.limit = limit;
    R.cls = de.mass_class;
    R.gamma = de.gamma();
    R.ts = de.two_star_mu;
    if (limit && de.mass_class == MassClass::critical)
        throw InvalidInput("limit system requires p + q away from the L2-critical value (mass class is critical)");

    const double mass_u = params.a * params.a;
    const double mass_v = params.b * params.b;

    LoopState s;
    if (!config.resume_path.empty()) {
        s = read_checkpoint(config.resume_path, params, grid, limit);
    } else {
        InitialFields init = warm ? *warm : initial_fields(grid, params, config);
        if (static_cast<int>(init.u.size()) != grid.M() || static_cast<int>(init.v.size()) != grid.M())
            throw InvalidInput("initial fields do not match the grid size");
        s.u = std::move(init.u);
        s.v = std::move(init.v);
        if (config.positivity) {
            for (double& x : s.u) x = std::abs(x);
            for (double& x : s.v) x = std::abs(x);
        }
        s.u.back() = 0.0;
        s.v.back() = 0.0;
        normalize_mass(grid, s.u, mass_u);
        normalize_mass(grid, s.v, mass_v);
        s.tau = config.step0;
    }

    Reduced::Point cur;
    std::string why;
    if (!R.eval(s.u, s.v, true, cur, &why)) throw NumericalError("initial point rejected: " + why);

    SolveReport rep;
    std::vector<double> gu, gv;
    bool stalled = false;
    double grad_rel = std::numeric_limits<double>::infinity();

    while (true) {
        if (config.checkpoint_every > 0 && s.it > 0 && s.it % config.checkpoint_every == 0)
            write_checkpoint(config.checkpoint_path, s, params, grid, limit);

        R.complete(cur, s.v);
        R.gradient(cur, s.u, s.v, gu, gv);
        const double ms = std::exp(2.0 * cur.t);
        Tangent tu = precondition(grid, s.u, gu, cur.ev.br.alpha_u, cur.ev.br.mass_u, ms);
        Tangent tv = precondition(grid, s.v, gv, cur.ev.br.alpha_v, cur.ev.br.mass_v, ms);
        // The continuum functional is invariant under joint dilation; the discrete one drifts
        // slowly along it, so that direction is removed from the step.
        std::vector<double> zu = dilation_generator(grid, s.u), zv = dilation_generator(grid, s.v);
        project_w(grid, s.u, zu);
        project_w(grid, s.v, zv);
        const double zz = ms * (metric_norm2(grid, zu, cur.ev.br.alpha_u / cur.ev.br.mass_u) +
                                metric_norm2(grid, zv, cur.ev.br.alpha_v / cur.ev.br.mass_v));
        const double gz = dot(gu, zu) + dot(gv, zv);
        for (std::size_t i = 0; i < zu.size(); ++i) {
            tu.pg[i] -= gz / zz * zu[i];
            tv.pg[i] -= gz / zz * zv[i];
        }
        const double gpg_u = dot(gu, tu.pg), gpg_v = dot(gv, tv.pg);
        const double gpg = gpg_u + gpg_v;
        // Per-component Riemannian gradient norm against the kinetic scale e^{2t} alpha_c.
        grad_rel = std::max(std::sqrt(std::max(gpg_u, 0.0) / (ms * cur.ev.br.alpha_u)),
                            std::sqrt(std::max(gpg_v, 0.0) / (ms * cur.ev.br.alpha_v)));
        if (grad_rel <= config.tol_grad || s.it >= config.max_iter) break;

        std::vector<double> du(s.u.size()), dv(s.v.size());
        double beta = 0.0;
        if (!s.du.empty() && s.gpg > 0.0) {
            double num = 0.0;
            for (std::size_t i = 0; i < gu.size(); ++i)
                num += gu[i] * (tu.pg[i] - s.pgu[i]) + gv[i] * (tv.pg[i] - s.pgv[i]);
            beta = std::max(0.0, num / s.gpg);
        }
        for (std::size_t i = 0; i < du.size(); ++i) {
            du[i] = -tu.pg[i] + (beta > 0.0 ? beta * s.du[i] : 0.0);
            dv[i] = -tv.pg[i] + (beta > 0.0 ? beta * s.dv[i] : 0.0);
        }
        if (beta > 0.0) {
            project_w(grid, s.u, du);
            project_w(grid, s.v, dv);
        }
        double slope = dot(gu, du) + dot(gv, dv);
        if (!(slope < 0.0)) {
            for (std::size_t i = 0; i < du.size(); ++i) {
                du[i] = -tu.pg[i];
                dv[i] = -tv.pg[i];
            }
            slope = -gpg;
        }

        double tau = std::min(2.0 * s.tau, config.step0);
        Reduced::Point trial;
        std::vector<double> nu_(s.u.size()), nv_(s.v.size());
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < du.size(); ++i) {
                nu_[i] = s.u[i] + tau * du[i];
                nv_[i] = s.v[i] + tau * dv[i];
                if (config.positivity) {
                    nu_[i] = std::abs(nu_[i]);
                    nv_[i] = std::abs(nv_[i]);
                }
            }
            normalize_mass(grid, nu_, mass_u);
            normalize_mass(grid, nv_, mass_v);
            if (R.eval(nu_, nv_, false, trial, nullptr) &&
                trial.E <= cur.E + config.armijo_c * tau * slope) {
                accepted = true;
                break;
            }
            tau *= config.armijo_ratio;
        }
        if (!accepted) {
            stalled = true;
            break;
        }
        s.u.swap(nu_);
        s.v.swap(nv_);
        s.du = std::move(du);
        s.dv = std::move(dv);
        s.pgu = tu.pg;
        s.pgv = tv.pg;
        s.gpg = gpg;
        s.tau = tau;
        cur = std::move(trial);
        ++s.it;
        if (config.R0 && std::exp(2.0 * cur.t) * cur.ev.br.alpha() > (*config.R0) * (*config.R0)) ++s.ball_warnings;
        if (config.keep_trace) {
            const double Pd = std::abs(limit ? 0.0 : fiber(cur.ev.br, params, cur.t).d1);
            s.trace.push_back({cur.E, Pd, tau});
        }
    }

    // Finalize on the dilated grid t*(u, v).
    const double t = cur.t;
    const double lam = std::exp(-t);
    const RieszKernel Kt = K.rescaled(lam);
    const double amp = std::exp(0.5 * params.N * t);
    rep.u.grid = Kt.grid();
    rep.v.grid = Kt.grid();
    rep.u.values = s.u;
    rep.v.values = s.v;
    for (double& x : rep.u.values) x *= amp;
    for (double& x : rep.v.values) x *= amp;
    const Evaluation ev = evaluate(params, Kt, rep.u.values, rep.v.values, false, !limit);
    rep.breakdown = ev.br;
    if (limit) {
        rep.J = 0.5 * ev.br.alpha() - ev.br.delta;
        const double Pl = ev.br.alpha() - R.gamma * ev.br.delta;
        rep.pohozaev_residual = std::abs(Pl) / ev.br.alpha();
        rep.psi_curvature = 2.0 * ev.br.alpha() - R.gamma * R.gamma * ev.br.delta;
        rep.m_tilde = rep.J;
        rep.D0 = ev.br.delta / std::pow(ev.br.alpha(), 0.5 * R.gamma);
    } else {
        rep.J = J_of(ev.br, params);
        rep.pohozaev_residual = pohozaev_from(ev.br, params).normalized;
        rep.pohozaev_residual = std::abs(rep.pohozaev_residual);
        rep.psi_curvature = fiber(ev.br, params, 0.0).d2;
    }
    if (std::abs(rep.psi_curvature) < 1e-10 * ev.br.alpha())
        rep.branch = Branch::degenerate;
    else
        rep.branch = rep.psi_curvature > 0.0 ? Branch::plus : Branch::minus;
    const ELResult el = el_residual_and_multipliers(params, Kt, rep.u, rep.v, !limit);
    rep.lambda1 = el.lambda1;
    rep.lambda2 = el.lambda2;
    rep.res1 = el.res1;
    rep.res2 = el.res2;
    rep.gradient_residual = grad_rel;
    rep.iterations = s.it;
    rep.trace = std::move(s.trace);
    rep.t_star = t;
    rep.ball_warnings = s.ball_warnings;
    rep.base_u = s.u;
    rep.base_v = s.v;

    const bool el_ok = rep.res1 <= config.tol_el && rep.res2 <= config.tol_el;
    const bool p_ok = rep.pohozaev_residual <= config.tol_P;
    rep.converged = el_ok && p_ok;
    std::ostringstream msg;
    msg.precision(3);
    if (rep.converged)
        msg << "converged";
    else
        msg << "not converged";
    msg << " after " << rep.iterations << " iterations";
    if (stalled) msg << "; line search exhausted";
    if (s.it >= config.max_iter && grad_rel > config.tol_grad) msg << "; iteration budget reached";
    msg << "; gradient " << std::scientific << grad_rel << ", EL residuals " << rep.res1 << ", " << rep.res2
        << ", |P|/alpha " << rep.pohozaev_residual;
    rep.message = msg.str();
    return rep;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> project_tangent(const RadialGrid& grid, const std::vector<double>& u,
                                                                    const std::vector<double>& v,
                                                                    const std::vector<double>& grad_u,
                                                                    const std::vector<double>& grad_v) {
    if (u.size() != grad_u.size() || v.size() != grad_v.size() || static_cast<int>(u.size()) != grid.M())
        throw InvalidInput("project_tangent: size mismatch");
    auto proj = [&](const std::vector<double>& f, const std::vector<double>& g) {
        const double ff = wdot(grid, f, f);
        if (!(ff > 0.0)) throw InvalidInput("project_tangent: field must be nonzero");
        const double c = wdot(grid, g, f) / ff;
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] - c * f[i];
        return out;
    };
    return {proj(u, grad_u), proj(v, grad_v)};
}

InitialFields initial_fields(const RadialGrid& grid, const ProblemParams& params, const SolveConfig& config) {
    std::mt19937_64 rng(config.seed);
    const double wu = std::exp(-0.3 + 0.6 * unit(rng));
    const double wv = std::exp(-0.3 + 0.6 * unit(rng));
    const double R = grid.R_max();
    const auto& r = grid.nodes();
    InitialFields f;
    f.u.resize(r.size());
    f.v.resize(r.size());
    const double n = params.N;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double cut = cutoff_profile(r[i] / R, 0.5);
        f.u[i] = std::exp(-0.5 * r[i] * r[i] / (wu * wu)) * cut;
        if (config.init == "bubble") {
            const double eps = 0.2 * wv;
            f.v[i] = std::pow(eps * eps + r[i] * r[i], -0.5 * (n - 2.0)) * cutoff_profile(r[i], 2.0);
        } else {
            f.v[i] = std::exp(-0.5 * r[i] * r[i] / (wv * wv)) * cut;
        }
    }
    f.u.back() = 0.0;
    f.v.back() = 0.0;
    normalize_mass(grid, f.u, params.a * params.a);
    normalize_mass(grid, f.v, params.b * params.b);
    return f;
}

SolveReport solve_ground_state(const ProblemParams& params, const RieszKernel& K, const SolveConfig& config,
                               const std::optional<InitialFields>& warm) {
    if (!(params.nu > 0.0)) throw InvalidInput("solve requires nu > 0");
    return run(params, K, config, warm, false);
}

SolveReport solve_limit_system(const ProblemParams& params, const RieszKernel& K, const SolveConfig& config,
                               const std::optional<InitialFields>& warm) {
    return run(params, K, config, warm, true);
}

}  // namespace chq

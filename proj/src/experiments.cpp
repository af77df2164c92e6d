#include "choquard/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "choquard/functionals.hpp"
#include "choquard/util.hpp"

namespace chq {

GridPtr make_grid(int N, const GridSpec& spec) { return RadialGrid::build(N, spec.M, spec.R_max, spec.stretch); }

RieszKernel make_kernel(const GridPtr& grid, double mu, const std::string& cache_dir) {
    return RieszKernel::build_cached(grid, mu, 1.0, cache_dir);
}

ConstantsTable compute_constants(const ProblemParams& params, const ConstantsOptions& o) {
    ConstantsTable t = base_constants(params);
    if (o.C_Np) t.C_Np = o.C_Np;
    if (o.C_Nq) t.C_Nq = o.C_Nq;
    const bool need = o.need_gn && derived_exponents(params).mass_class != MassClass::supercritical;
    if (need && (!t.C_Np || !t.C_Nq)) {
        const GridPtr g = make_grid(params.N, o.gn_grid);
        const RieszKernel K = make_kernel(g, params.mu, o.kernel_cache);
        if (!t.C_Np) t.C_Np = gn_extremal_solve(params.N, params.mu, params.p, g, K, o.gn).C_Np;
        if (!t.C_Nq) {
            if (params.q == params.p)
                t.C_Nq = t.C_Np;
            else
                t.C_Nq = gn_extremal_solve(params.N, params.mu, params.q, g, K, o.gn).C_Np;
        }
    }
    if (o.C_Npq)
        t.C_Npq = o.C_Npq;
    else if (t.C_Np && t.C_Nq)
        t.C_Npq = vector_gn_bound(*t.C_Np, *t.C_Nq);
    if (t.C_Npq) fill_thresholds(params, t);
    return t;
}

namespace {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput(std::string("key \"") + key + "\" has the wrong type");
    }
}

std::vector<double> nu_list(const nlohmann::json& j) {
    std::vector<double> out;
    if (j.contains("nu_values")) {
        read_opt(j, "nu_values", out);
    } else if (j.contains("nu_range")) {
        const auto& r = j.at("nu_range");
        double lo = 0.0, hi = 0.0;
        int n = 0;
        read_opt(r, "lo", lo);
        read_opt(r, "hi", hi);
        read_opt(r, "count", n);
        out = log_spaced(lo, hi, n);
    } else {
        throw InvalidInput("missing required key \"nu_values\" (or \"nu_range\")");
    }
    if (out.empty()) throw InvalidInput("\"nu_values\" must not be empty");
    return out;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& config) {
    if (!config.is_object()) throw InvalidInput("config must be a JSON object");
    RunConfig rc;
    rc.raw = config;
    rc.params = params_from_json(config);
    validate(rc.params);
    rc.grid = grid_from_json(config.contains("grid") ? config.at("grid") : nlohmann::json());
    rc.solve = solve_config_from_json(config.contains("solve") ? config.at("solve") : nlohmann::json());
    if (config.contains("outputs")) {
        const auto& o = config.at("outputs");
        if (!o.is_object()) throw InvalidInput("\"outputs\" must be an object");
        read_opt(o, "record", rc.record_path);
        read_opt(o, "fields", rc.fields_path);
        read_opt(o, "csv", rc.csv_path);
        read_opt(o, "kernel_cache", rc.kernel_cache);
    }
    rc.constants.kernel_cache = rc.kernel_cache;
    if (config.contains("constants")) {
        const auto& c = config.at("constants");
        for (auto [key, slot] : {std::pair{"C_Np", &rc.constants.C_Np}, std::pair{"C_Nq", &rc.constants.C_Nq},
                                 std::pair{"C_Npq", &rc.constants.C_Npq}}) {
            if (!c.contains(key) || c.at(key).is_null()) continue;
            double x = 0.0;
            read_opt(c, key, x);
            if (!(x > 0.0)) throw InvalidInput(std::string("constants.") + key + " must be > 0");
            *slot = x;
        }
        if (c.contains("gn_grid")) rc.constants.gn_grid = grid_from_json(c.at("gn_grid"));
    }
    return rc;
}

namespace {

ojson solve_input(const RunConfig& rc) {
    return ojson{{"params", to_json(rc.params)}, {"grid", to_json(rc.grid)}, {"solve", to_json(rc.solve)}};
}

ojson result_with_trace(const SolveReport& r) {
    ojson j = summary_json(r);
    ojson tr = ojson::array();
    for (const auto& e : r.trace) tr.push_back({e.J, e.P_abs, e.step});
    j["trace"] = tr;
    return j;
}

void persist(const RunConfig& rc, const SolveOutcome& out) {
    if (!rc.fields_path.empty()) write_fields(rc.fields_path, out.report.u, out.report.v);
    if (!rc.record_path.empty()) write_text_file(rc.record_path, serialize(out.record));
}

}  // namespace

SolveOutcome run_solve(const RunConfig& rc) {
    const ProblemParams& P = rc.params;
    if (!(P.nu > 0.0)) throw InvalidInput("solve requires nu > 0 (use the nonexistence probe for nu <= 0)");
    const DerivedExponents de = derived_exponents(P);
    ConstantsTable C = compute_constants(P, rc.constants);
    SolveConfig cfg = rc.solve;
    ojson warnings = ojson::array();
    std::optional<LandscapeReport> land;
    if (de.mass_class == MassClass::subcritical && C.nu0) {
        if (P.nu < *C.nu0) {
            land = landscape(P, C);
            if (!cfg.R0) cfg.R0 = land->R0;
        } else {
            warnings.push_back("nu >= nu0 computed with the upper bound for C_Npq; existence is not guaranteed");
        }
    }
    if (de.mass_class == MassClass::critical && C.nu0_prime && !(P.nu < *C.nu0_prime))
        warnings.push_back("nu >= nu0_prime computed with the upper bound for C_Npq; existence is not guaranteed");

    const GridPtr g = make_grid(P.N, rc.grid);
    const RieszKernel K = make_kernel(g, P.mu, rc.kernel_cache);
    SolveOutcome out;
    out.report = solve_ground_state(P, K, cfg);

    ojson result = result_with_trace(out.report);
    result["mass_class"] = std::string(to_string(de.mass_class));
    result["level_gap"] = (C.bubble_level - out.report.J) / C.bubble_level;
    if (de.mass_class == MassClass::supercritical)
        result["level_kind"] = "radial candidate for m_{r,nu}";
    else
        result["level_kind"] = "candidate for m_nu";
    if (land) result["landscape"] = to_json(*land);
    result["warnings"] = warnings;
    ojson input = solve_input(rc);
    input["solve"] = to_json(cfg);
    out.record = make_record("solve", input, to_json(C), result);
    persist(rc, out);
    return out;
}

SolveOutcome run_limit(const RunConfig& rc) {
    const ProblemParams& P = rc.params;
    const DerivedExponents de = derived_exponents(P);
    if (de.mass_class == MassClass::critical)
        throw InvalidInput("limit system is excluded for the L2-critical mass class (p + q = 4 + (4 - 2mu)/N)");
    const GridPtr g = make_grid(P.N, rc.grid);
    const RieszKernel K = make_kernel(g, P.mu, rc.kernel_cache);
    SolveOutcome out;
    out.report = solve_limit_system(P, K, rc.solve);
    const double gam = de.gamma();
    const double predicted = (gam - 2.0) / (2.0 * gam) * std::pow(*out.report.D0 * gam, 2.0 / (2.0 - gam));
    ojson result = result_with_trace(out.report);
    result["mass_class"] = std::string(to_string(de.mass_class));
    result["m_tilde_from_D0"] = predicted;
    ojson input = solve_input(rc);
    input["params"].erase("nu");
    out.record = make_record("limit", input, ojson::object(), result);
    persist(rc, out);
    return out;
}

// ---------------------------------------------------------------- sweep

std::vector<double> log_spaced(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InvalidInput("log range requires 0 < lo <= hi and count >= 1");
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) {
        const double x = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        out[i] = std::exp(std::log(lo) + x * (std::log(hi) - std::log(lo)));
    }
    out.front() = lo;
    if (count > 1) out.back() = hi;
    return out;
}

namespace {

struct BestSolve {
    SolveReport report;
    bool ok = false;
    std::string error;
};

// Lowest level over the configured initializations.
BestSolve best_of(const ProblemParams& P, const RieszKernel& K, const SolveConfig& base,
                  const std::vector<std::string>& inits) {
    BestSolve best;
    for (const auto& init : inits) {
        SolveConfig cfg = base;
        cfg.init = init;
        try {
            SolveReport r = solve_ground_state(P, K, cfg);
            if (!best.ok || r.J < best.report.J) {
                best.report = std::move(r);
                best.ok = true;
            }
        } catch (const NumericalError& e) {
            best.error = e.what();
        }
    }
    return best;
}

SweepPoint sweep_point(const ProblemParams& base, double nu, const RieszKernel& K, const SweepSpec& spec,
                       double level) {
    ProblemParams P = base;
    P.nu = nu;
    const BestSolve b = best_of(P, K, spec.solve, spec.inits);
    SweepPoint pt;
    pt.nu = nu;
    if (!b.ok) {
        pt.J = std::numeric_limits<double>::quiet_NaN();
        pt.level_gap = std::numeric_limits<double>::quiet_NaN();
        return pt;
    }
    pt.J = b.report.J;
    pt.level_gap = (level - pt.J) / level;
    pt.lambda1 = b.report.lambda1;
    pt.lambda2 = b.report.lambda2;
    pt.pohozaev_residual = b.report.pohozaev_residual;
    pt.converged = b.report.converged;
    return pt;
}

}  // namespace

SweepResult sweep_nu(const SweepSpec& spec) {
    validate(spec.base);
    if (derived_exponents(spec.base).mass_class != MassClass::supercritical)
        throw InvalidInput("sweep-nu requires the L2-supercritical mass class");
    if (spec.nu_values.empty()) throw InvalidInput("sweep-nu requires nu values");
    for (double nu : spec.nu_values)
        if (!(nu > 0.0)) throw InvalidInput("sweep-nu requires nu > 0");
    validate(spec.solve);
    std::vector<double> nus = spec.nu_values;
    std::sort(nus.begin(), nus.end());

    SweepResult res;
    res.bubble_level = base_constants(spec.base).bubble_level;
    res.threshold = res.bubble_level * (1.0 - spec.tol_level);
    const GridPtr g = make_grid(spec.base.N, spec.grid);
    const RieszKernel K = make_kernel(g, spec.base.mu, spec.kernel_cache);

    res.points.resize(nus.size());
    parallel_for(nus.size(), [&](std::size_t i) { res.points[i] = sweep_point(spec.base, nus[i], K, spec, res.bubble_level); });

    // A point certifies m_{r,nu} < threshold only when converged below it; any completed descent whose
    // best value stays above the threshold counts as "no value below found".
    auto below = [&](const SweepPoint& p) { return p.converged && p.J < res.threshold; };
    auto above = [&](const SweepPoint& p) { return std::isfinite(p.J) && p.J >= res.threshold; };
    auto first_below = [&]() -> int {
        for (std::size_t i = 0; i < res.points.size(); ++i)
            if (below(res.points[i])) return static_cast<int>(i);
        return -1;
    };
    int k = first_below();
    if (k == 0) {
        res.nu2_lo = 0.0;
        res.nu2_hi = res.points[0].nu;
        res.note = "smallest sampled nu is already below the threshold; consistent with nu2 = 0";
    } else if (k > 0 && above(res.points[k - 1])) {
        double lo = res.points[k - 1].nu, hi = res.points[k].nu;
        for (int s = 0; s < spec.refine_steps; ++s) {
            const double mid = std::sqrt(lo * hi);
            SweepPoint pt = sweep_point(spec.base, mid, K, spec, res.bubble_level);
            pt.refinement = true;
            res.points.push_back(pt);
            if (below(pt))
                hi = mid;
            else if (above(pt))
                lo = mid;
            else
                break;  // unresolved point: never interpolate across it
        }
        res.nu2_lo = lo;
        res.nu2_hi = hi;
        res.note = "nu2_hat bracketed by the level inequality";
    } else if (k > 0) {
        res.nu2_hi = res.points[k].nu;
        res.note = "point below the first certified nu is unresolved; only an upper bound for nu2_hat";
    } else {
        res.note = "no value below the threshold was found on the sampled nu range";
    }
    std::sort(res.points.begin(), res.points.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.nu < b.nu; });

    const double slack = 1e-6 * res.bubble_level;
    const SweepPoint* prev = nullptr;
    for (const auto& p : res.points) {
        if (!p.converged) continue;
        if (prev && p.J > prev->J + slack) res.monotone = false;
        prev = &p;
    }
    if (!spec.csv_path.empty()) write_text_file(spec.csv_path, sweep_csv(res));
    return res;
}

std::string sweep_csv(const SweepResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "nu,J,level_gap,lambda1,lambda2,pohozaev_residual,converged\n";
    for (const auto& p : r.points)
        os << p.nu << ',' << p.J << ',' << p.level_gap << ',' << p.lambda1 << ',' << p.lambda2 << ','
           << p.pohozaev_residual << ',' << (p.converged ? 1 : 0) << '\n';
    return os.str();
}

// ---------------------------------------------------------------- asymptotics

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidInput("fit_line needs at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (!(std::abs(den) > 0.0)) throw InvalidInput("fit_line: degenerate abscissae");
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

std::pair<double, double> match_dilation(const RadialField& u, const RadialField& v, const RadialField& ut,
                                         const RadialField& vt, double s0) {
    require_same_grid(*u.grid, *v.grid);
    require_same_grid(*ut.grid, *vt.grid);
    const RadialGrid& tg = *ut.grid;
    // When (-s0) * u lands on the nodes of the target grid, compare nodewise and correct s0 to first order
    // along the dilation generator; interpolation error would otherwise set the floor.
    if (u.grid->N() == tg.N() && u.grid->M() == tg.M() && u.grid->stretch() == tg.stretch() &&
        std::abs(u.grid->R_max() * std::exp(s0) / tg.R_max() - 1.0) < 1e-12) {
        const double amp = std::exp(-0.5 * tg.N() * s0);
        const std::size_t M = tg.nodes().size();
        std::vector<double> au(M), av(M), eu(M), ev(M);
        for (std::size_t i = 0; i < M; ++i) {
            au[i] = amp * u.values[i];
            av[i] = amp * v.values[i];
            eu[i] = au[i] - ut.values[i];
            ev[i] = av[i] - vt.values[i];
        }
        const std::vector<double> zu = dilation_generator(tg, au), zv = dilation_generator(tg, av);
        const auto& w = tg.weights();
        double ee = 0.0, ez = 0.0, zz = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            ee += w[i] * (eu[i] * eu[i] + ev[i] * ev[i]);
            ez += w[i] * (eu[i] * zu[i] + ev[i] * zv[i]);
            zz += w[i] * (zu[i] * zu[i] + zv[i] * zv[i]);
        }
        const double ref = mass_of(tg, ut.values) + mass_of(tg, vt.values);
        // (-(s0 + d)) * u ~ a - d z, so the best d is <e, z> / <z, z>.
        const double d2 = std::max(ee - ez * ez / zz, 0.0) * tg.surface() / ref;
        return {s0 + ez / zz, std::sqrt(d2)};
    }
    const MonotoneInterpolant iu(*u.grid, u.values), iv(*v.grid, v.values);
    const auto& rho = tg.nodes();
    const auto& w = tg.weights();
    const double N = tg.N();
    const double ref = mass_of(tg, ut.values) + mass_of(tg, vt.values);
    auto dist2 = [&](double s) {
        const double amp = std::exp(-0.5 * N * s), lam = std::exp(-s);
        double acc = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i) {
            const double du = amp * iu(lam * rho[i]) - ut.values[i];
            const double dv = amp * iv(lam * rho[i]) - vt.values[i];
            acc += w[i] * (du * du + dv * dv);
        }
        return tg.surface() * acc / ref;
    };
    const auto best = boost::math::tools::brent_find_minima(dist2, s0 - 1.5, s0 + 1.5, 40);
    return {best.first, std::sqrt(std::max(best.second, 0.0))};
}

AsymptoticsReport fit_asymptotics(const AsymptoticsSpec& spec) {
    validate(spec.base);
    const DerivedExponents de = derived_exponents(spec.base);
    if (de.mass_class == MassClass::critical)
        throw InvalidInput("asymptotics require a subcritical (nu -> 0) or supercritical (nu -> infinity) mass class");
    for (double nu : spec.nu_values)
        if (!(nu > 0.0)) throw InvalidInput("asymptotics require nu > 0");
    validate(spec.solve);
    AsymptoticsReport rep;
    const double gam = de.gamma();
    rep.predicted = 1.0 / (2.0 - gam);

    const GridPtr g = make_grid(spec.base.N, spec.grid);
    const RieszKernel K = make_kernel(g, spec.base.mu, spec.kernel_cache);
    const SolveReport lim = solve_limit_system(spec.base, K, spec.solve);
    rep.m_tilde = *lim.m_tilde;
    rep.D0 = *lim.D0;
    rep.limit_converged = lim.converged;
    std::optional<InitialFields> warm;
    if (spec.warm_start) warm = InitialFields{lim.base_u, lim.base_v};

    std::vector<double> nus = spec.nu_values;
    // Order along the limit: nu decreasing (subcritical) or increasing (supercritical).
    if (gam < 2.0)
        std::sort(nus.rbegin(), nus.rend());
    else
        std::sort(nus.begin(), nus.end());
    rep.points.resize(nus.size());
    parallel_for(nus.size(), [&](std::size_t i) {
        ProblemParams P = spec.base;
        P.nu = nus[i];
        AsymptoticsPoint pt;
        pt.nu = nus[i];
        try {
            const SolveReport r = solve_ground_state(P, K, spec.solve, warm);
            pt.converged = r.converged;
            pt.J = r.J;
            pt.alpha = r.breakdown.alpha();
            pt.lambda_sum = r.lambda1 + r.lambda2;
            const auto [s, d] = match_dilation(r.u, r.v, lim.u, lim.v, r.t_star - lim.t_star);
            pt.scale = s;
            pt.distance = d;
        } catch (const NumericalError&) {
            pt.converged = false;
        }
        rep.points[i] = pt;
    });

    std::vector<double> x, ys, ya, yl, dist;
    for (const auto& p : rep.points) {
        if (!p.converged) continue;
        x.push_back(std::log(p.nu));
        ys.push_back(p.scale);
        ya.push_back(std::log(p.alpha));
        yl.push_back(p.lambda_sum > 0.0 ? std::log(p.lambda_sum) : std::numeric_limits<double>::quiet_NaN());
        dist.push_back(p.distance);
    }
    if (x.size() < 4) {
        rep.refusal = "fewer than 4 converged points; no fit";
        return rep;
    }
    rep.fitted = true;
    rep.slope_scale = fit_line(x, ys).slope;
    rep.slope_alpha = fit_line(x, ya).slope;
    rep.slope_lambda = fit_line(x, yl).slope;
    rep.distance_decreasing = dist.size() >= 3;
    for (std::size_t i = 1; i < dist.size(); ++i)
        if (!(dist[i] < dist[i - 1])) rep.distance_decreasing = false;
    rep.max_distance = *std::max_element(dist.begin(), dist.end());
    rep.at_floor = rep.max_distance < spec.distance_floor;
    return rep;
}

// ---------------------------------------------------------------- bubble concentration

ProfileFit fit_bubble_profile(const RadialField& f, double mu) {
    const RadialGrid& g = *f.grid;
    const int N = g.N();
    const double sob = 2.0 * N / (N - 2.0);
    const auto& r = g.nodes();
    // trapezoid cumulative integral of |f|^{2N/(N-2)} r^{N-1}; the first cell treats f as constant
    std::vector<double> cum(r.size());
    auto density = [&](std::size_t i) { return std::pow(std::abs(f.values[i]), sob) * std::pow(r[i], N - 1); };
    double acc = std::pow(std::abs(f.values[0]), sob) * std::pow(r[0], N) / N;
    cum[0] = acc;
    for (std::size_t i = 1; i < r.size(); ++i) {
        acc += 0.5 * (density(i - 1) + density(i)) * (r[i] - r[i - 1]);
        cum[i] = acc;
    }
    if (!(acc > 0.0)) throw InvalidInput("fit_bubble_profile: zero field");
    const double half = 0.5 * acc;
    std::size_t k = 0;
    while (cum[k] < half) ++k;
    double rn;
    if (k == 0) {
        rn = r[0];
    } else {
        const double x = (half - cum[k - 1]) / (cum[k] - cum[k - 1]);
        rn = r[k - 1] + x * (r[k] - r[k - 1]);
    }

    // f_r(x) = r^{(N-2)/2} f(r x), exact on the grid scaled by 1/r.
    const GridPtr gs = g.scaled(1.0 / rn);
    std::vector<double> fr = f.values;
    const double amp = std::pow(rn, 0.5 * (N - 2.0));
    for (double& x : fr) x *= amp;

    const BubbleFields ref = bubble(gs, mu, 1.0, 0.25 * gs->R_max());
    const double tilde = ref.U_tilde.values[0] / ref.U.values[0];
    const auto& rs = gs->nodes();
    auto profile = [&](double eps) {
        std::vector<double> b(rs.size());
        const double a = tilde * std::pow(N * (N - 2.0), 0.25 * (N - 2.0)) * std::pow(eps, 0.5 * (N - 2.0));
        for (std::size_t i = 0; i < rs.size(); ++i) b[i] = a * std::pow(eps * eps + rs[i] * rs[i], -0.5 * (N - 2.0));
        return b;
    };
    auto misfit2 = [&](double log_eps) {
        const auto b = profile(std::exp(log_eps));
        std::vector<double> d(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) d[i] = fr[i] - b[i];
        return kinetic_of(*gs, d) / kinetic_of(*gs, b);
    };
    const auto best = boost::math::tools::brent_find_minima(misfit2, std::log(1e-3), std::log(1e3), 40);
    ProfileFit pf;
    pf.r = rn;
    pf.eps = std::exp(best.first);
    pf.misfit = std::sqrt(std::max(best.second, 0.0));
    return pf;
}

BubbleReport bubble_concentration_check(const BubbleCheckSpec& spec) {
    validate(spec.base);
    if (derived_exponents(spec.base).mass_class == MassClass::subcritical)
        throw InvalidInput("bubble-check requires the critical or supercritical mass class");
    for (double nu : spec.nu_values)
        if (!(nu > 0.0)) throw InvalidInput("bubble-check requires nu > 0");
    validate(spec.solve);
    BubbleReport rep;
    const ConstantsTable C = base_constants(spec.base);
    const double ts = upper_critical(spec.base.N, spec.base.mu);
    rep.target_kinetic = std::pow(C.S_HL, ts / (ts - 1.0));
    rep.bubble_level = C.bubble_level;
    const GridPtr g = make_grid(spec.base.N, spec.grid);
    const RieszKernel K = make_kernel(g, spec.base.mu, spec.kernel_cache);

    std::vector<double> nus = spec.nu_values;
    std::sort(nus.rbegin(), nus.rend());
    rep.points.resize(nus.size());
    parallel_for(nus.size(), [&](std::size_t i) {
        ProblemParams P = spec.base;
        P.nu = nus[i];
        BubblePoint pt;
        pt.nu = nus[i];
        const BestSolve b = best_of(P, K, spec.solve, {"gaussian", "bubble"});
        if (b.ok) {
            const SolveReport& r = b.report;
            pt.converged = r.converged;
            pt.J = r.J;
            pt.kinetic_u = r.breakdown.alpha_u;
            pt.kinetic_v = r.breakdown.alpha_v;
            const double a = pt.kinetic_u + pt.kinetic_v;
            pt.min_share = std::min(pt.kinetic_u, pt.kinetic_v) / a;
            pt.surviving = pt.kinetic_u >= pt.kinetic_v ? 'u' : 'v';
            pt.surviving_kinetic = std::max(pt.kinetic_u, pt.kinetic_v);
            const ProfileFit pf = fit_bubble_profile(pt.surviving == 'u' ? r.u : r.v, spec.base.mu);
            pt.r_nu = pf.r;
            pt.eps_fit = pf.eps;
            pt.misfit = pf.misfit;
        }
        rep.points[i] = pt;
    });

    std::vector<const BubblePoint*> conv;
    for (const auto& p : rep.points)
        if (p.converged) conv.push_back(&p);
    rep.share_decreasing = conv.size() >= 3;
    for (std::size_t i = 1; i < conv.size(); ++i)
        if (!(conv[i]->min_share < conv[i - 1]->min_share)) rep.share_decreasing = false;
    if (!conv.empty() && conv.back()->min_share > 0.25) {
        rep.ambiguous = true;
        rep.note = "both kinetic shares comparable at the smallest converged nu; collapsing component not identified";
    }
    for (std::size_t i = 1; i < conv.size(); ++i)
        if (conv[i]->surviving != conv[0]->surviving) {
            rep.ambiguous = true;
            rep.note = "surviving component changes along the sequence";
        }
    return rep;
}

// ---------------------------------------------------------------- nonexistence

double jbar_projected(const ProblemParams& params, const RieszKernel& K, const std::vector<double>& u,
                      const std::vector<double>& v) {
    const Evaluation ev = evaluate(params, K, u, v, false);
    const FiberReport fr = fiber_critical_points(ev.br, params);
    if (fr.roots.size() != 1) throw NumericalError("fiber projection: expected a single critical point");
    const FiberValues fv = fiber(ev.br, params, fr.roots[0]);
    const double ts = upper_critical(params.N, params.mu);
    return fv.psi - fv.d1 / (2.0 * ts);
}

NonexistenceReport probe_nonexistence(const NonexistenceSpec& spec) {
    for (double nu : spec.nu_values)
        if (nu > 0.0) throw InvalidInput("nonexistence probe requires nu <= 0");
    ProblemParams P = spec.base;
    P.nu = 0.0;
    validate(P);
    NonexistenceReport rep;
    rep.bubble_level = base_constants(P).bubble_level;
    const GridPtr g = make_grid(P.N, spec.grid);
    const RieszKernel K = make_kernel(g, P.mu, spec.kernel_cache);
    const auto& r = g->nodes();
    const std::size_t M = r.size();
    const double a2 = P.a * P.a, b2 = P.b * P.b;
    auto normalized = [&](std::vector<double> f, double mass) {
        f.back() = 0.0;
        const double s = std::sqrt(mass / mass_of(*g, f));
        for (double& x : f) x *= s;
        return f;
    };

    // Cut-off bubble on u; v spread far out (the dilation s -> -infinity of the construction).
    const double spread = spec.grid.R_max / 8.0;
    std::vector<double> wide(M);
    for (std::size_t i = 0; i < M; ++i) wide[i] = std::exp(-0.5 * r[i] * r[i] / (spread * spread));
    const std::vector<double> v_far = normalized(wide, b2);
    std::vector<std::vector<double>> bubbles;
    for (double eps : spec.eps_values) bubbles.push_back(normalized(bubble(g, P.mu, eps, 1.0).eta.values, a2));

    // Random positive radial pairs: sums of shifted Gaussians.
    std::mt19937_64 rng(spec.seed);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53); };
    auto random_field = [&](double mass) {
        std::vector<double> f(M, 0.0);
        const int bumps = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < bumps; ++k) {
            const double c = uni(0.0, 3.0), wdt = std::exp(uni(std::log(0.2), std::log(3.0))), A = uni(0.2, 1.0);
            for (std::size_t i = 0; i < M; ++i) f[i] += A * std::exp(-0.5 * (r[i] - c) * (r[i] - c) / (wdt * wdt));
        }
        return normalized(f, mass);
    };
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (int k = 0; k < spec.random_pairs; ++k) {
        auto u = random_field(a2);
        auto v = random_field(b2);
        pairs.emplace_back(std::move(u), std::move(v));
    }

    rep.all_above = true;
    rep.bubbles_decreasing = true;
    const double floor = rep.bubble_level * (1.0 - 1e-6);
    double closest = std::numeric_limits<double>::infinity();
    for (double nu : spec.nu_values) {
        ProblemParams Pn = P;
        Pn.nu = nu;
        NonexistenceCase c;
        c.nu = nu;
        for (const auto& u : bubbles) c.bubble_values.push_back(jbar_projected(Pn, K, u, v_far));
        std::vector<double> vals(pairs.size());
        parallel_for(pairs.size(), [&](std::size_t k) { vals[k] = jbar_projected(Pn, K, pairs[k].first, pairs[k].second); });
        c.random_min = *std::min_element(vals.begin(), vals.end());
        c.inf_found = std::min(c.random_min, *std::min_element(c.bubble_values.begin(), c.bubble_values.end()));
        if (c.inf_found < floor) rep.all_above = false;
        for (std::size_t k = 1; k < c.bubble_values.size(); ++k)
            if (!(c.bubble_values[k] < c.bubble_values[k - 1])) rep.bubbles_decreasing = false;
        closest = std::min(closest, (c.bubble_values.back() - rep.bubble_level) / rep.bubble_level);
        rep.cases.push_back(std::move(c));
    }
    rep.closest_gap = closest;
    std::ostringstream os;
    if (rep.all_above)
        os << "no value below the bubble level was found";
    else
        os << "a value below the bubble level was found (discretization bias or a counterexample)";
    os << "; closest approach " << closest * 100.0 << "% above the level";
    rep.statement = os.str();
    return rep;
}

// ---------------------------------------------------------------- dispatch

namespace {

ojson sweep_json(const SweepResult& r) {
    ojson pts = ojson::array();
    for (const auto& p : r.points)
        pts.push_back({{"nu", p.nu},
                       {"J", p.J},
                       {"level_gap", p.level_gap},
                       {"lambda1", p.lambda1},
                       {"lambda2", p.lambda2},
                       {"pohozaev_residual", p.pohozaev_residual},
                       {"converged", p.converged},
                       {"refinement", p.refinement}});
    ojson j{{"bubble_level", r.bubble_level}, {"threshold", r.threshold}, {"points", pts},
            {"monotone", r.monotone},         {"note", r.note}};
    j["nu2_hat_bracket"] = r.nu2_hi ? ojson{r.nu2_lo ? *r.nu2_lo : 0.0, *r.nu2_hi} : ojson(nullptr);
    return j;
}

ojson asymptotics_json(const AsymptoticsReport& r) {
    ojson pts = ojson::array();
    for (const auto& p : r.points)
        pts.push_back({{"nu", p.nu},
                       {"converged", p.converged},
                       {"J", p.J},
                       {"scale", p.scale},
                       {"alpha", p.alpha},
                       {"lambda_sum", p.lambda_sum},
                       {"distance", p.distance}});
    return ojson{{"m_tilde", r.m_tilde},
                 {"D0", r.D0},
                 {"limit_converged", r.limit_converged},
                 {"predicted_exponent", r.predicted},
                 {"fitted", r.fitted},
                 {"refusal", r.refusal},
                 {"slope_scale", r.slope_scale},
                 {"slope_alpha", r.slope_alpha},
                 {"slope_lambda_sum", r.slope_lambda},
                 {"distance_decreasing", r.distance_decreasing},
                 {"max_distance", r.max_distance},
                 {"distance_at_floor", r.at_floor},
                 {"points", pts}};
}

ojson bubble_json(const BubbleReport& r) {
    ojson pts = ojson::array();
    for (const auto& p : r.points)
        pts.push_back({{"nu", p.nu},
                       {"converged", p.converged},
                       {"J", p.J},
                       {"kinetic_u", p.kinetic_u},
                       {"kinetic_v", p.kinetic_v},
                       {"min_share", p.min_share},
                       {"surviving", std::string(1, p.surviving)},
                       {"surviving_kinetic", p.surviving_kinetic},
                       {"r_nu", p.r_nu},
                       {"eps_fit", p.eps_fit},
                       {"misfit", p.misfit}});
    return ojson{{"target_kinetic", r.target_kinetic}, {"bubble_level", r.bubble_level},
                 {"share_decreasing", r.share_decreasing}, {"ambiguous", r.ambiguous},
                 {"note", r.note},                     {"points", pts}};
}

ojson nonexistence_json(const NonexistenceReport& r) {
    ojson cases = ojson::array();
    for (const auto& c : r.cases)
        cases.push_back(
            {{"nu", c.nu}, {"bubble_values", c.bubble_values}, {"random_min", c.random_min}, {"inf_found", c.inf_found}});
    return ojson{{"bubble_level", r.bubble_level}, {"all_above", r.all_above},
                 {"bubbles_decreasing", r.bubbles_decreasing}, {"closest_gap", r.closest_gap},
                 {"statement", r.statement},                 {"cases", cases}};
}

template <class Spec>
void fill_common(Spec& s, const RunConfig& rc) {
    s.base = rc.params;
    s.grid = rc.grid;
    s.solve = rc.solve;
    s.kernel_cache = rc.kernel_cache;
}

}  // namespace

CommandResult run_command(const std::string& command, const nlohmann::json& config) {
    CommandResult out;
    try {
        if (command == "constants") {
            const RunConfig rc = parse_run_config(config);
            const ConstantsTable C = compute_constants(rc.params, rc.constants);
            const DerivedExponents de = derived_exponents(rc.params);
            out.output = ojson{{"params", to_json(rc.params)},
                               {"exponents",
                                {{"gamma_p", de.gamma_p},
                                 {"gamma_q", de.gamma_q},
                                 {"two_star_mu", de.two_star_mu},
                                 {"two_lower", de.two_lower},
                                 {"mass_class", std::string(to_string(de.mass_class))}}},
                               {"constants", to_json(C)}};
            if (C.nu0 && rc.params.nu > 0.0 && rc.params.nu < *C.nu0)
                out.output["landscape"] = to_json(landscape(rc.params, C));
        } else if (command == "gn") {
            nlohmann::json c = config;
            if (c.is_object()) {
                if (!c.contains("q") && c.contains("p")) c["q"] = c["p"];
                for (const char* k : {"nu", "a", "b"})
                    if (!c.contains(k)) c[k] = 1.0;
            }
            ProblemParams P = params_from_json(c);
            validate(P);
            GridSpec gs{512, 20.0, 2.0};
            if (config.contains("grid")) gs = grid_from_json(config.at("grid"));
            std::string cache;
            if (config.contains("outputs")) read_opt(config.at("outputs"), "kernel_cache", cache);
            const GridPtr g = make_grid(P.N, gs);
            const RieszKernel K = make_kernel(g, P.mu, cache);
            const GNResult r = gn_extremal_solve(P.N, P.mu, P.p, g, K);
            out.output = ojson{{"N", P.N},
                               {"mu", P.mu},
                               {"p", P.p},
                               {"C_Np", r.C_Np},
                               {"restart_values", r.restart_values},
                               {"spread", r.spread},
                               {"residual", r.residual},
                               {"iterations", r.iterations},
                               {"stale", r.stale}};
            if (P.q != P.p) {
                const GNResult rq = gn_extremal_solve(P.N, P.mu, P.q, g, K);
                const CoupledGNResult c = coupled_gn_estimate(P.N, P.mu, P.p, P.q, g, K, r.C_Np, rq.C_Np);
                out.output["q"] = P.q;
                out.output["C_Nq"] = rq.C_Np;
                out.output["C_Npq_estimate"] = c.estimate;
                out.output["C_Npq_bound"] = c.bound;
                out.output["clamped"] = c.clamped;
            }
        } else if (command == "solve" || command == "limit") {
            nlohmann::json c = config;
            if (command == "limit" && c.is_object() && !c.contains("nu")) c["nu"] = 1.0;
            const RunConfig rc = parse_run_config(c);
            const SolveOutcome so = command == "solve" ? run_solve(rc) : run_limit(rc);
            out.output = ojson::parse(serialize(so.record));
            out.exit_code = so.report.converged ? 0 : 2;
        } else if (command == "sweep-nu") {
            const RunConfig rc = parse_run_config(config);
            SweepSpec s;
            fill_common(s, rc);
            s.nu_values = nu_list(config);
            read_opt(config, "tol_level", s.tol_level);
            read_opt(config, "refine_steps", s.refine_steps);
            read_opt(config, "inits", s.inits);
            s.csv_path = rc.csv_path;
            const SweepResult r = sweep_nu(s);
            out.output = sweep_json(r);
            if (!rc.record_path.empty()) {
                const RunRecord rec = make_record("sweep-nu", ojson{{"params", to_json(rc.params)},
                                                                    {"grid", to_json(rc.grid)},
                                                                    {"solve", to_json(rc.solve)},
                                                                    {"nu_values", s.nu_values},
                                                                    {"tol_level", s.tol_level}},
                                                  ojson::object(), out.output);
                write_text_file(rc.record_path, serialize(rec));
            }
        } else if (command == "asymptotics") {
            const RunConfig rc = parse_run_config(config);
            AsymptoticsSpec s;
            fill_common(s, rc);
            s.nu_values = nu_list(config);
            read_opt(config, "distance_floor", s.distance_floor);
            read_opt(config, "warm_start", s.warm_start);
            const AsymptoticsReport r = fit_asymptotics(s);
            out.output = asymptotics_json(r);
            out.exit_code = r.fitted ? 0 : 2;
        } else if (command == "bubble-check") {
            const RunConfig rc = parse_run_config(config);
            BubbleCheckSpec s;
            fill_common(s, rc);
            s.nu_values = nu_list(config);
            out.output = bubble_json(bubble_concentration_check(s));
        } else if (command == "nonexistence") {
            nlohmann::json c = config;
            if (c.is_object() && !c.contains("nu")) c["nu"] = 0.0;
            const RunConfig rc = parse_run_config(c);
            NonexistenceSpec s;
            s.base = rc.params;
            s.kernel_cache = rc.kernel_cache;
            if (config.contains("grid")) s.grid = rc.grid;
            if (config.contains("nu_values")) read_opt(config, "nu_values", s.nu_values);
            read_opt(config, "eps_values", s.eps_values);
            read_opt(config, "random_pairs", s.random_pairs);
            read_opt(config, "seed", s.seed);
            out.output = nonexistence_json(probe_nonexistence(s));
        } else {
            throw InvalidInput("unknown command \"" + command + "\"");
        }
    } catch (const InvalidInput& e) {
        out.exit_code = 1;
        out.output = ojson{{"error", e.what()}, {"kind", "invalid_input"}};
    } catch (const IOError& e) {
        out.exit_code = 1;
        out.output = ojson{{"error", e.what()}, {"kind", "io"}};
    } catch (const NumericalError& e) {
        out.exit_code = 2;
        out.output = ojson{{"error", e.what()}, {"kind", "numerical"}};
    } catch (const nlohmann::json::exception& e) {
        out.exit_code = 1;
        out.output = ojson{{"error", std::string("config: ") + e.what()}, {"kind", "invalid_input"}};
    }
    return out;
}

}  // namespace chq

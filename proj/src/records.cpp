#include "choquard/records.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "choquard/util.hpp"

namespace chq {

namespace {

template <class T>
T required(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw InvalidInput("missing required key \"" + std::string(key) + "\"" + where);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput("key \"" + std::string(key) + "\"" + where + " has the wrong type");
    }
}

template <class T>
void optional_into(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput("key \"" + std::string(key) + "\"" + where + " has the wrong type");
    }
}

ojson opt(const std::optional<double>& x) { return x ? ojson(*x) : ojson(nullptr); }

}  // namespace

ojson to_json(const ProblemParams& p) {
    return ojson{{"N", p.N}, {"mu", p.mu}, {"p", p.p}, {"q", p.q}, {"nu", p.nu}, {"a", p.a}, {"b", p.b}};
}

ojson to_json(const GridSpec& g) { return ojson{{"M", g.M}, {"R_max", g.R_max}, {"stretch", g.stretch}}; }

ojson to_json(const SolveConfig& c) {
    return ojson{{"max_iter", c.max_iter},
                 {"step0", c.step0},
                 {"armijo_ratio", c.armijo_ratio},
                 {"armijo_c", c.armijo_c},
                 {"tol_P", c.tol_P},
                 {"tol_grad", c.tol_grad},
                 {"tol_el", c.tol_el},
                 {"R0", opt(c.R0)},
                 {"positivity", c.positivity},
                 {"seed", c.seed},
                 {"init", c.init},
                 {"checkpoint_every", c.checkpoint_every}};
}

ojson to_json(const ConstantsTable& c) {
    return ojson{{"A_Nmu", c.A_Nmu}, {"C_Nmu", c.C_Nmu},    {"S", c.S},         {"S_HL", c.S_HL},
                 {"bubble_level", c.bubble_level},          {"C_Np", opt(c.C_Np)}, {"C_Nq", opt(c.C_Nq)},
                 {"C_Npq", opt(c.C_Npq)}, {"nu0", opt(c.nu0)}, {"nu0_prime", opt(c.nu0_prime)}};
}

ojson to_json(const LandscapeReport& l) {
    return ojson{{"A", l.A},   {"B", l.B},   {"rho1", l.rho1},   {"rho2", l.rho2},
                 {"R0", l.R0}, {"R1", l.R1}, {"h_min", l.h_min}, {"h_max", l.h_max}};
}

ojson summary_json(const SolveReport& r) {
    const EnergyBreakdown& b = r.breakdown;
    ojson j{{"J", r.J},
            {"lambda1", r.lambda1},
            {"lambda2", r.lambda2},
            {"pohozaev_residual", r.pohozaev_residual},
            {"el_residuals", {r.res1, r.res2}},
            {"gradient_residual", r.gradient_residual},
            {"branch", std::string(to_string(r.branch))},
            {"psi_curvature", r.psi_curvature},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"t_star", r.t_star},
            {"ball_warnings", r.ball_warnings},
            {"breakdown",
             {{"alpha_u", b.alpha_u},
              {"alpha_v", b.alpha_v},
              {"beta_u", b.beta_u},
              {"beta_v", b.beta_v},
              {"delta", b.delta},
              {"mass_u", b.mass_u},
              {"mass_v", b.mass_v}}},
            {"message", r.message}};
    if (r.m_tilde) j["m_tilde"] = *r.m_tilde;
    if (r.D0) j["D0"] = *r.D0;
    return j;
}

ProblemParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidInput("config must be a JSON object");
    ProblemParams p;
    p.N = required<int>(j, "N", "");
    p.mu = required<double>(j, "mu", "");
    p.p = required<double>(j, "p", "");
    p.q = required<double>(j, "q", "");
    p.nu = required<double>(j, "nu", "");
    p.a = required<double>(j, "a", "");
    p.b = required<double>(j, "b", "");
    return p;
}

GridSpec grid_from_json(const nlohmann::json& j) {
    GridSpec g;
    if (j.is_null()) return g;
    if (!j.is_object()) throw InvalidInput("\"grid\" must be an object");
    const std::string where = " in \"grid\"";
    optional_into(j, "M", g.M, where);
    optional_into(j, "R_max", g.R_max, where);
    optional_into(j, "stretch", g.stretch, where);
    if (g.M < 64) throw InvalidInput("grid.M must be >= 64");
    if (!(g.R_max > 0.0)) throw InvalidInput("grid.R_max must be > 0");
    if (!(g.stretch >= 1.0)) throw InvalidInput("grid.stretch must be >= 1");
    return g;
}

SolveConfig solve_config_from_json(const nlohmann::json& j) {
    SolveConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw InvalidInput("\"solve\" must be an object");
    const std::string where = " in \"solve\"";
    optional_into(j, "max_iter", c.max_iter, where);
    optional_into(j, "step0", c.step0, where);
    optional_into(j, "armijo_ratio", c.armijo_ratio, where);
    optional_into(j, "armijo_c", c.armijo_c, where);
    optional_into(j, "tol_P", c.tol_P, where);
    optional_into(j, "tol_grad", c.tol_grad, where);
    optional_into(j, "tol_el", c.tol_el, where);
    if (j.contains("R0") && !j.at("R0").is_null()) {
        double r0 = 0.0;
        optional_into(j, "R0", r0, where);
        c.R0 = r0;
    }
    optional_into(j, "positivity", c.positivity, where);
    optional_into(j, "seed", c.seed, where);
    optional_into(j, "init", c.init, where);
    optional_into(j, "checkpoint_every", c.checkpoint_every, where);
    optional_into(j, "checkpoint_path", c.checkpoint_path, where);
    optional_into(j, "resume", c.resume_path, where);
    validate(c);
    return c;
}

namespace {

ojson body(const RunRecord& r) {
    return ojson{{"kind", "choquard-run-record"},
                 {"format", kRecordFormat},
                 {"library_version", kLibraryVersion},
                 {"command", r.command},
                 {"input", r.input},
                 {"constants", r.constants},
                 {"result", r.result}};
}

}  // namespace

RunRecord make_record(std::string command, ojson input, ojson constants, ojson result) {
    RunRecord r{std::move(command), std::move(input), std::move(constants), std::move(result), {}};
    r.hash = sha256_hex(body(r).dump());
    return r;
}

std::string serialize(const RunRecord& r) {
    ojson j = body(r);
    j["hash"] = r.hash;
    return j.dump(2) + "\n";
}

RunRecord parse_record(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const std::exception& e) {
        throw InvalidInput(std::string("malformed run record: ") + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != "choquard-run-record") throw InvalidInput("not a run record");
    RunRecord r;
    r.command = j.at("command").get<std::string>();
    r.input = j.at("input");
    r.constants = j.at("constants");
    r.result = j.at("result");
    r.hash = j.at("hash").get<std::string>();
    if (sha256_hex(body(r).dump()) != r.hash) throw InvalidInput("run record hash does not match its content");
    return r;
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IOError("cannot open for writing: " + path);
    os << content;
    os.flush();
    if (!os) throw IOError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    if (is.bad()) throw IOError("read failed: " + path);
    return ss.str();
}

void write_fields(const std::string& path, const RadialField& u, const RadialField& v) {
    require_same_grid(*u.grid, *v.grid);
    const RadialGrid& g = *u.grid;
    ojson j{{"kind", "choquard-fields"},
            {"grid", {{"N", g.N()}, {"M", g.M()}, {"R_max", g.R_max()}, {"stretch", g.stretch()}}},
            {"u", u.values},
            {"v", v.values}};
    write_text_file(path, j.dump() + "\n");
}

std::pair<RadialField, RadialField> read_fields(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("malformed field file " + path + ": " + e.what());
    }
    if (j.value("kind", "") != "choquard-fields") throw InvalidInput("not a field file: " + path);
    const auto& jg = j.at("grid");
    const GridPtr g = RadialGrid::build(jg.at("N").get<int>(), jg.at("M").get<int>(), jg.at("R_max").get<double>(),
                                        jg.at("stretch").get<double>());
    RadialField u{g, j.at("u").get<std::vector<double>>(), std::nullopt};
    RadialField v{g, j.at("v").get<std::vector<double>>(), std::nullopt};
    if (static_cast<int>(u.values.size()) != g->M() || static_cast<int>(v.values.size()) != g->M())
        throw InvalidInput("field length does not match grid in " + path);
    return {std::move(u), std::move(v)};
}

}  // namespace chq

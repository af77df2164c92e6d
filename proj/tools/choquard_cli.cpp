// Command-line front end; talks to the library only through choquard.h.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "choquard.h"
#include "json.hpp"

namespace {

struct Overrides {
    std::optional<int> N, M;
    std::optional<double> mu, p, q, nu, a, b, R_max, stretch;
    std::optional<unsigned long long> seed;
    std::optional<std::string> record, csv, fields, kernel_cache;
};

void add_overrides(CLI::App* sub, Overrides& o) {
    sub->add_option("--N", o.N, "space dimension");
    sub->add_option("--mu", o.mu, "Riesz exponent");
    sub->add_option("--p", o.p, "first nonlinearity exponent");
    sub->add_option("--q", o.q, "second nonlinearity exponent");
    sub->add_option("--nu", o.nu, "coupling");
    sub->add_option("--a", o.a, "mass of u (|u|_2 = a)");
    sub->add_option("--b", o.b, "mass of v (|v|_2 = b)");
    sub->add_option("--M", o.M, "grid nodes");
    sub->add_option("--R-max", o.R_max, "grid radius");
    sub->add_option("--stretch", o.stretch, "grid grading exponent");
    sub->add_option("--seed", o.seed, "initialization seed");
    sub->add_option("--record", o.record, "write the JSON run record here");
    sub->add_option("--csv", o.csv, "write the sweep CSV here");
    sub->add_option("--fields", o.fields, "write the solution fields here");
    sub->add_option("--kernel-cache", o.kernel_cache, "directory for cached kernel matrices");
}

template <class T>
void put(nlohmann::json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

void apply_overrides(nlohmann::json& cfg, const Overrides& o) {
    put(cfg, "N", o.N);
    put(cfg, "mu", o.mu);
    put(cfg, "p", o.p);
    put(cfg, "q", o.q);
    put(cfg, "nu", o.nu);
    put(cfg, "a", o.a);
    put(cfg, "b", o.b);
    if (o.M || o.R_max || o.stretch) {
        nlohmann::json& g = cfg["grid"];
        if (!g.is_object()) g = nlohmann::json::object();
        put(g, "M", o.M);
        put(g, "R_max", o.R_max);
        put(g, "stretch", o.stretch);
    }
    if (o.seed) cfg["solve"]["seed"] = *o.seed;
    if (o.record || o.csv || o.fields || o.kernel_cache) {
        nlohmann::json& out = cfg["outputs"];
        if (!out.is_object()) out = nlohmann::json::object();
        put(out, "record", o.record);
        put(out, "csv", o.csv);
        put(out, "fields", o.fields);
        put(out, "kernel_cache", o.kernel_cache);
    }
}

int fail(const std::string& msg) {
    nlohmann::json j{{"error", msg}, {"kind", "invalid_input"}};
    std::cout << j.dump(2) << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normalized ground states of coupled Choquard systems with critical Hartree terms"};
    app.set_version_flag("--version", std::string(chq_version()));
    app.require_subcommand(1);

    const char* commands[][2] = {
        {"constants", "sharp constants, GN constants and existence thresholds"},
        {"gn", "Gagliardo-Nirenberg extremal (and coupled estimate when q is given)"},
        {"solve", "normalized ground state of the coupled system"},
        {"limit", "ground state of the system without critical terms"},
        {"sweep-nu", "level curve over nu and the empirical threshold bracket"},
        {"asymptotics", "scaling-rate fits along nu -> 0 or nu -> infinity"},
        {"bubble-check", "concentration of one component onto a bubble"},
        {"nonexistence", "probe of the nu <= 0 level"},
    };
    std::string config_path, out_path;
    bool quiet = false;
    Overrides o;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c[0], c[1]);
        sub->add_option("-c,--config", config_path, "JSON config file");
        sub->add_option("-o,--output", out_path, "write the JSON output here instead of stdout");
        sub->add_flag("--quiet", quiet, "no progress line on stderr");
        add_overrides(sub, o);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    nlohmann::json cfg = nlohmann::json::object();
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) return fail("cannot open config: " + config_path);
        try {
            is >> cfg;
        } catch (const nlohmann::json::exception& e) {
            return fail("config " + config_path + " is not valid JSON: " + e.what());
        }
        if (!cfg.is_object()) return fail("config " + config_path + " must contain a JSON object");
    }
    apply_overrides(cfg, o);

    chq_context* ctx = nullptr;
    if (chq_context_create(&ctx) != CHQ_OK) return fail("cannot create library context");
    const auto t0 = std::chrono::steady_clock::now();
    const chq_status st = chq_run(ctx, command.c_str(), cfg.dump().c_str());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string output = chq_output_json(ctx);
    if (output.empty()) output = nlohmann::json{{"error", chq_last_error(ctx)}}.dump(2);
    chq_context_destroy(ctx);

    if (out_path.empty()) {
        std::cout << output << '\n';
    } else {
        std::ofstream os(out_path);
        if (!os || !(os << output << '\n')) return fail("cannot write output: " + out_path);
    }
    if (!quiet) std::fprintf(stderr, "choquard %s: status %d, %.2f s\n", command.c_str(), static_cast<int>(st), secs);
    switch (st) {
        case CHQ_OK: return 0;
        case CHQ_INVALID_INPUT:
        case CHQ_IO_ERROR: return 1;
        default: return 2;
    }
}

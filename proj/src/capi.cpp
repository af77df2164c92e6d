#include "choquard.h"

#include <new>
#include <string>

#include "choquard/experiments.hpp"
#include "choquard/params.hpp"

struct chq_context {
    std::string error;
    std::string output;
};

namespace {

chq::ProblemParams to_params(const chq_problem& p) { return {p.N, p.mu, p.p, p.q, p.nu, p.a, p.b}; }

template <class F>
chq_status guarded(chq_context* ctx, F&& body) {
    if (!ctx) return CHQ_INVALID_INPUT;
    ctx->error.clear();
    try {
        return body();
    } catch (const chq::InvalidInput& e) {
        ctx->error = e.what();
        return CHQ_INVALID_INPUT;
    } catch (const chq::NumericalError& e) {
        ctx->error = e.what();
        return CHQ_NUMERICAL_ERROR;
    } catch (const chq::IOError& e) {
        ctx->error = e.what();
        return CHQ_IO_ERROR;
    } catch (const std::bad_alloc&) {
        ctx->error = "out of memory";
        return CHQ_INTERNAL_ERROR;
    } catch (const std::exception& e) {
        ctx->error = e.what();
        return CHQ_INTERNAL_ERROR;
    }
}

}  // namespace

extern "C" {

const char* chq_version(void) { return chq::kLibraryVersion; }

chq_status chq_context_create(chq_context** out) {
    if (!out) return CHQ_INVALID_INPUT;
    *out = new (std::nothrow) chq_context;
    return *out ? CHQ_OK : CHQ_INTERNAL_ERROR;
}

void chq_context_destroy(chq_context* ctx) { delete ctx; }

const char* chq_last_error(const chq_context* ctx) { return ctx ? ctx->error.c_str() : "null context"; }

chq_status chq_validate(chq_context* ctx, const chq_problem* problem) {
    return guarded(ctx, [&] {
        if (!problem) throw chq::InvalidInput("problem is null");
        chq::validate(to_params(*problem));
        return CHQ_OK;
    });
}

chq_status chq_exponents_of(chq_context* ctx, const chq_problem* problem, chq_exponents* out) {
    return guarded(ctx, [&] {
        if (!problem || !out) throw chq::InvalidInput("null argument");
        const chq::DerivedExponents d = chq::derived_exponents(to_params(*problem));
        out->gamma_p = d.gamma_p;
        out->gamma_q = d.gamma_q;
        out->two_star_mu = d.two_star_mu;
        out->two_lower = d.two_lower;
        out->mass_class = static_cast<int>(d.mass_class);
        return CHQ_OK;
    });
}

chq_status chq_sharp_constants(chq_context* ctx, int N, double mu, chq_sharp* out) {
    return guarded(ctx, [&] {
        if (!out) throw chq::InvalidInput("null argument");
        const chq::SharpConstants s = chq::sharp_constants(N, mu);
        out->S = s.S;
        out->S_HL = s.S_HL;
        out->bubble_level = s.bubble_level;
        out->C_Nmu = chq::hls_constant(N, mu);
        out->A_Nmu = chq::riesz_normalization(N, mu);
        return CHQ_OK;
    });
}

chq_status chq_run(chq_context* ctx, const char* command, const char* config_json) {
    return guarded(ctx, [&] {
        ctx->output.clear();
        if (!command || !config_json) throw chq::InvalidInput("null argument");
        nlohmann::json cfg;
        try {
            cfg = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::exception& e) {
            ctx->output = chq::ojson{{"error", std::string("config is not valid JSON: ") + e.what()},
                                     {"kind", "invalid_input"}}
                              .dump(2);
            throw chq::InvalidInput(std::string("config is not valid JSON: ") + e.what());
        }
        const chq::CommandResult r = chq::run_command(command, cfg);
        ctx->output = r.output.dump(2);
        if (r.output.contains("error")) ctx->error = r.output.at("error").get<std::string>();
        switch (r.exit_code) {
            case 0: return CHQ_OK;
            case 1: return CHQ_INVALID_INPUT;
            default: return CHQ_NOT_CONVERGED;
        }
    });
}

const char* chq_output_json(const chq_context* ctx) { return ctx ? ctx->output.c_str() : ""; }

}  // extern "C"

// Exercises the shared library through its C header only.
#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "choquard.h"

namespace {

struct Context {
    chq_context* ctx = nullptr;
    Context() { REQUIRE(chq_context_create(&ctx) == CHQ_OK); }
    ~Context() { chq_context_destroy(ctx); }
};

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version and null handling") {
    CHECK(std::strlen(chq_version()) > 0);
    CHECK(chq_context_create(nullptr) == CHQ_INVALID_INPUT);
    CHECK(chq_run(nullptr, "solve", "{}") == CHQ_INVALID_INPUT);
    CHECK(std::string(chq_last_error(nullptr)) == "null context");
    chq_context_destroy(nullptr);
}

TEST_CASE("validation and exponents") {
    Context c;
    chq_problem p{3, 1.0, 2.0, 2.0, 0.1, 1.0, 1.0};
    CHECK(chq_validate(c.ctx, &p) == CHQ_OK);
    CHECK(std::string(chq_last_error(c.ctx)).empty());
    chq_exponents e;
    REQUIRE(chq_exponents_of(c.ctx, &p, &e) == CHQ_OK);
    CHECK(e.gamma_p == doctest::Approx(0.5));
    CHECK(e.two_star_mu == doctest::Approx(5.0));
    CHECK(e.mass_class == 0);
    p.q = 7.0;
    CHECK(chq_validate(c.ctx, &p) == CHQ_INVALID_INPUT);
    CHECK(std::string(chq_last_error(c.ctx)).find("upper bound q") != std::string::npos);
    CHECK(chq_validate(c.ctx, nullptr) == CHQ_INVALID_INPUT);
}

TEST_CASE("sharp constants") {
    Context c;
    chq_sharp s;
    REQUIRE(chq_sharp_constants(c.ctx, 4, 2.0, &s) == CHQ_OK);
    CHECK(s.S_HL * std::pow(s.C_Nmu, 1.0 / 3.0) == doctest::Approx(s.S).epsilon(1e-10));
    CHECK(chq_sharp_constants(c.ctx, 2, 1.0, &s) == CHQ_INVALID_INPUT);
}

TEST_CASE("run returns JSON output and status") {
    Context c;
    const char* cfg = R"({"N":3,"mu":1,"p":2,"q":2,"nu":0.2,"a":1,"b":1,"grid":{"M":256}})";
    REQUIRE(chq_run(c.ctx, "solve", cfg) == CHQ_OK);
    const auto out = nlohmann::json::parse(chq_output_json(c.ctx));
    CHECK(out.at("kind") == "choquard-run-record");
    CHECK(out.at("result").at("converged") == true);

    CHECK(chq_run(c.ctx, "solve", "{not json") == CHQ_INVALID_INPUT);
    CHECK(nlohmann::json::parse(chq_output_json(c.ctx)).contains("error"));
    CHECK(chq_run(c.ctx, "nope", "{}") == CHQ_INVALID_INPUT);
    CHECK(std::string(chq_last_error(c.ctx)).find("unknown command") != std::string::npos);

    const char* tight = R"({"N":3,"mu":1,"p":2,"q":2,"nu":0.2,"a":1,"b":1,"grid":{"M":256},"solve":{"max_iter":2}})";
    CHECK(chq_run(c.ctx, "solve", tight) == CHQ_NOT_CONVERGED);
}

}

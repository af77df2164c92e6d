#include <cmath>
#include <filesystem>
#include <string>

#include "doctest.h"

#include "choquard/records.hpp"
#include "choquard/util.hpp"

using namespace chq;
using doctest::Approx;

namespace {

std::string error_of(const nlohmann::json& j) {
    try {
        params_from_json(j);
    } catch (const InvalidInput& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path scratch(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_SUITE("records") {

TEST_CASE("sha256 test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config parsing names the offending key") {
    nlohmann::json j{{"N", 3}, {"p", 2.0}, {"q", 2.0}, {"nu", 0.1}, {"a", 1.0}, {"b", 1.0}};
    CHECK(error_of(j).find("\"mu\"") != std::string::npos);
    j["mu"] = "one";
    CHECK(error_of(j).find("mu") != std::string::npos);
    j["mu"] = 1.0;
    CHECK(error_of(j).empty());
    const ProblemParams p = params_from_json(j);
    CHECK(p.mu == 1.0);
    CHECK(params_from_json(nlohmann::json::parse(to_json(p).dump())).nu == p.nu);

    CHECK_THROWS_AS(grid_from_json(nlohmann::json{{"M", -4}}), InvalidInput);
    const GridSpec g = grid_from_json(nlohmann::json{{"M", 300}});
    CHECK(g.M == 300);
    CHECK(g.R_max == 20.0);
}

TEST_CASE("solve config round trip") {
    SolveConfig c;
    c.max_iter = 77;
    c.tol_P = 3e-7;
    c.init = "bubble";
    c.seed = 99;
    c.R0 = 0.8;
    const SolveConfig d = solve_config_from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(d.max_iter == 77);
    CHECK(d.tol_P == 3e-7);
    CHECK(d.init == "bubble");
    CHECK(d.seed == 99);
    REQUIRE(d.R0);
    CHECK(*d.R0 == 0.8);
    CHECK_THROWS_AS(solve_config_from_json(nlohmann::json{{"init", "ring"}}), InvalidInput);
}

TEST_CASE("records round trip byte for byte and detect tampering") {
    const RunRecord r = make_record("solve", ojson{{"N", 3}, {"nu", 0.1}}, ojson{{"S", 5.48}},
                                    ojson{{"J", -0.00606695352}, {"converged", true}});
    const std::string text = serialize(r);
    const RunRecord back = parse_record(text);
    CHECK(serialize(back) == text);
    CHECK(back.hash == r.hash);
    CHECK(r.hash.size() == 64);

    std::string tampered = text;
    const auto at = tampered.find("-0.00606695352");
    REQUIRE(at != std::string::npos);
    tampered[at + 13] = '3';
    CHECK_THROWS_AS(parse_record(tampered), InvalidInput);
    CHECK_THROWS_AS(parse_record("{\"kind\": \"other\"}"), InvalidInput);
    CHECK_THROWS_AS(parse_record("not json"), InvalidInput);

    const RunRecord other = make_record("solve", ojson{{"N", 3}, {"nu", 0.1}}, ojson{{"S", 5.48}},
                                        ojson{{"J", -0.00606695353}, {"converged", true}});
    CHECK(other.hash != r.hash);
}

TEST_CASE("files and fields") {
    const auto dir = scratch("choquard_records_test");
    std::filesystem::remove_all(dir);
    const std::string nested = (dir / "a" / "b" / "note.txt").string();
    write_text_file(nested, "hello\n");
    CHECK(read_text_file(nested) == "hello\n");
    CHECK_THROWS_AS(read_text_file((dir / "missing.txt").string()), IOError);

    const GridPtr g = RadialGrid::build(4, 100, 7.5, 2.5);
    const RadialField u = sample(g, [](double r) { return std::exp(-r) / 3.0; });
    const RadialField v = sample(g, [](double r) { return 1.0 / (1.0 + r * r); });
    const std::string fp = (dir / "fields.json").string();
    write_fields(fp, u, v);
    const auto [u2, v2] = read_fields(fp);
    CHECK(u2.values == u.values);
    CHECK(v2.values == v.values);
    CHECK(u2.grid->same_shape(*g));
    std::filesystem::remove_all(dir);
}

}

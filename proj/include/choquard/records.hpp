#pragma once

#include <string>

#include "json.hpp"

#include "choquard/ground_state.hpp"
#include "choquard/params.hpp"

namespace chq {

using ojson = nlohmann::ordered_json;

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kRecordFormat = 1;

struct GridSpec {
    int M = 2048;
    double R_max = 20.0;
    double stretch = 2.0;
};

struct RunRecord {
    std::string command;
    ojson input;
    ojson constants;
    ojson result;
    std::string hash;  // sha256 of the canonical record body
};

ojson to_json(const ProblemParams& p);
ojson to_json(const GridSpec& g);
ojson to_json(const SolveConfig& c);
ojson to_json(const ConstantsTable& c);
ojson to_json(const LandscapeReport& l);
// Scalar summary of a solve; fields are persisted separately.
ojson summary_json(const SolveReport& r);

// Missing or mistyped keys raise InvalidInput naming the key.
ProblemParams params_from_json(const nlohmann::json& j);
GridSpec grid_from_json(const nlohmann::json& j);
SolveConfig solve_config_from_json(const nlohmann::json& j);

RunRecord make_record(std::string command, ojson input, ojson constants, ojson result);
std::string serialize(const RunRecord& r);
RunRecord parse_record(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Field checkpoint: grid geometry plus nodal values, JSON.
void write_fields(const std::string& path, const RadialField& u, const RadialField& v);
std::pair<RadialField, RadialField> read_fields(const std::string& path);

}  // namespace chq

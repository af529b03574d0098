#pragma once

#include "varseg/core.hpp"
#include "varseg/datagen.hpp"
#include "varseg/evalsuite.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace varseg::io {

using nlohmann::json;

inline constexpr int schema_version = 1;
inline constexpr const char* tool_version = "0.1.0";

/// Numeric CSV; a first row with any non-numeric cell is taken as a header.
TimeSeries parse_csv(std::string_view text);
TimeSeries load_csv(const std::string& path);
/// 17 significant digits, no header.
std::string format_csv(const TimeSeries& data);
void save_csv(const TimeSeries& data, const std::string& path);

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const std::string& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);

struct RunManifest {
    std::string command;
    json config = json::object();
    std::string input_digest;  ///< sha256 of the input bytes, empty without input
    std::optional<std::uint64_t> seed;
    std::string started;  ///< UTC, ISO 8601
    std::string finished;
    std::string version = tool_version;
};

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);
/// sha256 of the manifest's compact JSON serialization.
std::string manifest_digest(const RunManifest& m);
std::string utc_now();

json to_json(const Matrix& m);  ///< row-major nested arrays
Matrix matrix_from_json(const json& j);

json to_json(const DetectionResult& r);
DetectionResult result_from_json(const json& j);

/// Result document with the manifest embedded; returns the manifest digest.
std::string save_result(const DetectionResult& result, const RunManifest& manifest, const std::string& path);
DetectionResult load_result(const std::string& path);

json to_json(const datagen::GenerationSpec& spec);
datagen::GenerationSpec spec_from_json(const json& j);

/// Generator spec, per-segment transitions and, for the low-rank methods,
/// the low-rank and sparse parts.
json ground_truth_json(const datagen::GenerationSpec& spec, const datagen::Simulation& sim);

json to_json(const eval::SimulationSummary& s);
/// Plain-text table in the layout of the R summary printout.
std::string summary_table(const eval::SimulationSummary& s);

/// Checks the keys and types of a result document; returns the problems found.
std::vector<std::string> validate_result_json(const json& j);

}  // namespace varseg::io

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "routescan/corpus.hpp"
#include "routescan/detector.hpp"
#include "routescan/profile.hpp"
#include "routescan/selector.hpp"
#include "routescan/telemetry.hpp"

namespace routescan {

using Json = nlohmann::json;

/// One TelemetryRecord as a single-line wire object. Layers are written as
/// dense load arrays of length E_l; unobserved layers are omitted.
Json telemetry_to_json(const TelemetryRecord& record, const DeploymentProfile& profile);
/// Validates against `profile`. `line` is only used for error messages.
TelemetryRecord telemetry_from_json(const Json& j, const DeploymentProfile& profile, std::size_t line = 0);

/// Reads JSONL in file order. Blank lines are skipped. Errors carry the line number.
std::vector<TelemetryRecord> read_telemetry(const std::filesystem::path& path, const DeploymentProfile& profile);
std::vector<TelemetryRecord> parse_telemetry(std::istream& in, const DeploymentProfile& profile);
void write_telemetry(const std::filesystem::path& path, const std::vector<TelemetryRecord>& records,
                     const DeploymentProfile& profile);
std::string format_telemetry(const std::vector<TelemetryRecord>& records, const DeploymentProfile& profile);

Json profile_to_json(const DeploymentProfile& p);
DeploymentProfile profile_from_json(const Json& j);

Json bundle_to_json(const DetectorBundle& b);
DetectorBundle bundle_from_json(const Json& j);

/// Per-dimension audit record of one selector run.
Json selector_report(const SelectorResult& r, const SelectorConfig& config, const std::string& config_hash);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Writes to a sibling temporary file, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace routescan

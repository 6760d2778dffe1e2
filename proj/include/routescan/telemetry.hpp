#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace routescan {

enum class ClassLabel { benign, positive };

std::string_view to_string(ClassLabel label) noexcept;
/// Throws ParseError on anything other than "benign" / "positive".
ClassLabel parse_class_label(std::string_view text);

/// One request's aggregated prefilling telemetry and its audit labels.
/// `loads[layer_id][expert_id]` is the execution load n_{l,e}; layers and
/// experts that were not observed are simply absent.
struct TelemetryRecord {
  std::string request_id;
  std::string profile_id;
  std::string group_id;
  ClassLabel label = ClassLabel::benign;
  std::string domain;
  std::optional<std::string> wrapper;
  std::map<std::string, bool> attributes;
  std::map<int, std::map<int, double>> loads;

  bool operator==(const TelemetryRecord&) const = default;
};

}  // namespace routescan

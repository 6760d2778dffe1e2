#include "routescan/representation.hpp"

#include <charconv>

namespace routescan {

std::string_view to_string(StatName stat) noexcept {
  switch (stat) {
    case StatName::act_rate: return "act_rate";
    case StatName::eff_rate: return "eff_rate";
    case StatName::cov_gap: return "cov_gap";
    case StatName::cov_conc: return "cov_conc";
  }
  return "act_rate";
}

StatName parse_stat_name(std::string_view text) {
  for (StatName s : kStatOrder)
    if (to_string(s) == text) return s;
  throw ParseError("unknown structural statistic '" + std::string(text) + "'");
}

std::string FeatureKey::to_string() const {
  if (kind == FeatureKind::raw) return "raw:L" + std::to_string(layer_id) + ":E" + std::to_string(expert_id);
  return "stat:L" + std::to_string(layer_id) + ":" + std::string(routescan::to_string(stat));
}

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError("malformed feature key '" + std::string(whole) + "'");
  return v;
}

}  // namespace

FeatureKey FeatureKey::parse(std::string_view text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos || text.substr(c1 + 1, 1) != "L")
    throw ParseError("malformed feature key '" + std::string(text) + "'");
  const auto kind = text.substr(0, c1);
  const int layer = parse_int(text.substr(c1 + 2, c2 - c1 - 2), text);
  const auto tail = text.substr(c2 + 1);
  if (kind == "raw") {
    if (tail.empty() || tail.front() != 'E') throw ParseError("malformed feature key '" + std::string(text) + "'");
    return raw(layer, parse_int(tail.substr(1), text));
  }
  if (kind == "stat") return statistic(layer, parse_stat_name(tail));
  throw ParseError("malformed feature key '" + std::string(text) + "'");
}

std::vector<FeatureKey> canonical_keys(const DeploymentProfile& profile) {
  std::vector<FeatureKey> keys;
  keys.reserve(static_cast<std::size_t>(profile.feature_dim()));
  for (int l = 1; l <= profile.num_layers(); ++l)
    for (int e = 0; e < profile.experts(l); ++e) keys.push_back(FeatureKey::raw(l, e));
  for (int l = 1; l <= profile.num_layers(); ++l)
    for (StatName s : kStatOrder) keys.push_back(FeatureKey::statistic(l, s));
  return keys;
}

SampleMeta meta_of(const TelemetryRecord& record) {
  return {record.request_id, record.group_id, record.label, record.domain, record.wrapper, record.attributes};
}

void assemble_values(const TelemetryRecord& record, const DeploymentProfile& profile, Eigen::Ref<Eigen::VectorXd> out) {
  if (record.profile_id != profile.profile_id)
    throw AlignmentError("record '" + record.request_id + "' was collected under profile '" + record.profile_id +
                         "', not '" + profile.profile_id + "'");
  const int num_layers = profile.num_layers();
  if (out.size() != profile.feature_dim()) throw AlignmentError("output buffer does not match profile dimension");
  for (const auto& [layer_id, _] : record.loads)
    if (layer_id < 1 || layer_id > num_layers)
      throw AlignmentError("record '" + record.request_id + "' has layer " + std::to_string(layer_id) +
                           " outside [1, " + std::to_string(num_layers) + "]");

  out.setZero();
  Eigen::Index raw_offset = 0;
  const Eigen::Index stat_offset = profile.total_experts();
  for (int l = 1; l <= num_layers; ++l) {
    const int experts = profile.experts(l);
    const auto it = record.loads.find(l);
    if (it != record.loads.end()) {
      Eigen::VectorXd n = Eigen::VectorXd::Zero(experts);
      for (const auto& [e, v] : it->second) {
        if (e < 0 || e >= experts)
          throw AlignmentError("record '" + record.request_id + "' layer " + std::to_string(l) + " has expert " +
                               std::to_string(e) + " outside [0, " + std::to_string(experts) + ")");
        n(e) = v;
      }
      const Eigen::VectorXd p = normalize_loads(n);
      out.segment(raw_offset, experts) = p;
      const auto s = layer_structural_stats(p, experts, profile.eps_cov);
      out.segment<4>(stat_offset + 4 * (l - 1)) << s.act_rate, s.eff_rate, s.cov_gap, s.cov_conc;
    }
    raw_offset += experts;
  }
}

RequestFeatureVector assemble_representation(const TelemetryRecord& record, const DeploymentProfile& profile) {
  RequestFeatureVector v;
  v.values.resize(profile.feature_dim());
  assemble_values(record, profile, v.values);
  v.profile_id = profile.profile_id;
  v.keys = canonical_keys(profile);
  v.meta = meta_of(record);
  return v;
}

}  // namespace routescan

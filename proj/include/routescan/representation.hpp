#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routescan/errors.hpp"
#include "routescan/profile.hpp"
#include "routescan/telemetry.hpp"

namespace routescan {

enum class FeatureKind { raw = 0, stat = 1 };
enum class StatName { act_rate = 0, eff_rate = 1, cov_gap = 2, cov_conc = 3 };

inline constexpr std::array<StatName, 4> kStatOrder = {StatName::act_rate, StatName::eff_rate, StatName::cov_gap,
                                                       StatName::cov_conc};

std::string_view to_string(StatName stat) noexcept;
StatName parse_stat_name(std::string_view text);

/// Identity of one representation dimension: (layer, expert) for the raw
/// block, (layer, statistic) for the structural block. The defaulted
/// ordering is the canonical key order.
struct FeatureKey {
  FeatureKind kind = FeatureKind::raw;
  int layer_id = 1;
  int expert_id = 0;  // raw only
  StatName stat = StatName::act_rate;  // stat only

  static FeatureKey raw(int layer_id, int expert_id) { return {FeatureKind::raw, layer_id, expert_id, StatName::act_rate}; }
  static FeatureKey statistic(int layer_id, StatName s) { return {FeatureKind::stat, layer_id, 0, s}; }

  /// "raw:L1:E3" or "stat:L2:eff_rate".
  std::string to_string() const;
  static FeatureKey parse(std::string_view text);

  auto operator<=>(const FeatureKey&) const = default;
};

/// All keys of a profile in canonical order; length sum(E_l) + 4L.
std::vector<FeatureKey> canonical_keys(const DeploymentProfile& profile);

/// Divides a layer's loads by their total; an all-zero layer stays all-zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> normalize_loads(const Eigen::MatrixBase<Derived>& loads) {
  using Scalar = typename Derived::Scalar;
  if ((loads.array() < Scalar(0)).any()) throw InputError("negative expert load");
  if (!loads.allFinite()) throw InputError("non-finite expert load");
  const Scalar total = loads.sum();
  if (total <= Scalar(0)) return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(loads.size());
  return loads / total;
}

template <typename Scalar>
struct LayerStats {
  Scalar act_rate{0};
  Scalar eff_rate{0};
  Scalar cov_gap{0};
  Scalar cov_conc{0};
};

/// Probabilities below this are treated as unused experts.
inline constexpr double kActiveFloor = 1e-15;

/// Coverage / effective-spread statistics of one normalized layer.
/// Entropy uses the natural log with 0 log 0 = 0. exp(H) is clamped into
/// [1, a_l] so rounding cannot push v_eff above v_act.
template <typename Derived>
LayerStats<typename Derived::Scalar> layer_structural_stats(const Eigen::MatrixBase<Derived>& p, int num_experts,
                                                            double eps_cov) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  LayerStats<Scalar> s;
  int active = 0;
  Scalar entropy(0);
  for (Eigen::Index e = 0; e < p.size(); ++e) {
    const Scalar pe = p(e);
    if (pe > Scalar(kActiveFloor)) {
      ++active;
      entropy -= pe * log(pe);
    }
  }
  if (active == 0) return s;
  const Scalar e_count(num_experts);
  Scalar effective = exp(entropy);
  if (effective > Scalar(active)) effective = Scalar(active);
  if (effective < Scalar(1)) effective = Scalar(1);
  s.act_rate = Scalar(active) / e_count;
  s.eff_rate = effective / e_count;
  s.cov_gap = s.act_rate - s.eff_rate;
  s.cov_conc = Scalar(1) - s.eff_rate / (s.act_rate + Scalar(eps_cov));
  return s;
}

/// Non-target labels carried alongside a feature row.
struct SampleMeta {
  std::string request_id;
  std::string group_id;
  ClassLabel label = ClassLabel::benign;
  std::string domain;
  std::optional<std::string> wrapper;
  std::map<std::string, bool> attributes;

  bool operator==(const SampleMeta&) const = default;
};

SampleMeta meta_of(const TelemetryRecord& record);

/// The unified representation of one request.
struct RequestFeatureVector {
  std::string profile_id;
  std::vector<FeatureKey> keys;
  Eigen::VectorXd values;
  SampleMeta meta;
};

/// Raw block (normalized loads in (layer, expert) order) followed by the
/// structural block (four stats per layer). Missing experts count as zero
/// load; missing layers give all-zero raw and stat entries.
RequestFeatureVector assemble_representation(const TelemetryRecord& record, const DeploymentProfile& profile);

/// Values only, written into `out` (length profile.feature_dim()).
void assemble_values(const TelemetryRecord& record, const DeploymentProfile& profile, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace routescan

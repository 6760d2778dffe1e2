#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "routescan/profile.hpp"
#include "routescan/telemetry.hpp"

namespace routescan {

/// Desk-scale stand-in for a benchmark telemetry collection.
///
/// Every domain holds `requests_per_cell` prompt groups. A group yields one
/// benign request, one direct positive request and one wrapped positive per
/// wrapper, all sharing a group-level routing latent. Router logits per
/// token are
///
///   group latent + domain template + [positive] class bias + [wrapped] wrapper offset + token noise
///
/// The class bias adds `class_bias_strength` to a fixed expert subset per
/// layer that is the same for every domain, so positive intent shifts
/// routing the same way in held-out domains.
struct SyntheticCorpusSpec {
  DeploymentProfile profile;
  std::vector<std::string> domains;
  std::vector<std::string> wrappers;
  int requests_per_cell = 50;
  int min_tokens = 16;
  int max_tokens = 64;
  double class_bias_strength = 0.0;
  std::uint64_t seed = 0;

  int bias_experts_per_layer = 2;
  double token_noise_std = 1.0;
  double group_noise_std = 0.5;
  double domain_shift_std = 0.5;
  double wrapper_shift_strength = 1.0;
  int wrapper_experts_per_layer = 2;
  /// attribute name -> domains in which the attribute is true.
  std::map<std::string, std::vector<std::string>> domain_attributes;

  void validate() const;
};

/// Experts receiving the positive-class bias, per layer (0-based layer index).
std::vector<std::vector<int>> bias_expert_subsets(const SyntheticCorpusSpec& spec);

/// Records ordered by domain, then cell (benign, positive, wrappers...), then
/// group. Deterministic in `spec.seed`; each cell draws from its own sub-seed.
std::vector<TelemetryRecord> generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

}  // namespace routescan

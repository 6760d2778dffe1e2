#pragma once

#include <string>
#include <vector>

namespace routescan {

/// MoE topology plus the telemetry constants that go with a deployment.
/// Layer ids exposed to users are 1-based; vectors here are indexed 0..L-1.
struct DeploymentProfile {
  std::string profile_id;
  std::vector<int> experts_per_layer;
  std::vector<int> top_k_per_layer;
  double eps_cov = 1e-9;
  double thread_scale = 256.0;
  double thread_noise_std = 0.0;

  int num_layers() const noexcept { return static_cast<int>(experts_per_layer.size()); }
  int experts(int layer_id) const { return experts_per_layer.at(static_cast<std::size_t>(layer_id - 1)); }
  int top_k(int layer_id) const { return top_k_per_layer.at(static_cast<std::size_t>(layer_id - 1)); }
  int total_experts() const noexcept;
  /// Length of the unified representation: sum of E_l plus four stats per layer.
  int feature_dim() const noexcept { return total_experts() + 4 * num_layers(); }

  /// Throws TopologyError / ConfigError on an inconsistent profile.
  void validate() const;
};

/// L layers of E experts with top-K routing each.
DeploymentProfile uniform_profile(std::string id, int layers, int experts, int top_k);

}  // namespace routescan

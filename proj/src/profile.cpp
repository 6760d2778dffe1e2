#include "routescan/profile.hpp"

#include <numeric>

#include "routescan/errors.hpp"

namespace routescan {

int DeploymentProfile::total_experts() const noexcept {
  return std::accumulate(experts_per_layer.begin(), experts_per_layer.end(), 0);
}

void DeploymentProfile::validate() const {
  if (experts_per_layer.empty()) throw TopologyError("profile '" + profile_id + "' has no layers");
  if (top_k_per_layer.size() != experts_per_layer.size())
    throw TopologyError("profile '" + profile_id + "': top_k list length differs from layer count");
  for (std::size_t l = 0; l < experts_per_layer.size(); ++l) {
    const int e = experts_per_layer[l];
    const int k = top_k_per_layer[l];
    if (e <= 0) throw TopologyError("layer " + std::to_string(l + 1) + " has no experts");
    if (k <= 0 || k > e)
      throw TopologyError("layer " + std::to_string(l + 1) + ": top_k " + std::to_string(k) +
                          " outside [1, " + std::to_string(e) + "]");
  }
  if (!(eps_cov > 0.0)) throw ConfigError("eps_cov must be positive");
  if (!(thread_scale > 0.0)) throw ConfigError("thread_scale must be positive");
  if (!(thread_noise_std >= 0.0)) throw ConfigError("thread_noise_std must be non-negative");
}

DeploymentProfile uniform_profile(std::string id, int layers, int experts, int top_k) {
  DeploymentProfile p;
  p.profile_id = std::move(id);
  p.experts_per_layer.assign(static_cast<std::size_t>(layers), experts);
  p.top_k_per_layer.assign(static_cast<std::size_t>(layers), top_k);
  return p;
}

}  // namespace routescan

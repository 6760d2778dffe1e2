#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "routescan/profile.hpp"

namespace routescan {

/// Router logits of one layer: one row per token, one column per expert.
struct RouterLogits {
  int layer_id = 1;
  Eigen::MatrixXd logits;
};

/// Sparse top-K gating result for T tokens.
struct RoutingDecision {
  int num_experts = 0;
  /// selected[t] holds the K chosen expert indices of token t, best first.
  std::vector<std::vector<int>> selected;
  /// T x M gate weights; row t is supported exactly on selected[t] and sums to 1.
  Eigen::MatrixXd weights;

  int num_tokens() const noexcept { return static_cast<int>(selected.size()); }
};

struct ExpertLoadVector {
  int layer_id = 1;
  Eigen::VectorXi loads;
};

/// Keeps the K largest logits per token (ties go to the lower expert index)
/// and renormalizes a softmax over them.
RoutingDecision route_topk(const Eigen::Ref<const Eigen::MatrixXd>& logits, int k);
RoutingDecision route_topk(const RouterLogits& logits, int k);

/// Counts tokens per expert. The loads sum to T*K.
Eigen::VectorXi accumulate_loads(const RoutingDecision& decision, int num_experts);

/// Active-thread proxy n = max(0, c*load + noise), noise ~ N(0, thread_noise_std^2).
Eigen::VectorXd thread_proxy(const Eigen::Ref<const Eigen::VectorXi>& loads, const DeploymentProfile& profile,
                             std::uint64_t seed);

}  // namespace routescan

#include "routescan/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "routescan/errors.hpp"
#include "routescan/random.hpp"

namespace routescan {

RoutingDecision route_topk(const Eigen::Ref<const Eigen::MatrixXd>& logits, int k) {
  const auto num_experts = static_cast<int>(logits.cols());
  if (k < 1 || k > num_experts)
    throw TopologyError("top-k " + std::to_string(k) + " outside [1, " + std::to_string(num_experts) + "]");
  if (!logits.allFinite()) throw InputError("router logits contain non-finite values");

  RoutingDecision out;
  out.num_experts = num_experts;
  out.selected.resize(static_cast<std::size_t>(logits.rows()));
  out.weights = Eigen::MatrixXd::Zero(logits.rows(), num_experts);

  std::vector<int> order(static_cast<std::size_t>(num_experts));
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      return row(a) > row(b) || (row(a) == row(b) && a < b);
    });
    auto& chosen = out.selected[static_cast<std::size_t>(t)];
    chosen.assign(order.begin(), order.begin() + k);

    const double top = row(chosen.front());
    double total = 0.0;
    for (int e : chosen) total += std::exp(row(e) - top);
    for (int e : chosen) out.weights(t, e) = std::exp(row(e) - top) / total;
  }
  return out;
}

RoutingDecision route_topk(const RouterLogits& logits, int k) { return route_topk(logits.logits, k); }

Eigen::VectorXi accumulate_loads(const RoutingDecision& decision, int num_experts) {
  Eigen::VectorXi loads = Eigen::VectorXi::Zero(num_experts);
  for (const auto& chosen : decision.selected) {
    for (int e : chosen) {
      if (e < 0 || e >= num_experts)
        throw TopologyError("expert index " + std::to_string(e) + " outside [0, " + std::to_string(num_experts) + ")");
      ++loads(e);
    }
  }
  return loads;
}

Eigen::VectorXd thread_proxy(const Eigen::Ref<const Eigen::VectorXi>& loads, const DeploymentProfile& profile,
                             std::uint64_t seed) {
  Eigen::VectorXd threads = profile.thread_scale * loads.cast<double>();
  if (profile.thread_noise_std > 0.0) {
    Rng rng(seed);
    for (Eigen::Index e = 0; e < threads.size(); ++e)
      threads(e) = std::max(0.0, threads(e) + profile.thread_noise_std * standard_normal(rng));
  }
  return threads;
}

}  // namespace routescan

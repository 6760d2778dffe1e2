#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routescan/feature_matrix.hpp"

namespace routescan {

struct SelectorConfig {
  double eta = 0.75;
  double kappa = 0.5;
  int bootstrap_rounds = 6;
  double bootstrap_benchmark_fraction = 0.80;
  double bootstrap_gap_floor = 1e-12;
  double q_low = 0.94;
  double q_high = 0.998;
  double q_slope = 12.0;
  double q_center = 0.43;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-dimension class-gap statistics over the source benchmarks. Rows of a
/// source matrix are grouped into benchmarks by their `domain`.
struct DimensionStats {
  std::vector<std::string> benchmarks;  // sorted
  Eigen::VectorXd pooled_gap;           // d_j = mean(+) - mean(-)
  Eigen::VectorXd direction;            // s_j in {-1, 0, +1}
  Eigen::MatrixXd benchmark_gaps;       // B x d, g_{b,j} = s_j * per-benchmark gap
  Eigen::VectorXd sign_consistency;     // c_j = fraction of benchmarks with g_{b,j} > 0
  Eigen::VectorXd gap_std;              // population std of g_{b,.}
  Eigen::VectorXd domain_std;           // population std of per-benchmark overall means
  Eigen::VectorXd benign_mean;          // pooled benign mean
  std::optional<Eigen::VectorXd> edge_mean;
};

/// Throws ProtocolError if a benchmark lacks a class or `edge_ids` matches no row.
DimensionStats compute_dimension_stats(const FeatureMatrix& source, std::span<const std::string> edge_ids = {});

double invariance_score(double pooled_gap, double sign_consistency, double gap_std, double domain_std);
Eigen::VectorXd invariance_score(const DimensionStats& stats);

/// 2|AUC - 0.5| of a single dimension.
double single_dim_auc_score(std::span<const double> positive, std::span<const double> negative);
Eigen::VectorXd single_dim_auc_scores(const FeatureMatrix& source);

/// Fraction of bootstrap rounds in which each dimension keeps a positive
/// signed gap on enough benchmarks. Values are multiples of 1/rounds.
Eigen::VectorXd bootstrap_stability(const FeatureMatrix& source, const SelectorConfig& config);

struct DimensionScores {
  Eigen::VectorXd invariance;
  Eigen::VectorXd auc;
  Eigen::VectorXd stability;
  Eigen::VectorXd disc;
  Eigen::VectorXd cons;
  Eigen::VectorXd layer_prior;
  Eigen::VectorXd edge_penalty;
  Eigen::VectorXd prior;
  Eigen::VectorXd rho;
  Eigen::VectorXd rho_tilde;
  Eigen::VectorXd mass;
};

/// 1 - 0.5 (l - 1)/(L - 1), or 1 for a single-layer model.
double layer_prior(int layer_id, int num_layers);

/// Clips at zero, divides by the max (rho~) and by the sum (pi).
void normalize_scores(const Eigen::Ref<const Eigen::VectorXd>& rho, Eigen::VectorXd& rho_tilde, Eigen::VectorXd& mass);

DimensionScores hybrid_score(const DimensionStats& stats, const Eigen::Ref<const Eigen::VectorXd>& auc,
                             const Eigen::Ref<const Eigen::VectorXd>& stability, std::span<const FeatureKey> keys,
                             int num_layers);

struct SupportSelection {
  std::vector<Eigen::Index> indices;  // into the full key list, best first
  std::vector<FeatureKey> keys;
  double diffuseness = 0.0;
  double target_mass = 0.0;
  double cumulative_mass = 0.0;
  std::size_t positive_count = 0;

  bool empty() const noexcept { return indices.empty(); }
};

double target_mass(double diffuseness, const SelectorConfig& config);

/// Shortest prefix of the score-sorted dimensions whose mass reaches q(delta).
/// Ties in rho~ keep canonical key order. Empty when no score is positive.
SupportSelection adaptive_support(const Eigen::Ref<const Eigen::VectorXd>& rho, std::span<const FeatureKey> keys,
                                  const SelectorConfig& config);

/// eta + (1 - eta) rho~^kappa on the support, zero elsewhere.
Eigen::VectorXd soft_weights(const SupportSelection& selection, const Eigen::Ref<const Eigen::VectorXd>& rho_tilde,
                             const SelectorConfig& config);

struct SelectorResult {
  std::vector<FeatureKey> keys;
  DimensionStats stats;
  DimensionScores scores;
  SupportSelection selection;
  Eigen::VectorXd weights;
};

/// Full selector over source rows. No target rows may be passed in.
SelectorResult run_selector(const FeatureMatrix& source, int num_layers, const SelectorConfig& config,
                            std::span<const std::string> edge_ids = {});

}  // namespace routescan

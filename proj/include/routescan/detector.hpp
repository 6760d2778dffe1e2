#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routescan/feature_matrix.hpp"
#include "routescan/logistic.hpp"
#include "routescan/selector.hpp"

namespace routescan {

/// Fixed block weights: raw loads, rate stats (act/eff), residual stats (gap/conc).
struct TransformConfig {
  double w_raw = 1.0;
  double w_rate = 0.75;
  double w_res = 0.25;

  void validate() const;
  double block_weight(const FeatureKey& key) const noexcept;
};

/// Source-fitted detector input: support restriction, max-abs scaling, and
/// per-column weights (selector soft weight times block weight). Frozen after fitting.
struct FeatureTransform {
  std::string profile_id;
  std::vector<FeatureKey> keys;       // support, in selection order
  std::vector<Eigen::Index> columns;  // positions of `keys` in the canonical key list
  Eigen::VectorXd divisors;
  Eigen::VectorXd weights;

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(keys.size()); }
  bool operator==(const FeatureTransform&) const = default;
};

/// Throws ConfigError on an empty support, ProtocolError on non-source rows.
FeatureTransform fit_transform(const FeatureMatrix& train, const SupportSelection& selection,
                               const Eigen::Ref<const Eigen::VectorXd>& selector_weights,
                               const TransformConfig& config = {});

/// w_j * R_j / divisor_j over the support columns; no clipping.
Eigen::VectorXd apply_transform(const FeatureTransform& t, const RequestFeatureVector& features);
Eigen::MatrixXd apply_transform(const FeatureTransform& t, const FeatureMatrix& features);

struct DetectorModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  double inverse_strength = 1.0;  // C
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
};

inline constexpr int kDetectorMaxIterations = 5000;
inline constexpr double kDetectorGradientTolerance = 1e-7;

/// L2 logistic detector with unpenalized intercept, no class weighting.
/// Throws FitError if only one class is present.
DetectorModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                           double inverse_strength);

double raw_margin(const DetectorModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd raw_margins(const DetectorModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x);

struct RegularizerConfig {
  double c_min = 0.03;
  double c_max = 0.30;
  double c_ref = 0.10;
  double alpha = 12.0;
  double beta = 1.0;
  double gamma = 0.65;
  double eps_sep = 1e-6;

  void validate() const;
};

struct MarginStats {
  double benign_mean = 0.0;
  std::vector<double> subset_means;
  double separation = 0.0;  // min over subsets of (mu_P - mu_0)
  double disparity = 0.0;   // (max mu_P - min mu_P) / (|separation| + eps)
};

/// Throws ProtocolError on an empty benign set or an empty subset.
MarginStats source_margin_stats(const Eigen::Ref<const Eigen::VectorXd>& margins,
                                std::span<const Eigen::Index> benign_rows,
                                const std::vector<std::vector<Eigen::Index>>& positive_subsets,
                                double eps_sep = 1e-6);

/// C = C_min (C_max / C_min)^sigmoid(alpha (separation - beta disparity - gamma)).
double adaptive_regularization_strength(double separation, double disparity, const RegularizerConfig& config = {});

struct CalibrationModel {
  double slope = 1.0;
  double offset = 0.0;
  bool identity_fallback = false;
  bool operator==(const CalibrationModel&) const = default;
};

inline constexpr double kPlattInverseStrength = 1e6;
inline constexpr int kPlattMaxIterations = 1000;

/// One-dimensional Platt fit; identity fallback when a class is missing.
CalibrationModel fit_platt(const Eigen::Ref<const Eigen::VectorXd>& margins, const Eigen::Ref<const Eigen::VectorXd>& labels);

/// sigmoid(a s + b), or s itself under the identity fallback.
double calibrated_score(const CalibrationModel& cal, double margin);
Eigen::VectorXd calibrated_scores(const CalibrationModel& cal, const Eigen::Ref<const Eigen::VectorXd>& margins);

/// Protocol-defined positive subsets: name -> request ids.
using PositivePartition = std::map<std::string, std::vector<std::string>>;

struct BundleProvenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Everything needed to score target requests; a function of source data only.
struct DetectorBundle {
  FeatureTransform transform;
  DetectorModel model;
  CalibrationModel calibration;
  MarginStats margin_stats;
  std::vector<std::string> subset_names;
  double reference_strength = 0.10;
  BundleProvenance provenance;
};

/// Transform on train, temporary detector at C_ref, validation margin stats,
/// adaptive C, final detector, Platt on the final detector's validation margins.
DetectorBundle train_audit_model(const FeatureMatrix& train, const FeatureMatrix& validation,
                                 const PositivePartition& partition, const SelectorResult& selector,
                                 const TransformConfig& transform_config = {},
                                 const RegularizerConfig& regularizer = {}, BundleProvenance provenance = {});

struct BundleScores {
  Eigen::VectorXd margins;
  Eigen::VectorXd calibrated;
};

BundleScores score(const DetectorBundle& bundle, const FeatureMatrix& features);

}  // namespace routescan

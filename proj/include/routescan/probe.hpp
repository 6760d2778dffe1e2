#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>

#include "routescan/metrics.hpp"

namespace routescan {

/// Coarse-attribute probe: balanced L2 logistic regression on z-scored telemetry.
struct ProbeConfig {
  double inverse_strength = 1.0;
  int max_iterations = 2000;
  bool balanced = true;
  double threshold = 0.5;
  double high_confidence = 0.9;
  double train_fraction = 0.7;  // random split; the rest is test
  std::uint64_t seed = 0;
};

/// Train-only z-score normalizer; zero-variance columns keep unit scale.
struct ZScore {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static ZScore fit(const Eigen::Ref<const Eigen::MatrixXd>& x);
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

struct Probe {
  ZScore normalizer;
  Eigen::VectorXd coef;
  double intercept = 0.0;

  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

/// Throws FitError when the training rows hold a single class.
Probe fit_probe(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                const ProbeConfig& config);

struct ProbeResult {
  double positive_rate = 0.0;      // on the random-split test set
  double all_positive_f1 = 0.0;    // constant positive predictor
  double scenario_only_f1 = 0.0;   // majority attribute of each scenario in train
  MetricReport random_split;
  bool loso_available = false;
  int loso_folds = 0;
  int loso_folds_skipped = 0;  // training side held a single class
  MetricReport loso;           // pooled over held-out scenarios
};

/// Random group-aware split plus leave-one-scenario-out for one attribute.
/// LOSO is skipped (loso_available = false) with fewer than two scenarios.
ProbeResult attribute_probe_eval(const Eigen::Ref<const Eigen::MatrixXd>& features,
                                 const Eigen::Ref<const Eigen::VectorXd>& attribute,
                                 std::span<const std::string> scenarios, std::span<const std::string> groups,
                                 const ProbeConfig& config = {});

}  // namespace routescan

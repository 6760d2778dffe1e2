#pragma once

#include <span>

#include <Eigen/Core>

namespace routescan {

/// P(pos > neg) + 0.5 P(tie), by midranks. Throws MetricError if a class is empty.
double auroc(std::span<const double> positive, std::span<const double> negative);

/// Same, with labels: y(i) > 0.5 marks a positive.
double auroc(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::VectorXd>& labels);

/// Step-interpolated area under the precision-recall curve; tied scores form
/// one threshold.
double average_precision(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::VectorXd>& labels);

struct RankingMetrics {
  double auroc = 0.0;
  double average_precision = 0.0;
};

RankingMetrics ranking_metrics(const Eigen::Ref<const Eigen::VectorXd>& scores,
                               const Eigen::Ref<const Eigen::VectorXd>& labels);

/// Fixed-threshold report at the deployment threshold plus the
/// high-confidence operating point.
struct MetricReport {
  double auroc = 0.0;
  double average_precision = 0.0;
  double f1_at_05 = 0.0;
  double acc_at_05 = 0.0;
  double precision_at_p90 = 0.0;
  double coverage_at_p90 = 0.0;
  /// True when no score reached the high-confidence threshold; precision_at_p90 is then 0.
  bool p90_empty = false;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Counts and rates only; the ranking fields are left at zero.
MetricReport threshold_metrics(const Eigen::Ref<const Eigen::VectorXd>& scores,
                               const Eigen::Ref<const Eigen::VectorXd>& labels, double threshold = 0.5,
                               double high_confidence = 0.9);

/// threshold_metrics plus AUROC/AP. Requires both classes.
MetricReport evaluate_scores(const Eigen::Ref<const Eigen::VectorXd>& scores,
                             const Eigen::Ref<const Eigen::VectorXd>& labels, double threshold = 0.5,
                             double high_confidence = 0.9);

/// F1 of a fixed prediction vector (1 = positive).
double f1_score(const Eigen::Ref<const Eigen::VectorXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& labels);

}  // namespace routescan

#include "routescan/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "routescan/errors.hpp"

namespace routescan {

double auroc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw MetricError("AUROC needs at least one sample of each class");
  const std::size_t n = positive.size() + negative.size();
  std::vector<std::pair<double, bool>> all;
  all.reserve(n);
  for (double v : positive) all.emplace_back(v, true);
  for (double v : negative) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Twice the positive rank sum, so midranks stay integral.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_in_run = 0;
    while (j < n && all[j].first == all[i].first) pos_in_run += all[j++].second ? 1 : 0;
    // ranks i+1 .. j, midrank (i+1+j)/2
    twice_rank_sum += static_cast<double>(pos_in_run) * static_cast<double>(i + 1 + j);
    i = j;
  }
  const double n1 = static_cast<double>(positive.size());
  const double n2 = static_cast<double>(negative.size());
  // 2U = 2R - n1(n1+1); U/(n1 n2) with U a multiple of 1/2.
  const double twice_u = twice_rank_sum - n1 * (n1 + 1.0);
  return twice_u / (2.0 * n1 * n2);
}

namespace {

void split_by_label(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::VectorXd>& labels,
                    std::vector<double>& pos, std::vector<double>& neg) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  for (Eigen::Index i = 0; i < scores.size(); ++i) (labels(i) > 0.5 ? pos : neg).push_back(scores(i));
}

}  // namespace

double auroc(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::VectorXd>& labels) {
  std::vector<double> pos, neg;
  split_by_label(scores, labels, pos, neg);
  return auroc(pos, neg);
}

double average_precision(const Eigen::Ref<const Eigen::VectorXd>& scores,
                         const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  const Eigen::Index n = scores.size();
  const double total_pos = (labels.array() > 0.5).count();
  if (total_pos == 0 || total_pos == static_cast<double>(n))
    throw MetricError("average precision needs both classes");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores(a) > scores(b); });

  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores(order[j]) == scores(order[i])) {
      tp += labels(order[j]) > 0.5 ? 1.0 : 0.0;
      seen += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

RankingMetrics ranking_metrics(const Eigen::Ref<const Eigen::VectorXd>& scores,
                               const Eigen::Ref<const Eigen::VectorXd>& labels) {
  return {auroc(scores, labels), average_precision(scores, labels)};
}

MetricReport threshold_metrics(const Eigen::Ref<const Eigen::VectorXd>& scores,
                               const Eigen::Ref<const Eigen::VectorXd>& labels, double threshold,
                               double high_confidence) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  MetricReport r;
  long high = 0, high_tp = 0, positives = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool y = labels(i) > 0.5;
    const bool pred = scores(i) >= threshold;
    positives += y;
    if (pred && y) ++r.tp;
    else if (pred) ++r.fp;
    else if (y) ++r.fn;
    else ++r.tn;
    if (scores(i) >= high_confidence) {
      ++high;
      high_tp += y;
    }
  }
  const double tp = static_cast<double>(r.tp);
  const double precision = r.tp + r.fp > 0 ? tp / static_cast<double>(r.tp + r.fp) : 0.0;
  const double recall = positives > 0 ? tp / static_cast<double>(positives) : 0.0;
  r.f1_at_05 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  r.acc_at_05 = scores.size() > 0 ? static_cast<double>(r.tp + r.tn) / static_cast<double>(scores.size()) : 0.0;
  r.p90_empty = high == 0;
  r.precision_at_p90 = high > 0 ? static_cast<double>(high_tp) / static_cast<double>(high) : 0.0;
  r.coverage_at_p90 = positives > 0 ? static_cast<double>(high_tp) / static_cast<double>(positives) : 0.0;
  return r;
}

MetricReport evaluate_scores(const Eigen::Ref<const Eigen::VectorXd>& scores,
                             const Eigen::Ref<const Eigen::VectorXd>& labels, double threshold,
                             double high_confidence) {
  auto r = threshold_metrics(scores, labels, threshold, high_confidence);
  const auto rank = ranking_metrics(scores, labels);
  r.auroc = rank.auroc;
  r.average_precision = rank.average_precision;
  return r;
}

double f1_score(const Eigen::Ref<const Eigen::VectorXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& labels) {
  return threshold_metrics(predictions, labels, 0.5, 2.0).f1_at_05;
}

}  // namespace routescan

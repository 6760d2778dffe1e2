#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routescan/detector.hpp"
#include "routescan/metrics.hpp"
#include "routescan/selector.hpp"
#include "routescan/telemetry.hpp"

namespace routescan {

struct SplitFractions {
  double train = 0.7;
  double validation = 0.3;

  void validate() const;
};

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
  std::vector<Eigen::Index> test;
};

/// Assigns whole groups to splits. When the fractions sum to one the test
/// split stays empty. Throws ProtocolError if there are fewer groups than
/// non-empty splits.
SplitIndices group_isolated_split(std::span<const std::string> group_ids, const SplitFractions& fractions,
                                  std::uint64_t seed);
SplitIndices group_isolated_split(std::span<const TelemetryRecord> records, const SplitFractions& fractions,
                                  std::uint64_t seed);

enum class Protocol { leave_one_target_out, mixed_positive };

std::string_view to_string(Protocol p) noexcept;
Protocol parse_protocol(std::string_view text);

/// One evaluation fold with explicit request-id membership.
struct FoldSpec {
  std::string name;
  Protocol protocol = Protocol::leave_one_target_out;
  std::vector<std::string> source_benchmarks;
  std::string target;  // held-out benchmark, or unseen wrapper
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> target_ids;
  PositivePartition partition;
  SplitFractions fractions;
  std::uint64_t seed = 0;
};

/// Holds out `target`; the named sources form the group-split source pool
/// with a single positive subset.
FoldSpec make_lodo_fold(std::span<const TelemetryRecord> records, const std::string& target,
                        const std::vector<std::string>& sources, const SplitFractions& fractions, std::uint64_t seed);

/// One fold per benchmark (domain), each holding it out. Needs >= 2 benchmarks.
/// Wrapped records are ignored.
std::vector<FoldSpec> make_lodo_folds(std::span<const TelemetryRecord> records, const SplitFractions& fractions,
                                      std::uint64_t seed);

/// Source positives: direct + seen-wrapper prompts (two subsets). Target:
/// unseen-wrapper prompts against held-out paired benigns. `fractions` is a
/// three-way group split of the benchmark; its remainder is the test share.
FoldSpec make_mixed_positive_fold(std::span<const TelemetryRecord> records, const std::string& benchmark,
                                  const std::string& seen_wrapper, const std::string& unseen_wrapper,
                                  const SplitFractions& fractions, std::uint64_t seed);

/// Throws ProtocolError when a target request or group also feeds the source side.
void check_fold_isolation(std::span<const TelemetryRecord> records, const FoldSpec& fold);

struct PipelineSettings {
  SelectorConfig selector;
  TransformConfig transform;
  RegularizerConfig regularizer;
  std::string config_hash;
  std::vector<std::string> edge_ids;
};

struct FoldResult {
  FoldSpec spec;
  SelectorResult selector;
  DetectorBundle bundle;
  MetricReport metrics;
  std::vector<std::string> target_ids;
  Eigen::VectorXd target_margins;
  Eigen::VectorXd target_scores;
  Eigen::VectorXd target_labels;
};

/// Thresholds on calibrated scores; ranking on margins unless calibration
/// reverses their order.
MetricReport bundle_metrics(const DetectorBundle& bundle, const BundleScores& scored,
                            const Eigen::Ref<const Eigen::VectorXd>& labels);

/// Select, train and evaluate one fold. Target rows are featurized only after
/// the bundle is frozen and only ever tagged target_test.
FoldResult run_fold(std::span<const TelemetryRecord> records, const DeploymentProfile& profile, const FoldSpec& fold,
                    const PipelineSettings& settings);

}  // namespace routescan

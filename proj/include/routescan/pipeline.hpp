#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "routescan/errors.hpp"
#include "routescan/json_io.hpp"
#include "routescan/protocols.hpp"
#include "routescan/run_config.hpp"

namespace routescan {

/// Any failure inside run_pipeline, tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct FoldReport {
  std::string fold;
  Protocol protocol = Protocol::leave_one_target_out;
  std::string target;
  std::vector<std::string> sources;
  long target_size = 0;
  long support_size = 0;
  double inverse_strength = 0.0;
  double separation = 0.0;
  double disparity = 0.0;
  MetricReport metrics;
};

FoldReport make_fold_report(const FoldResult& r);

/// Simulated corpus when the config has a simulator, the telemetry file otherwise.
std::vector<TelemetryRecord> load_corpus(const RunConfig& config);

/// Every fold is built (and its isolation checked) before anything is fitted.
std::vector<FoldSpec> plan_folds(const RunConfig& config, std::span<const TelemetryRecord> records);

PipelineSettings pipeline_settings(const RunConfig& config);

struct PipelineOutcome {
  std::string config_hash;
  std::vector<FoldReport> reports;
  std::vector<std::filesystem::path> files;
};

/// simulate/load -> folds -> select -> train -> evaluate. Writes one selector
/// report and one detector bundle per fold plus metrics.csv and summary.json
/// into config.output_dir.
PipelineOutcome run_pipeline(const RunConfig& config);

/// Same as run_pipeline but on records already in memory.
PipelineOutcome run_pipeline(const RunConfig& config, std::span<const TelemetryRecord> records);

/// Fixed-point with 4 decimals; never prints a negative zero.
std::string format4(double x);
double round4(double x);

std::string metrics_csv(std::span<const FoldReport> reports, const std::string& config_hash);
Json summary_json(std::span<const FoldReport> reports, const std::string& config_hash);
std::vector<FoldReport> reports_from_summary(const Json& summary);

/// Writes metrics.csv and summary.json into `dir`. Needs at least one report.
std::vector<std::filesystem::path> emit_report(std::span<const FoldReport> reports, const std::string& config_hash,
                                               const std::filesystem::path& dir);

/// Fold name made safe for use in a file name.
std::string file_stem(std::string_view fold_name);

/// Feature table: metadata columns then one column per canonical key.
std::string features_csv(const FeatureMatrix& m, const std::string& config_hash);

struct TrainedAudit {
  SelectorResult selector;
  DetectorBundle bundle;
};

/// Group split of the whole corpus into train/validation; positives are
/// partitioned by wrapper ("direct" for unwrapped) or form one "harmful"
/// subset when nothing is wrapped.
TrainedAudit train_on_corpus(const RunConfig& config, std::span<const TelemetryRecord> records);

/// Scores every record with a frozen bundle.
FoldReport evaluate_bundle(const DetectorBundle& bundle, std::span<const TelemetryRecord> records,
                           const DeploymentProfile& profile);

/// Attribute probe with scenario = domain, reported in random-split and LOSO rows.
Json probe_report(const RunConfig& config, std::span<const TelemetryRecord> records, const std::string& config_hash);

}  // namespace routescan

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "routescan/corpus.hpp"
#include "routescan/detector.hpp"
#include "routescan/json_io.hpp"
#include "routescan/probe.hpp"
#include "routescan/profile.hpp"
#include "routescan/protocols.hpp"
#include "routescan/selector.hpp"

namespace routescan {

struct LotoFoldConfig {
  std::string target;
  std::vector<std::string> sources;  // empty: every other domain
};

struct ProtocolConfig {
  Protocol kind = Protocol::leave_one_target_out;
  SplitFractions fractions;  // source pool split
  std::vector<LotoFoldConfig> folds;  // empty: one fold per domain

  // mixed_positive
  std::string benchmark;
  std::string seen_wrapper;
  std::vector<std::string> unseen_wrappers;
  SplitFractions mixed_fractions{0.5, 0.2};
};

struct ProbeRunConfig {
  std::string attribute;
  ProbeConfig probe;
};

/// Everything a batch run needs. Telemetry comes from `simulate` when present,
/// otherwise from `telemetry_path`.
struct RunConfig {
  DeploymentProfile profile;
  std::optional<SyntheticCorpusSpec> simulate;
  std::optional<std::filesystem::path> telemetry_path;
  SelectorConfig selector;
  TransformConfig transform;
  RegularizerConfig regularizer;
  ProtocolConfig protocol;
  ProbeRunConfig probe;
  std::vector<std::string> edge_ids;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "routescan-out";

  /// Propagates the master seed into the simulator, selector and probe.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

/// Relative telemetry paths are resolved against `base_dir`. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved config. The output directory is left out so that it does
/// not change the hash.
Json run_config_to_json(const RunConfig& c);
std::string config_hash(const RunConfig& c);

}  // namespace routescan

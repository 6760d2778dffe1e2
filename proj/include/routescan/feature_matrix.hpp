#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routescan/representation.hpp"

namespace routescan {

/// Where the rows of a feature matrix came from. Fitting code accepts only
/// source splits; passing target rows is a hard ProtocolError.
enum class SplitTag { unassigned, source_train, source_validation, target_test };

std::string_view to_string(SplitTag tag) noexcept;

/// Row-major batch of representations sharing one profile and key order.
struct FeatureMatrix {
  std::string profile_id;
  std::vector<FeatureKey> keys;
  Eigen::MatrixXd values;  // rows = samples, cols = keys
  std::vector<SampleMeta> meta;
  SplitTag split = SplitTag::unassigned;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }

  /// Rows at `indices`, in that order, re-tagged with `tag`.
  FeatureMatrix subset(std::span<const Eigen::Index> indices, SplitTag tag) const;
  /// 1.0 for positive rows, 0.0 for benign.
  Eigen::VectorXd labels() const;
};

FeatureMatrix featurize(std::span<const TelemetryRecord> records, const DeploymentProfile& profile,
                        SplitTag tag = SplitTag::unassigned);

/// Throws ProtocolError unless `m` is tagged with one of the source splits.
void require_source(const FeatureMatrix& m, std::string_view stage);

}  // namespace routescan

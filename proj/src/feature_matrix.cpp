#include "routescan/feature_matrix.hpp"

namespace routescan {

std::string_view to_string(SplitTag tag) noexcept {
  switch (tag) {
    case SplitTag::unassigned: return "unassigned";
    case SplitTag::source_train: return "source_train";
    case SplitTag::source_validation: return "source_validation";
    case SplitTag::target_test: return "target_test";
  }
  return "unassigned";
}

FeatureMatrix FeatureMatrix::subset(std::span<const Eigen::Index> indices, SplitTag tag) const {
  FeatureMatrix out;
  out.profile_id = profile_id;
  out.keys = keys;
  out.split = tag;
  out.values.resize(static_cast<Eigen::Index>(indices.size()), cols());
  out.meta.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(indices[i]);
    out.meta.push_back(meta[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

Eigen::VectorXd FeatureMatrix::labels() const {
  Eigen::VectorXd y(rows());
  for (Eigen::Index i = 0; i < rows(); ++i)
    y(i) = meta[static_cast<std::size_t>(i)].label == ClassLabel::positive ? 1.0 : 0.0;
  return y;
}

FeatureMatrix featurize(std::span<const TelemetryRecord> records, const DeploymentProfile& profile, SplitTag tag) {
  FeatureMatrix m;
  m.profile_id = profile.profile_id;
  m.keys = canonical_keys(profile);
  m.split = tag;
  m.values.resize(static_cast<Eigen::Index>(records.size()), profile.feature_dim());
  m.meta.reserve(records.size());
  Eigen::VectorXd row(profile.feature_dim());
  for (std::size_t i = 0; i < records.size(); ++i) {
    assemble_values(records[i], profile, row);
    m.values.row(static_cast<Eigen::Index>(i)) = row.transpose();
    m.meta.push_back(meta_of(records[i]));
  }
  return m;
}

void require_source(const FeatureMatrix& m, std::string_view stage) {
  if (m.split != SplitTag::source_train && m.split != SplitTag::source_validation)
    throw ProtocolError(std::string(stage) + " accepts only source data, got rows tagged '" +
                        std::string(to_string(m.split)) + "'");
}

}  // namespace routescan

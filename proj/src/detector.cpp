#include "routescan/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "routescan/errors.hpp"

namespace routescan {

void TransformConfig::validate() const {
  if (!(w_raw >= 0.0 && w_rate >= 0.0 && w_res >= 0.0)) throw ConfigError("block weights must be non-negative");
}

double TransformConfig::block_weight(const FeatureKey& key) const noexcept {
  if (key.kind == FeatureKind::raw) return w_raw;
  return key.stat == StatName::act_rate || key.stat == StatName::eff_rate ? w_rate : w_res;
}

FeatureTransform fit_transform(const FeatureMatrix& train, const SupportSelection& selection,
                               const Eigen::Ref<const Eigen::VectorXd>& selector_weights,
                               const TransformConfig& config) {
  config.validate();
  require_source(train, "transform fitting");
  if (selection.empty()) throw ConfigError("cannot fit a detector transform on an empty support");
  if (train.rows() == 0) throw ConfigError("cannot fit a detector transform on an empty training split");
  if (selector_weights.size() != train.cols()) throw AlignmentError("selector weights do not match feature dimension");

  FeatureTransform t;
  t.profile_id = train.profile_id;
  t.keys = selection.keys;
  t.columns = selection.indices;
  const auto k = static_cast<Eigen::Index>(t.columns.size());
  t.divisors.resize(k);
  t.weights.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index col = t.columns[static_cast<std::size_t>(j)];
    if (train.keys[static_cast<std::size_t>(col)] != t.keys[static_cast<std::size_t>(j)])
      throw AlignmentError("support key " + t.keys[static_cast<std::size_t>(j)].to_string() +
                           " does not match the training key order");
    const double max_abs = train.values.col(col).cwiseAbs().maxCoeff();
    t.divisors(j) = max_abs > 0.0 ? max_abs : 1.0;
    t.weights(j) = selector_weights(col) * config.block_weight(t.keys[static_cast<std::size_t>(j)]);
  }
  return t;
}

namespace {

void check_alignment(const FeatureTransform& t, const std::string& profile_id, const std::vector<FeatureKey>& keys) {
  if (profile_id != t.profile_id)
    throw AlignmentError("features from profile '" + profile_id + "' cannot use a transform fitted on '" +
                         t.profile_id + "'");
  for (std::size_t j = 0; j < t.keys.size(); ++j) {
    const auto col = static_cast<std::size_t>(t.columns[j]);
    if (col >= keys.size() || keys[col] != t.keys[j])
      throw AlignmentError("feature key order differs from the fitted transform at " + t.keys[j].to_string());
  }
}

}  // namespace

Eigen::VectorXd apply_transform(const FeatureTransform& t, const RequestFeatureVector& features) {
  check_alignment(t, features.profile_id, features.keys);
  Eigen::VectorXd out(t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j)
    out(j) = t.weights(j) * features.values(t.columns[static_cast<std::size_t>(j)]) / t.divisors(j);
  return out;
}

Eigen::MatrixXd apply_transform(const FeatureTransform& t, const FeatureMatrix& features) {
  check_alignment(t, features.profile_id, features.keys);
  Eigen::MatrixXd out(features.rows(), t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j)
    out.col(j) = features.values.col(t.columns[static_cast<std::size_t>(j)]) * (t.weights(j) / t.divisors(j));
  return out;
}

DetectorModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                           double inverse_strength) {
  const auto positives = (labels.array() > 0.5).count();
  if (positives == 0 || positives == labels.size()) throw FitError("logistic detector needs both classes");
  const auto fit = fit_logistic_regression(x, labels, inverse_strength,
                                           {kDetectorMaxIterations, kDetectorGradientTolerance});
  return {fit.coef, fit.intercept, inverse_strength, fit.iterations, fit.converged, fit.gradient_norm};
}

double raw_margin(const DetectorModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.coef.size()) throw AlignmentError("detector input has the wrong dimension");
  return model.coef.dot(x) + model.intercept;
}

Eigen::VectorXd raw_margins(const DetectorModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != model.coef.size()) throw AlignmentError("detector input has the wrong dimension");
  return (x * model.coef).array() + model.intercept;
}

void RegularizerConfig::validate() const {
  if (!(c_min > 0.0 && c_min <= c_ref && c_ref <= c_max)) throw ConfigError("regularizer requires 0 < C_min <= C_ref <= C_max");
  if (!(eps_sep > 0.0)) throw ConfigError("eps_sep must be positive");
}

MarginStats source_margin_stats(const Eigen::Ref<const Eigen::VectorXd>& margins,
                                std::span<const Eigen::Index> benign_rows,
                                const std::vector<std::vector<Eigen::Index>>& positive_subsets, double eps_sep) {
  if (benign_rows.empty()) throw ProtocolError("margin statistics need benign validation samples");
  if (positive_subsets.empty()) throw ProtocolError("margin statistics need at least one positive subset");
  auto mean_at = [&](auto rows) {
    double acc = 0.0;
    for (auto r : rows) acc += margins(r);
    return acc / static_cast<double>(rows.size());
  };

  MarginStats s;
  s.benign_mean = mean_at(benign_rows);
  std::set<Eigen::Index> seen;
  for (const auto& subset : positive_subsets) {
    if (subset.empty()) throw ProtocolError("positive subset has no validation samples");
    for (auto r : subset)
      if (!seen.insert(r).second) throw ProtocolError("positive subsets overlap");
    s.subset_means.push_back(mean_at(std::span<const Eigen::Index>(subset)));
  }
  const auto [lo, hi] = std::minmax_element(s.subset_means.begin(), s.subset_means.end());
  s.separation = *lo - s.benign_mean;
  s.disparity = positive_subsets.size() == 1 ? 0.0 : (*hi - *lo) / (std::abs(s.separation) + eps_sep);
  return s;
}

double adaptive_regularization_strength(double separation, double disparity, const RegularizerConfig& c) {
  c.validate();
  const double exponent = sigmoid(c.alpha * (separation - c.beta * disparity - c.gamma));
  return c.c_min * std::pow(c.c_max / c.c_min, exponent);
}

CalibrationModel fit_platt(const Eigen::Ref<const Eigen::VectorXd>& margins, const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (margins.size() != labels.size()) throw FitError("margins and labels differ in length");
  const auto positives = (labels.array() > 0.5).count();
  if (positives == 0 || positives == labels.size()) return {1.0, 0.0, true};
  const Eigen::MatrixXd x = margins;
  const auto fit = fit_logistic_regression(x, labels, kPlattInverseStrength, {kPlattMaxIterations, 1e-7});
  return {fit.coef(0), fit.intercept, false};
}

double calibrated_score(const CalibrationModel& cal, double margin) {
  if (cal.identity_fallback) return margin;
  return sigmoid(cal.slope * margin + cal.offset);
}

Eigen::VectorXd calibrated_scores(const CalibrationModel& cal, const Eigen::Ref<const Eigen::VectorXd>& margins) {
  return margins.unaryExpr([&](double s) { return calibrated_score(cal, s); });
}

DetectorBundle train_audit_model(const FeatureMatrix& train, const FeatureMatrix& validation,
                                 const PositivePartition& partition, const SelectorResult& selector,
                                 const TransformConfig& transform_config, const RegularizerConfig& regularizer,
                                 BundleProvenance provenance) {
  regularizer.validate();
  if (train.split != SplitTag::source_train) throw ProtocolError("detector training rows must be tagged source_train");
  if (validation.split != SplitTag::source_validation)
    throw ProtocolError("detector validation rows must be tagged source_validation");
  if (partition.empty()) throw ProtocolError("positive partition is empty");

  DetectorBundle b;
  b.provenance = std::move(provenance);
  b.reference_strength = regularizer.c_ref;
  b.transform = fit_transform(train, selector.selection, selector.weights, transform_config);

  const Eigen::MatrixXd x_train = apply_transform(b.transform, train);
  const Eigen::MatrixXd x_val = apply_transform(b.transform, validation);
  const Eigen::VectorXd y_train = train.labels();
  const Eigen::VectorXd y_val = validation.labels();

  // Map the partition onto validation rows.
  std::map<std::string, std::size_t> subset_of;
  for (const auto& [name, ids] : partition) {
    b.subset_names.push_back(name);
    for (const auto& id : ids)
      if (!subset_of.emplace(id, b.subset_names.size() - 1).second)
        throw ProtocolError("request '" + id + "' belongs to more than one positive subset");
  }
  std::vector<Eigen::Index> benign_rows;
  std::vector<std::vector<Eigen::Index>> subset_rows(b.subset_names.size());
  for (Eigen::Index i = 0; i < validation.rows(); ++i) {
    const auto& m = validation.meta[static_cast<std::size_t>(i)];
    if (m.label == ClassLabel::benign) {
      benign_rows.push_back(i);
      continue;
    }
    const auto it = subset_of.find(m.request_id);
    if (it == subset_of.end())
      throw ProtocolError("positive validation request '" + m.request_id + "' is not in any positive subset");
    subset_rows[it->second].push_back(i);
  }

  const DetectorModel reference = fit_logistic(x_train, y_train, regularizer.c_ref);
  b.margin_stats = source_margin_stats(raw_margins(reference, x_val), benign_rows, subset_rows, regularizer.eps_sep);
  const double c = adaptive_regularization_strength(b.margin_stats.separation, b.margin_stats.disparity, regularizer);
  b.model = fit_logistic(x_train, y_train, c);
  b.calibration = fit_platt(raw_margins(b.model, x_val), y_val);
  return b;
}

BundleScores score(const DetectorBundle& bundle, const FeatureMatrix& features) {
  BundleScores s;
  s.margins = raw_margins(bundle.model, apply_transform(bundle.transform, features));
  s.calibrated = calibrated_scores(bundle.calibration, s.margins);
  return s;
}

}  // namespace routescan

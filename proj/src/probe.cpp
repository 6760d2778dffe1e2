#include "routescan/probe.hpp"

#include <map>
#include <set>
#include <vector>

#include "routescan/errors.hpp"
#include "routescan/logistic.hpp"
#include "routescan/protocols.hpp"

namespace routescan {

ZScore ZScore::fit(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  ZScore z;
  z.mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - z.mean).array().square().colwise().mean();
  z.scale = var.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 1.0; });
  return z;
}

Eigen::MatrixXd ZScore::apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::VectorXd Probe::predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  const Eigen::VectorXd z = (normalizer.apply(x) * coef).array() + intercept;
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

Probe fit_probe(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                const ProbeConfig& config) {
  const double n = static_cast<double>(y.size());
  const double pos = (y.array() > 0.5).count();
  if (pos == 0 || pos == n) throw FitError("attribute probe needs both classes in training");
  Eigen::VectorXd w = Eigen::VectorXd::Ones(y.size());
  if (config.balanced)
    for (Eigen::Index i = 0; i < y.size(); ++i) w(i) = y(i) > 0.5 ? n / (2.0 * pos) : n / (2.0 * (n - pos));

  Probe p;
  p.normalizer = ZScore::fit(x);
  const auto fit = fit_logistic_regression(p.normalizer.apply(x), y, config.inverse_strength,
                                           {config.max_iterations, 1e-7}, w);
  p.coef = fit.coef;
  p.intercept = fit.intercept;
  return p;
}

namespace {

Eigen::MatrixXd rows_of(const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

Eigen::VectorXd rows_of(const Eigen::Ref<const Eigen::VectorXd>& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

bool has_both(const Eigen::VectorXd& y) {
  const auto pos = (y.array() > 0.5).count();
  return pos > 0 && pos < y.size();
}

}  // namespace

ProbeResult attribute_probe_eval(const Eigen::Ref<const Eigen::MatrixXd>& features,
                                 const Eigen::Ref<const Eigen::VectorXd>& attribute,
                                 std::span<const std::string> scenarios, std::span<const std::string> groups,
                                 const ProbeConfig& config) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (attribute.size() != features.rows() || scenarios.size() != n || groups.size() != n)
    throw ProtocolError("probe inputs differ in length");

  ProbeResult r;
  const auto split = group_isolated_split(groups, {config.train_fraction, 1.0 - config.train_fraction}, config.seed);
  const auto& train = split.train;
  const auto& test = split.validation;

  const Eigen::VectorXd y_train = rows_of(attribute, train);
  const Eigen::VectorXd y_test = rows_of(attribute, test);
  // A single-class training side leaves nothing to fit; predict that class.
  const Eigen::VectorXd p_test = has_both(y_train)
                                     ? fit_probe(rows_of(features, train), y_train, config).predict_proba(rows_of(features, test))
                                     : Eigen::VectorXd::Constant(static_cast<Eigen::Index>(test.size()),
                                                                 y_train.size() > 0 ? y_train(0) : 0.0);
  r.random_split = has_both(y_test) ? evaluate_scores(p_test, y_test, config.threshold, config.high_confidence)
                                    : threshold_metrics(p_test, y_test, config.threshold, config.high_confidence);

  r.positive_rate = y_test.size() > 0 ? y_test.mean() : 0.0;
  r.all_positive_f1 = f1_score(Eigen::VectorXd::Ones(y_test.size()), y_test);
  std::map<std::string, std::pair<double, double>> votes;  // scenario -> (positives, count)
  for (auto i : train) {
    auto& v = votes[scenarios[static_cast<std::size_t>(i)]];
    v.first += attribute(i);
    v.second += 1.0;
  }
  Eigen::VectorXd scenario_pred(y_test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    const auto it = votes.find(scenarios[static_cast<std::size_t>(test[k])]);
    scenario_pred(static_cast<Eigen::Index>(k)) = it != votes.end() && it->second.first * 2.0 > it->second.second;
  }
  r.scenario_only_f1 = f1_score(scenario_pred, y_test);

  const std::set<std::string> names(scenarios.begin(), scenarios.end());
  if (names.size() < 2) return r;

  std::vector<double> pooled_scores, pooled_labels;
  for (const auto& held : names) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < n; ++i) (scenarios[i] == held ? te : tr).push_back(static_cast<Eigen::Index>(i));
    const Eigen::VectorXd y_tr = rows_of(attribute, tr);
    if (!has_both(y_tr)) {
      ++r.loso_folds_skipped;
      continue;
    }
    const auto fold_probe = fit_probe(rows_of(features, tr), y_tr, config);
    const Eigen::VectorXd p = fold_probe.predict_proba(rows_of(features, te));
    for (std::size_t k = 0; k < te.size(); ++k) {
      pooled_scores.push_back(p(static_cast<Eigen::Index>(k)));
      pooled_labels.push_back(attribute(te[k]));
    }
    ++r.loso_folds;
  }
  const Eigen::Map<const Eigen::VectorXd> s(pooled_scores.data(), static_cast<Eigen::Index>(pooled_scores.size()));
  const Eigen::Map<const Eigen::VectorXd> y(pooled_labels.data(), static_cast<Eigen::Index>(pooled_labels.size()));
  if (r.loso_folds > 0 && has_both(Eigen::VectorXd(y))) {
    r.loso = evaluate_scores(s, y, config.threshold, config.high_confidence);
    r.loso_available = true;
  }
  return r;
}

}  // namespace routescan

#include "routescan/selector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "routescan/errors.hpp"
#include "routescan/metrics.hpp"
#include "routescan/random.hpp"

namespace routescan {

namespace {

struct BenchmarkRows {
  std::vector<std::string> names;
  std::vector<std::vector<Eigen::Index>> positive;
  std::vector<std::vector<Eigen::Index>> benign;
};

BenchmarkRows group_rows(const FeatureMatrix& source) {
  std::map<std::string, std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>> by_name;
  for (Eigen::Index i = 0; i < source.rows(); ++i) {
    const auto& m = source.meta[static_cast<std::size_t>(i)];
    auto& slot = by_name[m.domain];
    (m.label == ClassLabel::positive ? slot.first : slot.second).push_back(i);
  }
  if (by_name.empty()) throw ProtocolError("selector needs at least one source benchmark");
  BenchmarkRows out;
  for (auto& [name, rows] : by_name) {
    if (rows.first.empty() || rows.second.empty())
      throw ProtocolError("source benchmark '" + name + "' must contain both positive and benign samples");
    out.names.push_back(name);
    out.positive.push_back(std::move(rows.first));
    out.benign.push_back(std::move(rows.second));
  }
  return out;
}

Eigen::RowVectorXd mean_of(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
  for (auto r : rows) acc += x.row(r);
  return acc / static_cast<double>(rows.size());
}

Eigen::VectorXd population_std(const Eigen::MatrixXd& per_benchmark) {
  if (per_benchmark.rows() <= 1) return Eigen::VectorXd::Zero(per_benchmark.cols());
  const Eigen::RowVectorXd mean = per_benchmark.colwise().mean();
  return ((per_benchmark.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(per_benchmark.rows()))
      .sqrt()
      .transpose();
}

Eigen::VectorXd sign_of(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Eigen::VectorXd pooled_direction(const FeatureMatrix& source, const BenchmarkRows& rows) {
  std::vector<Eigen::Index> pos, neg;
  for (std::size_t b = 0; b < rows.names.size(); ++b) {
    pos.insert(pos.end(), rows.positive[b].begin(), rows.positive[b].end());
    neg.insert(neg.end(), rows.benign[b].begin(), rows.benign[b].end());
  }
  return sign_of((mean_of(source.values, pos) - mean_of(source.values, neg)).transpose());
}

}  // namespace

void SelectorConfig::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("selector eta must lie in [0, 1]");
  if (!(q_low < q_high && q_high <= 1.0)) throw ConfigError("selector requires q_low < q_high <= 1");
  if (bootstrap_rounds < 1) throw ConfigError("selector needs at least one bootstrap round");
  if (!(kappa > 0.0)) throw ConfigError("selector kappa must be positive");
}

DimensionStats compute_dimension_stats(const FeatureMatrix& source, std::span<const std::string> edge_ids) {
  require_source(source, "feature selection");
  const auto rows = group_rows(source);
  const auto num_benchmarks = static_cast<Eigen::Index>(rows.names.size());
  const Eigen::Index dims = source.cols();

  DimensionStats s;
  s.benchmarks = rows.names;

  std::vector<Eigen::Index> pos, neg;
  Eigen::MatrixXd raw_gaps(num_benchmarks, dims);
  Eigen::MatrixXd overall_means(num_benchmarks, dims);
  for (Eigen::Index b = 0; b < num_benchmarks; ++b) {
    const auto& p = rows.positive[static_cast<std::size_t>(b)];
    const auto& n = rows.benign[static_cast<std::size_t>(b)];
    pos.insert(pos.end(), p.begin(), p.end());
    neg.insert(neg.end(), n.begin(), n.end());
    raw_gaps.row(b) = mean_of(source.values, p) - mean_of(source.values, n);
    std::vector<Eigen::Index> all(p);
    all.insert(all.end(), n.begin(), n.end());
    overall_means.row(b) = mean_of(source.values, all);
  }

  s.benign_mean = mean_of(source.values, neg).transpose();
  s.pooled_gap = mean_of(source.values, pos).transpose() - s.benign_mean;
  s.direction = sign_of(s.pooled_gap);
  s.benchmark_gaps = raw_gaps.array().rowwise() * s.direction.transpose().array();
  s.sign_consistency =
      (s.benchmark_gaps.array() > 0.0).cast<double>().colwise().sum().transpose() / static_cast<double>(num_benchmarks);
  s.gap_std = population_std(s.benchmark_gaps);
  s.domain_std = population_std(overall_means);

  if (!edge_ids.empty()) {
    const std::set<std::string> wanted(edge_ids.begin(), edge_ids.end());
    std::vector<Eigen::Index> edge_rows;
    for (Eigen::Index i = 0; i < source.rows(); ++i)
      if (wanted.contains(source.meta[static_cast<std::size_t>(i)].request_id)) edge_rows.push_back(i);
    if (edge_rows.empty()) throw ProtocolError("edge-positive subset matches no source sample");
    s.edge_mean = mean_of(source.values, edge_rows).transpose();
  }
  return s;
}

double invariance_score(double pooled_gap, double sign_consistency, double gap_std, double domain_std) {
  return std::abs(pooled_gap) * (0.25 + 0.75 * sign_consistency) / (1.0 + gap_std + 0.5 * domain_std);
}

Eigen::VectorXd invariance_score(const DimensionStats& s) {
  return (s.pooled_gap.array().abs() * (0.25 + 0.75 * s.sign_consistency.array()) /
          (1.0 + s.gap_std.array() + 0.5 * s.domain_std.array()))
      .matrix();
}

double single_dim_auc_score(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw ProtocolError("single-dimension AUROC needs both classes");
  return 2.0 * std::abs(auroc(positive, negative) - 0.5);
}

Eigen::VectorXd single_dim_auc_scores(const FeatureMatrix& source) {
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < source.rows(); ++i)
    (source.meta[static_cast<std::size_t>(i)].label == ClassLabel::positive ? pos : neg).push_back(i);
  Eigen::VectorXd out(source.cols());
  std::vector<double> pv(pos.size()), nv(neg.size());
  for (Eigen::Index j = 0; j < source.cols(); ++j) {
    for (std::size_t i = 0; i < pos.size(); ++i) pv[i] = source.values(pos[i], j);
    for (std::size_t i = 0; i < neg.size(); ++i) nv[i] = source.values(neg[i], j);
    out(j) = single_dim_auc_score(pv, nv);
  }
  return out;
}

Eigen::VectorXd bootstrap_stability(const FeatureMatrix& source, const SelectorConfig& config) {
  require_source(source, "bootstrap stability");
  const auto rows = group_rows(source);
  const Eigen::VectorXd direction = pooled_direction(source, rows);
  const auto num_benchmarks = static_cast<Eigen::Index>(rows.names.size());
  const Eigen::Index dims = source.cols();

  Eigen::VectorXd stable_rounds = Eigen::VectorXd::Zero(dims);
  std::vector<Eigen::Index> draw;
  auto resample = [&](Rng& rng, const std::vector<Eigen::Index>& from) {
    draw.resize(from.size());
    for (auto& d : draw) d = from[uniform_index(rng, from.size())];
    return mean_of(source.values, draw);
  };

  for (int round = 0; round < config.bootstrap_rounds; ++round) {
    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(round)}));
    Eigen::MatrixXd gaps(num_benchmarks, dims);
    for (Eigen::Index b = 0; b < num_benchmarks; ++b) {
      const Eigen::RowVectorXd p = resample(rng, rows.positive[static_cast<std::size_t>(b)]);
      const Eigen::RowVectorXd n = resample(rng, rows.benign[static_cast<std::size_t>(b)]);
      gaps.row(b) = (p - n).array() * direction.transpose().array();
    }
    const Eigen::ArrayXXd positive = (gaps.array() > 0.0).cast<double>();
    const Eigen::VectorXd positive_count = positive.colwise().sum().transpose();
    const Eigen::VectorXd positive_sum = (gaps.array() * positive).colwise().sum().transpose();
    for (Eigen::Index j = 0; j < dims; ++j) {
      const double frac = positive_count(j) / static_cast<double>(num_benchmarks);
      const bool enough = frac >= config.bootstrap_benchmark_fraction;
      const bool large = positive_count(j) > 0 && positive_sum(j) / positive_count(j) > config.bootstrap_gap_floor;
      if (enough && large) stable_rounds(j) += 1.0;
    }
  }
  return stable_rounds / static_cast<double>(config.bootstrap_rounds);
}

double layer_prior(int layer_id, int num_layers) {
  if (num_layers <= 1) return 1.0;
  return 1.0 - 0.5 * static_cast<double>(layer_id - 1) / static_cast<double>(num_layers - 1);
}

void normalize_scores(const Eigen::Ref<const Eigen::VectorXd>& rho, Eigen::VectorXd& rho_tilde, Eigen::VectorXd& mass) {
  const Eigen::VectorXd clipped = rho.cwiseMax(0.0);
  const double top = clipped.size() > 0 ? clipped.maxCoeff() : 0.0;
  if (top <= 0.0) {
    rho_tilde = Eigen::VectorXd::Zero(rho.size());
    mass = Eigen::VectorXd::Zero(rho.size());
    return;
  }
  rho_tilde = clipped / top;
  mass = clipped / clipped.sum();
}

DimensionScores hybrid_score(const DimensionStats& stats, const Eigen::Ref<const Eigen::VectorXd>& auc,
                             const Eigen::Ref<const Eigen::VectorXd>& stability, std::span<const FeatureKey> keys,
                             int num_layers) {
  const auto dims = static_cast<Eigen::Index>(keys.size());
  if (auc.size() != dims || stability.size() != dims || stats.pooled_gap.size() != dims)
    throw AlignmentError("hybrid score inputs disagree on dimension count");

  DimensionScores s;
  s.invariance = invariance_score(stats);
  s.auc = auc;
  s.stability = stability;
  s.disc = (auc.array().max(0.0) * s.invariance.array().max(0.0)).sqrt().matrix();
  s.cons = ((0.5 + 0.5 * stats.sign_consistency.array()) * (0.5 + 0.5 * stability.array())).matrix();
  s.layer_prior.resize(dims);
  for (Eigen::Index j = 0; j < dims; ++j) s.layer_prior(j) = layer_prior(keys[static_cast<std::size_t>(j)].layer_id, num_layers);
  if (stats.edge_mean)
    s.edge_penalty = (stats.direction.array() * (stats.edge_mean->array() - stats.benign_mean.array())).max(0.0).matrix();
  else
    s.edge_penalty = Eigen::VectorXd::Zero(dims);
  s.prior = (s.layer_prior.array() / (1.0 + 0.25 * s.edge_penalty.array())).matrix();
  s.rho = (s.disc.array() * s.cons.array() * s.prior.array()).matrix();
  normalize_scores(s.rho, s.rho_tilde, s.mass);
  return s;
}

double target_mass(double diffuseness, const SelectorConfig& c) {
  const double squashed = 1.0 / (1.0 + std::exp(-c.q_slope * (diffuseness - c.q_center)));
  return c.q_low + (c.q_high - c.q_low) * squashed;
}

SupportSelection adaptive_support(const Eigen::Ref<const Eigen::VectorXd>& rho, std::span<const FeatureKey> keys,
                                  const SelectorConfig& config) {
  if (static_cast<std::size_t>(rho.size()) != keys.size())
    throw AlignmentError("score vector and key list differ in length");
  Eigen::VectorXd rho_tilde, mass;
  normalize_scores(rho, rho_tilde, mass);

  std::vector<Eigen::Index> positive;
  for (Eigen::Index j = 0; j < rho.size(); ++j)
    if (rho_tilde(j) > 0.0) positive.push_back(j);

  SupportSelection sel;
  sel.positive_count = positive.size();
  if (positive.empty()) return sel;

  double entropy = 0.0;
  for (auto j : positive) entropy -= mass(j) * std::log(mass(j));
  sel.diffuseness = std::exp(entropy) / static_cast<double>(positive.size());
  sel.target_mass = target_mass(sel.diffuseness, config);

  std::stable_sort(positive.begin(), positive.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (rho_tilde(a) != rho_tilde(b)) return rho_tilde(a) > rho_tilde(b);
    return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
  });

  double cumulative = 0.0;
  for (auto j : positive) {
    sel.indices.push_back(j);
    sel.keys.push_back(keys[static_cast<std::size_t>(j)]);
    cumulative += mass(j);
    if (cumulative >= sel.target_mass) break;
  }
  sel.cumulative_mass = cumulative;
  return sel;
}

Eigen::VectorXd soft_weights(const SupportSelection& selection, const Eigen::Ref<const Eigen::VectorXd>& rho_tilde,
                             const SelectorConfig& config) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(rho_tilde.size());
  for (auto j : selection.indices) w(j) = config.eta + (1.0 - config.eta) * std::pow(rho_tilde(j), config.kappa);
  return w;
}

SelectorResult run_selector(const FeatureMatrix& source, int num_layers, const SelectorConfig& config,
                            std::span<const std::string> edge_ids) {
  config.validate();
  require_source(source, "feature selection");
  SelectorResult r;
  r.keys = source.keys;
  r.stats = compute_dimension_stats(source, edge_ids);
  const Eigen::VectorXd auc = single_dim_auc_scores(source);
  const Eigen::VectorXd stability = bootstrap_stability(source, config);
  r.scores = hybrid_score(r.stats, auc, stability, r.keys, num_layers);
  r.selection = adaptive_support(r.scores.rho, r.keys, config);
  r.weights = soft_weights(r.selection, r.scores.rho_tilde, config);
  return r;
}

}  // namespace routescan

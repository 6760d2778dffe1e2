#include "routescan/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "routescan/errors.hpp"
#include "routescan/feature_matrix.hpp"
#include "routescan/random.hpp"

namespace routescan {

void SplitFractions::validate() const {
  if (!(train > 0.0 && train < 1.0) || !(validation > 0.0 && validation < 1.0))
    throw ConfigError("split fractions must lie in (0, 1)");
  if (train + validation > 1.0 + 1e-12) throw ConfigError("train + validation fractions exceed 1");
}

SplitIndices group_isolated_split(std::span<const std::string> group_ids, const SplitFractions& fractions,
                                  std::uint64_t seed) {
  fractions.validate();
  std::vector<std::string> groups(group_ids.begin(), group_ids.end());
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());

  Rng rng(seed);
  for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[uniform_index(rng, i)]);

  const auto g = static_cast<long>(groups.size());
  const bool with_test = fractions.train + fractions.validation < 1.0 - 1e-12;
  const long splits = with_test ? 3 : 2;
  if (g < splits)
    throw ProtocolError("group-isolated split needs at least " + std::to_string(splits) + " groups, got " +
                        std::to_string(g));

  long n_train = std::max(1L, std::lround(fractions.train * static_cast<double>(g)));
  long n_val = with_test ? std::max(1L, std::lround(fractions.validation * static_cast<double>(g))) : g - n_train;
  if (!with_test) {
    n_train = std::min(n_train, g - 1);
    n_val = g - n_train;
  } else {
    while (n_train + n_val > g - 1) (n_train >= n_val ? n_train : n_val) -= 1;
  }

  std::unordered_map<std::string, int> split_of;
  for (long i = 0; i < g; ++i) split_of[groups[static_cast<std::size_t>(i)]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

  SplitIndices out;
  for (std::size_t i = 0; i < group_ids.size(); ++i) {
    const int s = split_of.at(group_ids[i]);
    (s == 0 ? out.train : s == 1 ? out.validation : out.test).push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

SplitIndices group_isolated_split(std::span<const TelemetryRecord> records, const SplitFractions& fractions,
                                  std::uint64_t seed) {
  std::vector<std::string> groups;
  groups.reserve(records.size());
  for (const auto& r : records) {
    if (r.group_id.empty()) throw ProtocolError("record '" + r.request_id + "' has no group id");
    groups.push_back(r.group_id);
  }
  return group_isolated_split(groups, fractions, seed);
}

std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::mixed_positive ? "mixed_positive" : "leave_one_target_out";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "leave_one_target_out") return Protocol::leave_one_target_out;
  if (text == "mixed_positive") return Protocol::mixed_positive;
  throw ConfigError("unknown protocol '" + std::string(text) + "'");
}

namespace {

std::vector<std::string> sorted_domains(std::span<const TelemetryRecord> records) {
  std::set<std::string> d;
  for (const auto& r : records) d.insert(r.domain);
  return {d.begin(), d.end()};
}

}  // namespace

FoldSpec make_lodo_fold(std::span<const TelemetryRecord> records, const std::string& target,
                        const std::vector<std::string>& sources, const SplitFractions& fractions, std::uint64_t seed) {
  if (sources.empty()) throw ProtocolError("fold '" + target + "' has an empty source pool");
  if (std::find(sources.begin(), sources.end(), target) != sources.end())
    throw ProtocolError("target benchmark '" + target + "' is listed in its own source pool");
  const std::set<std::string> source_set(sources.begin(), sources.end());

  FoldSpec fold;
  fold.name = "lodo:" + target;
  fold.protocol = Protocol::leave_one_target_out;
  fold.source_benchmarks.assign(source_set.begin(), source_set.end());
  fold.target = target;
  fold.fractions = fractions;
  fold.seed = seed;

  std::vector<TelemetryRecord> pool;
  for (const auto& r : records) {
    if (r.wrapper) continue;
    if (r.domain == target) fold.target_ids.push_back(r.request_id);
    else if (source_set.contains(r.domain)) pool.push_back(r);
  }
  if (fold.target_ids.empty()) throw ProtocolError("target benchmark '" + target + "' has no records");
  const auto split = group_isolated_split(pool, fractions, seed);
  auto& harmful = fold.partition["harmful"];
  for (auto i : split.train) fold.train_ids.push_back(pool[static_cast<std::size_t>(i)].request_id);
  for (auto i : split.validation) fold.validation_ids.push_back(pool[static_cast<std::size_t>(i)].request_id);
  for (const auto& r : pool)
    if (r.label == ClassLabel::positive) harmful.push_back(r.request_id);
  return fold;
}

std::vector<FoldSpec> make_lodo_folds(std::span<const TelemetryRecord> records, const SplitFractions& fractions,
                                      std::uint64_t seed) {
  const auto domains = sorted_domains(records);
  if (domains.size() < 2) throw ProtocolError("leave-one-target-out needs at least two benchmarks");
  std::vector<FoldSpec> folds;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    std::vector<std::string> sources;
    for (const auto& d : domains)
      if (d != domains[i]) sources.push_back(d);
    folds.push_back(make_lodo_fold(records, domains[i], sources, fractions, derive_seed(seed, {i})));
  }
  return folds;
}

FoldSpec make_mixed_positive_fold(std::span<const TelemetryRecord> records, const std::string& benchmark,
                                  const std::string& seen_wrapper, const std::string& unseen_wrapper,
                                  const SplitFractions& fractions, std::uint64_t seed) {
  if (seen_wrapper == unseen_wrapper) throw ProtocolError("seen and unseen wrappers must differ");
  if (fractions.train + fractions.validation >= 1.0 - 1e-12)
    throw ProtocolError("mixed-positive folds need a held-out test share of groups");

  std::vector<TelemetryRecord> pool;
  bool has_seen = false, has_unseen = false;
  for (const auto& r : records) {
    if (r.domain != benchmark) continue;
    if (r.wrapper == seen_wrapper) has_seen = true;
    if (r.wrapper == unseen_wrapper) has_unseen = true;
    pool.push_back(r);
  }
  if (!has_seen || !has_unseen)
    throw ProtocolError("benchmark '" + benchmark + "' lacks wrapped variants for '" + seen_wrapper + "' or '" +
                        unseen_wrapper + "'");

  FoldSpec fold;
  fold.name = "mixed:" + benchmark + "+" + seen_wrapper + "->" + unseen_wrapper;
  fold.protocol = Protocol::mixed_positive;
  fold.source_benchmarks = {benchmark};
  fold.target = unseen_wrapper;
  fold.fractions = fractions;
  fold.seed = seed;

  // The split depends only on the benchmark's groups, so every unseen wrapper
  // evaluated against the same source shares one benign test set.
  std::vector<std::string> groups;
  for (const auto& r : pool) groups.push_back(r.group_id);
  const auto split = group_isolated_split(groups, fractions, seed);

  auto& direct = fold.partition["direct"];
  auto& seen = fold.partition[seen_wrapper];
  auto source_member = [&](const TelemetryRecord& r) {
    return r.label == ClassLabel::benign || (r.label == ClassLabel::positive && (!r.wrapper || *r.wrapper == seen_wrapper));
  };
  auto add_source = [&](const std::vector<Eigen::Index>& rows, std::vector<std::string>& ids) {
    for (auto i : rows) {
      const auto& r = pool[static_cast<std::size_t>(i)];
      if (!source_member(r)) continue;
      ids.push_back(r.request_id);
      if (r.label == ClassLabel::positive) (r.wrapper ? seen : direct).push_back(r.request_id);
    }
  };
  add_source(split.train, fold.train_ids);
  add_source(split.validation, fold.validation_ids);
  for (auto i : split.test) {
    const auto& r = pool[static_cast<std::size_t>(i)];
    if (r.label == ClassLabel::benign || r.wrapper == unseen_wrapper) fold.target_ids.push_back(r.request_id);
  }
  return fold;
}

void check_fold_isolation(std::span<const TelemetryRecord> records, const FoldSpec& fold) {
  std::unordered_map<std::string, const TelemetryRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.request_id, &r);
  auto lookup = [&](const std::string& id) -> const TelemetryRecord& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ProtocolError("fold '" + fold.name + "' references unknown request '" + id + "'");
    return *it->second;
  };
  std::set<std::string> source_ids, source_groups;
  for (const auto* ids : {&fold.train_ids, &fold.validation_ids})
    for (const auto& id : *ids) {
      source_ids.insert(id);
      source_groups.insert(lookup(id).group_id);
    }
  for (const auto& id : fold.target_ids) {
    const auto& r = lookup(id);
    if (source_ids.contains(id)) throw ProtocolError("target request '" + id + "' also appears in the source pool");
    if (source_groups.contains(r.group_id))
      throw ProtocolError("prompt group '" + r.group_id + "' appears in both source and target");
    if (fold.protocol == Protocol::leave_one_target_out &&
        std::find(fold.source_benchmarks.begin(), fold.source_benchmarks.end(), r.domain) != fold.source_benchmarks.end())
      throw ProtocolError("target request '" + id + "' comes from a source benchmark");
  }
}

namespace {

FeatureMatrix featurize_ids(std::span<const TelemetryRecord> records,
                            const std::unordered_map<std::string, std::size_t>& index,
                            const std::vector<std::string>& ids, const DeploymentProfile& profile, SplitTag tag) {
  std::vector<TelemetryRecord> chosen;
  chosen.reserve(ids.size());
  for (const auto& id : ids) chosen.push_back(records[index.at(id)]);
  return featurize(chosen, profile, tag);
}

}  // namespace

MetricReport bundle_metrics(const DetectorBundle& bundle, const BundleScores& scored,
                            const Eigen::Ref<const Eigen::VectorXd>& labels) {
  auto m = threshold_metrics(scored.calibrated, labels);
  // Rank on margins: identical order to the calibrated score when the slope
  // is positive, without ties from sigmoid saturation.
  const bool monotone = bundle.calibration.identity_fallback || bundle.calibration.slope > 0.0;
  const auto rank = ranking_metrics(monotone ? scored.margins : scored.calibrated, labels);
  m.auroc = rank.auroc;
  m.average_precision = rank.average_precision;
  return m;
}

FoldResult run_fold(std::span<const TelemetryRecord> records, const DeploymentProfile& profile, const FoldSpec& fold,
                    const PipelineSettings& settings) {
  check_fold_isolation(records, fold);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].request_id, i);

  FoldResult out;
  out.spec = fold;

  const auto train = featurize_ids(records, index, fold.train_ids, profile, SplitTag::source_train);
  const auto validation = featurize_ids(records, index, fold.validation_ids, profile, SplitTag::source_validation);

  auto selector_config = settings.selector;
  selector_config.seed = derive_seed(settings.selector.seed, {fold.seed});
  out.selector = run_selector(train, profile.num_layers(), selector_config, settings.edge_ids);
  out.bundle = train_audit_model(train, validation, fold.partition, out.selector, settings.transform,
                                 settings.regularizer, {settings.config_hash, fold.seed});

  const auto target = featurize_ids(records, index, fold.target_ids, profile, SplitTag::target_test);
  const auto scored = score(out.bundle, target);
  out.target_ids = fold.target_ids;
  out.target_margins = scored.margins;
  out.target_scores = scored.calibrated;
  out.target_labels = target.labels();
  out.metrics = bundle_metrics(out.bundle, scored, out.target_labels);
  return out;
}

}  // namespace routescan

#include "routescan/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <Eigen/Core>

#include "routescan/errors.hpp"
#include "routescan/random.hpp"
#include "routescan/routing.hpp"

namespace routescan {

namespace {

// Sub-seed namespaces.
constexpr std::uint64_t kBiasStream = 1;
constexpr std::uint64_t kWrapperStream = 2;
constexpr std::uint64_t kDomainStream = 3;
constexpr std::uint64_t kGroupStream = 4;
constexpr std::uint64_t kCellStream = 5;

std::vector<int> draw_subset(Rng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::vector<int>> draw_layer_subsets(const DeploymentProfile& profile, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<int>> out;
  for (int l = 1; l <= profile.num_layers(); ++l)
    out.push_back(draw_subset(rng, profile.experts(l), std::min(k, profile.experts(l))));
  return out;
}

std::vector<Eigen::VectorXd> draw_offsets(const DeploymentProfile& profile, double std_dev, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  for (int l = 1; l <= profile.num_layers(); ++l) {
    Eigen::VectorXd v(profile.experts(l));
    for (Eigen::Index e = 0; e < v.size(); ++e) v(e) = std_dev * standard_normal(rng);
    out.push_back(std::move(v));
  }
  return out;
}

std::string group_name(const std::string& domain, int g) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "g%05d", g);
  return domain + "/" + buf;
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  profile.validate();
  if (domains.empty()) throw ConfigError("synthetic corpus needs at least one domain");
  if (requests_per_cell < 1) throw ConfigError("requests_per_cell must be at least 1");
  if (min_tokens < 1 || max_tokens < min_tokens) throw ConfigError("token range must satisfy 1 <= min <= max");
  if (!(class_bias_strength >= 0.0)) throw ConfigError("class_bias_strength must be non-negative");
  if (bias_experts_per_layer < 0 || wrapper_experts_per_layer < 0)
    throw ConfigError("expert subset sizes must be non-negative");
  if (!(token_noise_std >= 0.0 && group_noise_std >= 0.0 && domain_shift_std >= 0.0))
    throw ConfigError("noise scales must be non-negative");
}

std::vector<std::vector<int>> bias_expert_subsets(const SyntheticCorpusSpec& spec) {
  return draw_layer_subsets(spec.profile, spec.bias_experts_per_layer, derive_seed(spec.seed, {kBiasStream}));
}

std::vector<TelemetryRecord> generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  const auto& profile = spec.profile;
  const int num_layers = profile.num_layers();

  const auto bias_subsets = bias_expert_subsets(spec);
  std::vector<std::vector<std::vector<int>>> wrapper_subsets;
  for (std::size_t w = 0; w < spec.wrappers.size(); ++w)
    wrapper_subsets.push_back(
        draw_layer_subsets(profile, spec.wrapper_experts_per_layer, derive_seed(spec.seed, {kWrapperStream, w})));

  std::vector<TelemetryRecord> records;
  const std::size_t cells_per_domain = 2 + spec.wrappers.size();
  records.reserve(spec.domains.size() * cells_per_domain * static_cast<std::size_t>(spec.requests_per_cell));

  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    const auto& domain = spec.domains[d];
    const auto domain_offset = draw_offsets(profile, spec.domain_shift_std, derive_seed(spec.seed, {kDomainStream, d}));

    std::vector<std::vector<Eigen::VectorXd>> group_latent;
    for (int g = 0; g < spec.requests_per_cell; ++g)
      group_latent.push_back(draw_offsets(profile, spec.group_noise_std,
                                          derive_seed(spec.seed, {kGroupStream, d, static_cast<std::uint64_t>(g)})));

    std::map<std::string, bool> attributes;
    for (const auto& [name, holds_in] : spec.domain_attributes)
      attributes[name] = std::find(holds_in.begin(), holds_in.end(), domain) != holds_in.end();

    for (std::size_t cell = 0; cell < cells_per_domain; ++cell) {
      const bool positive = cell >= 1;
      const std::ptrdiff_t wrapper = static_cast<std::ptrdiff_t>(cell) - 2;  // -1: none
      const std::string variant = cell == 0 ? "benign" : cell == 1 ? "positive" : spec.wrappers[cell - 2];

      for (int g = 0; g < spec.requests_per_cell; ++g) {
        Rng rng(derive_seed(spec.seed, {kCellStream, d, cell, static_cast<std::uint64_t>(g)}));
        const int tokens = spec.min_tokens + static_cast<int>(uniform_index(
                                                 rng, static_cast<std::uint64_t>(spec.max_tokens - spec.min_tokens + 1)));

        TelemetryRecord rec;
        rec.group_id = group_name(domain, g);
        rec.request_id = rec.group_id + "/" + variant;
        rec.profile_id = profile.profile_id;
        rec.label = positive ? ClassLabel::positive : ClassLabel::benign;
        rec.domain = domain;
        if (wrapper >= 0) rec.wrapper = spec.wrappers[static_cast<std::size_t>(wrapper)];
        rec.attributes = attributes;

        for (int l = 0; l < num_layers; ++l) {
          const int experts = profile.experts_per_layer[static_cast<std::size_t>(l)];
          Eigen::RowVectorXd base = (group_latent[static_cast<std::size_t>(g)][static_cast<std::size_t>(l)] +
                                     domain_offset[static_cast<std::size_t>(l)])
                                        .transpose();
          if (positive)
            for (int e : bias_subsets[static_cast<std::size_t>(l)]) base(e) += spec.class_bias_strength;
          if (wrapper >= 0)
            for (int e : wrapper_subsets[static_cast<std::size_t>(wrapper)][static_cast<std::size_t>(l)])
              base(e) += spec.wrapper_shift_strength;

          Eigen::MatrixXd logits(tokens, experts);
          for (int t = 0; t < tokens; ++t)
            for (int e = 0; e < experts; ++e) logits(t, e) = base(e) + spec.token_noise_std * standard_normal(rng);

          const auto decision = route_topk(logits, profile.top_k_per_layer[static_cast<std::size_t>(l)]);
          const auto loads = accumulate_loads(decision, experts);
          const auto threads = thread_proxy(loads, profile, rng());
          auto& layer = rec.loads[l + 1];
          for (int e = 0; e < experts; ++e) layer[e] = threads(e);
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

}  // namespace routescan

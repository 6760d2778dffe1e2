// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "routescan/corpus.hpp"
#include "routescan/metrics.hpp"
#include "routescan/pipeline.hpp"
#include "routescan/random.hpp"
#include "routescan/representation.hpp"

using namespace routescan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("routescan-acceptance-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DeploymentProfile sim_profile(int layers, int experts, int k) {
  auto p = uniform_profile("sim-" + std::to_string(layers) + "x" + std::to_string(experts), layers, experts, k);
  p.thread_scale = 256;
  p.thread_noise_std = 5;
  return p;
}

RunConfig lodo_config(double bias, std::uint64_t seed, const fs::path& out) {
  RunConfig c;
  c.profile = sim_profile(4, 16, 2);
  SyntheticCorpusSpec s;
  s.profile = c.profile;
  s.domains = {"alpha", "beta", "gamma", "delta"};
  s.requests_per_cell = 200;
  s.class_bias_strength = bias;
  c.simulate = s;
  c.output_dir = out;
  c.apply_seed(seed);
  return c;
}

double mean_of(const std::vector<FoldReport>& reports, double MetricReport::*field) {
  double s = 0;
  for (const auto& r : reports) s += r.metrics.*field;
  return s / static_cast<double>(reports.size());
}

Outcome representation_invariants() {
  Rng rng(101);
  const int sizes[] = {4, 8, 64};
  long violations = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const int e = sizes[rep % 3];
    Eigen::VectorXd loads(e);
    const double sparsity = uniform01(rng);
    for (int j = 0; j < e; ++j) loads(j) = uniform01(rng) < sparsity ? 0.0 : std::floor(uniform01(rng) * 500.0);
    if (rep % 97 == 0) loads.setZero();
    const Eigen::VectorXd p = normalize_loads(loads);
    const double sum = p.sum();
    const bool zero = loads.sum() == 0.0;
    if (zero ? sum != 0.0 : std::abs(sum - 1.0) > 1e-12) ++violations;
    const auto s = layer_structural_stats(p, e, 1e-9);
    if (s.eff_rate > s.act_rate || s.cov_gap < 0.0 || s.cov_conc < 0.0 || s.cov_conc >= 1.0) ++violations;

    const double scale = std::exp(8.0 * uniform01(rng) - 4.0);
    const Eigen::VectorXd q = normalize_loads(Eigen::VectorXd(loads * scale));
    const auto t = layer_structural_stats(q, e, 1e-9);
    if ((q - p).lpNorm<Eigen::Infinity>() > 1e-12 || std::abs(t.act_rate - s.act_rate) > 1e-12 ||
        std::abs(t.eff_rate - s.eff_rate) > 1e-12 || std::abs(t.cov_gap - s.cov_gap) > 1e-12 ||
        std::abs(t.cov_conc - s.cov_conc) > 1e-12)
      ++violations;
  }
  return {violations == 0, "10000 vectors, " + std::to_string(violations) + " violations"};
}

Outcome auroc_oracle() {
  Rng rng(202);
  int mismatches = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 199));
    const int levels = 1 + static_cast<int>(uniform_index(rng, 30));
    std::vector<double> pos, neg;
    for (int i = 0; i < n; ++i) {
      const double v = static_cast<double>(uniform_index(rng, static_cast<std::uint64_t>(levels))) / levels;
      (i == 0 ? pos : i == 1 ? neg : (uniform01(rng) < 0.4 ? pos : neg)).push_back(v);
    }
    Eigen::VectorXd scores(n), labels(n);
    int i = 0;
    for (double v : pos) scores(i) = v, labels(i++) = 1;
    for (double v : neg) scores(i) = v, labels(i++) = 0;
    // Exact equality with the integer pair count over 2|P||N|.
    const double denom = 2.0 * static_cast<double>(pos.size() * neg.size());
    if (ranking_metrics(scores, labels).auroc != static_cast<double>(oracle::twice_pair_wins(pos, neg)) / denom)
      ++mismatches;
  }
  return {mismatches == 0, "500 score sets, " + std::to_string(mismatches) + " mismatches"};
}

Outcome selector_plugins() {
  SelectorConfig cfg;
  std::vector<std::string> bad;
  auto near = [&](double got, double want, const std::string& what) {
    if (!(std::abs(got - want) <= 1e-4)) bad.push_back(what + fmt("=%.6f", got));
  };
  auto keys = [](int n) {
    std::vector<FeatureKey> k;
    for (int j = 0; j < n; ++j) k.push_back(FeatureKey::raw(1, j));
    return k;
  };
  const auto a = adaptive_support(Eigen::Vector4d(4, 2, 1, 1), keys(4), cfg);
  near(a.diffuseness, 0.84090, "delta[4,2,1,1]");
  near(a.target_mass, 0.99758, "q[4,2,1,1]");
  if (a.indices.size() != 4) bad.push_back("support[4,2,1,1]");
  Eigen::VectorXd r(5);
  r << 100, 1, 1, 1, 1;
  const auto b = adaptive_support(r, keys(5), cfg);
  near(b.diffuseness, 0.24831, "delta[100,1,1,1,1]");
  near(b.target_mass, 0.94589, "q[100,1,1,1,1]");
  if (b.indices != std::vector<Eigen::Index>{0}) bad.push_back("support[100,1,1,1,1]");
  const double lambda[] = {1.0, 0.875, 0.75, 0.625, 0.5};
  for (int l = 1; l <= 5; ++l) near(layer_prior(l, 5), lambda[l - 1], "lambda" + std::to_string(l));
  near(invariance_score(1, 1, 0, 0), 1.0, "i(1,1)");
  near(invariance_score(0, 1, 0, 0), 0.0, "i(0)");
  near(invariance_score(1, 0, 0, 0), 0.25, "i(1,0)");

  Rng rng(303);
  int minimality = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 60));
    Eigen::VectorXd rho(n);
    for (int j = 0; j < n; ++j) {
      const double u = uniform01(rng);
      rho(j) = u < 0.15 ? 0.0 : (u < 0.25 ? -uniform01(rng) : std::pow(uniform01(rng), 3.0));
    }
    const auto sel = adaptive_support(rho, keys(n), cfg);
    const double total = rho.cwiseMax(0.0).sum();
    if (total == 0.0) {
      minimality += !sel.empty();
      continue;
    }
    // Any support reaching q needs at least as many dims as the top ones do.
    std::vector<double> sorted;
    for (int j = 0; j < n; ++j) sorted.push_back(std::max(rho(j), 0.0) / total);
    std::sort(sorted.rbegin(), sorted.rend());
    std::size_t need = 0;
    double cum = 0.0;
    while (need < sorted.size() && cum < sel.target_mass) cum += sorted[need++];
    double chosen = 0.0;
    for (auto j : sel.indices) chosen += rho(j) / total;
    if (sel.indices.size() != need || chosen < sel.target_mass - 1e-12) ++minimality;
  }
  if (minimality) bad.push_back(std::to_string(minimality) + " non-minimal supports");
  std::string detail = bad.empty() ? "plug-in values within 1e-4, 1000 supports minimal" : "";
  for (const auto& s : bad) detail += s + " ";
  return {bad.empty(), detail};
}

Outcome adaptive_c() {
  std::vector<std::string> bad;
  auto near = [&](double got, double want, const char* what) {
    if (!(std::abs(got - want) <= 1e-5)) bad.push_back(std::string(what) + fmt("=%.7f", got));
  };
  near(adaptive_regularization_strength(0.65, 0), 0.094868, "C(0.65,0)");
  near(adaptive_regularization_strength(2.0, 0), 0.30, "C(2,0)");
  near(adaptive_regularization_strength(0.65, 5), 0.03, "C(0.65,5)");
  int grid = 0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      const double d = -1.0 + 3.0 * i / 49.0, r = 3.0 * j / 49.0;
      const double c = adaptive_regularization_strength(d, r);
      if (c < 0.03 || c > 0.30) ++grid;
      if (i > 0 && c < adaptive_regularization_strength(-1.0 + 3.0 * (i - 1) / 49.0, r)) ++grid;
      if (j > 0 && c > adaptive_regularization_strength(d, 3.0 * (j - 1) / 49.0)) ++grid;
    }
  if (grid) bad.push_back(std::to_string(grid) + " grid violations");
  std::string detail = bad.empty() ? "formula values within 1e-5, 50x50 grid monotone and bounded" : "";
  for (const auto& s : bad) detail += s + " ";
  return {bad.empty(), detail};
}

Outcome logistic_platt_oracle() {
  struct Tiny {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    double c;
  };
  const std::vector<Tiny> sets = {
      {{{-2}, {-1.5}, {-0.5}, {0.2}, {0.4}, {1.0}, {1.7}, {2.5}}, {0, 0, 1, 0, 1, 0, 1, 1}, 0.1},
      {{{0.1}, {0.3}, {0.5}, {0.9}, {1.2}, {1.4}}, {0, 0, 1, 0, 1, 1}, 0.3},
      {{{1, 0}, {0, 1}, {1, 1}, {0, 0}, {2, 1}, {1, 2}, {-1, 0}, {0, -1}, {0.5, 0.5}, {1.5, -0.5}},
       {1, 0, 1, 0, 1, 0, 0, 0, 1, 1},
       0.03},
      {{{-1, 2}, {-0.5, 1}, {0.5, -1}, {1, -2}, {0, 0}, {0.3, 0.2}, {-0.2, 0.4}, {0.8, -0.3},
        {1.2, 0.1}, {-1.1, -0.2}, {0.4, 1.1}, {-0.6, -0.9}},
       {0, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1, 0},
       0.3},
  };
  int bad = 0;
  double worst = 0.0;
  auto compare = [&](const std::vector<double>& got, const std::vector<double>& best) {
    for (std::size_t j = 0; j < got.size(); ++j) {
      worst = std::max(worst, std::abs(got[j] - best[j]));
      if (std::abs(got[j] - best[j]) > 1e-3) ++bad;
    }
  };
  for (const auto& t : sets) {
    const auto n = static_cast<Eigen::Index>(t.x.size());
    const auto p = static_cast<Eigen::Index>(t.x[0].size());
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = t.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      y(i) = t.y[static_cast<std::size_t>(i)];
    }
    const auto m = fit_logistic(x, y, t.c);
    Eigen::VectorXd grad;
    const double loss = logistic_objective(x, y, Eigen::VectorXd(), t.c, m.coef, m.intercept, &grad);
    if (grad.lpNorm<Eigen::Infinity>() > 1e-6 * (1 + std::abs(loss))) ++bad;
    const auto best = oracle::grid_minimize(
        [&](const std::vector<double>& q) { return oracle::penalized_nll(t.x, t.y, t.c, q); },
        static_cast<std::size_t>(p + 1), 4.0, p == 1 ? 0.05 : 0.1);
    std::vector<double> got(m.coef.data(), m.coef.data() + p);
    got.push_back(m.intercept);
    compare(got, best);
  }
  // Platt on a fifth set of margins, with overlapping classes so the optimum is finite.
  const std::vector<std::vector<double>> s = {{-1.3}, {-0.2}, {0.1}, {0.4}, {0.9}, {1.5}, {-0.6}, {2.1}, {-1.8}};
  const std::vector<double> ys = {0, 1, 0, 1, 1, 1, 0, 0, 0};
  Eigen::VectorXd sv(9), yv(9);
  for (int i = 0; i < 9; ++i) sv(i) = s[static_cast<std::size_t>(i)][0], yv(i) = ys[static_cast<std::size_t>(i)];
  const auto cal = fit_platt(sv, yv);
  const auto best = oracle::grid_minimize(
      [&](const std::vector<double>& q) { return oracle::penalized_nll(s, ys, kPlattInverseStrength, q); }, 2, 8.0,
      0.1);
  compare({cal.slope, cal.offset}, best);
  Eigen::VectorXd grad;
  const double loss = logistic_objective(sv, yv, Eigen::VectorXd(), kPlattInverseStrength,
                                         Eigen::VectorXd::Constant(1, cal.slope), cal.offset, &grad);
  if (grad.lpNorm<Eigen::Infinity>() > 1e-6 * (1 + std::abs(loss))) ++bad;
  return {bad == 0, fmt("5 datasets, max parameter deviation %.2e", worst)};
}

Outcome planted_signal() {
  const auto out = run_pipeline(lodo_config(2.0, 11, scratch("planted")));
  const double auroc = mean_of(out.reports, &MetricReport::auroc);
  const double f1 = mean_of(out.reports, &MetricReport::f1_at_05);
  return {out.reports.size() == 4 && auroc >= 0.95 && f1 >= 0.85,
          fmt("%.0f folds, mean AUROC %.4f, mean F1@0.5 %.4f", static_cast<double>(out.reports.size()), auroc, f1)};
}

Outcome null_signal() {
  double total = 0;
  const auto dir = scratch("null");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) total += mean_of(run_pipeline(lodo_config(0.0, seed, dir)).reports, &MetricReport::auroc);
  const double m = total / 20.0;
  return {m >= 0.45 && m <= 0.55, fmt("mean AUROC over 20 seeds %.4f", m)};
}

Outcome mixed_positive() {
  auto c = lodo_config(2.0, 11, scratch("mixed"));
  c.simulate->wrappers = {"roleplay", "encoding"};
  c.protocol.kind = Protocol::mixed_positive;
  c.protocol.benchmark = "alpha";
  c.protocol.seen_wrapper = "roleplay";
  c.protocol.unseen_wrappers = {"encoding"};
  const auto out = run_pipeline(c);
  const auto& r = out.reports.at(0);
  return {out.reports.size() == 1 && r.metrics.auroc >= 0.90 && r.disparity > 0.0,
          fmt("target AUROC %.4f, r_sub %.4f", r.metrics.auroc, r.disparity)};
}

Outcome probe_confound() {
  // Attribute fixed per scenario; no class or attribute signal in the routing.
  RunConfig c;
  c.profile = sim_profile(4, 16, 2);
  SyntheticCorpusSpec s;
  s.profile = c.profile;
  // Many scenarios with strong templates: the probe can memorize each scenario,
  // and the held-out scenario bias of LOSO stays small.
  for (int i = 0; i < 48; ++i) s.domains.push_back(fmt("s%02.0f", i));
  s.requests_per_cell = 40;
  s.class_bias_strength = 0.0;
  s.domain_shift_std = 2.0;
  for (std::size_t i = 0; i < s.domains.size(); i += 2) s.domain_attributes["acute"].push_back(s.domains[i]);
  c.simulate = s;
  c.probe.attribute = "acute";
  // LOSO AUROC of one corpus swings by about 0.08 with the seed, so both
  // quantities are averaged over ten corpora.
  double gap = 0, loso = 0, worst_gap = 0;
  const int seeds = 10;
  for (int seed = 1; seed <= seeds; ++seed) {
    c.apply_seed(static_cast<std::uint64_t>(seed));
    const auto records = load_corpus(c);
    const auto j = probe_report(c, records, config_hash(c));
    const double g = j.at("scenario_only_f1").get<double>() - j.at("random_split").at("f1_at_05").get<double>();
    gap += g;
    worst_gap = std::max(worst_gap, std::abs(g));
    loso += j.at("loso").at("auroc").get<double>();
  }
  gap /= seeds;
  loso /= seeds;
  return {std::abs(gap) <= 0.05 && loso >= 0.40 && loso <= 0.60,
          fmt("10 seeds: scenario-only F1 minus probe F1 mean %.4f (worst %.4f), LOSO AUROC mean %.4f", gap,
              worst_gap, loso)};
}

Outcome determinism() {
  auto c = lodo_config(2.0, 5, scratch("det-a"));
  c.simulate->requests_per_cell = 80;
  c.simulate->wrappers = {"roleplay"};
  const auto a = run_pipeline(c);
  c.output_dir = scratch("det-b");
  const auto b = run_pipeline(c);
  int differ = a.files.size() == b.files.size() ? 0 : 1;
  for (std::size_t i = 0; !differ && i < a.files.size(); ++i)
    differ += a.files[i].filename() != b.files[i].filename() || read_file(a.files[i]) != read_file(b.files[i]);
  return {differ == 0, std::to_string(a.files.size()) + " files compared, " + std::to_string(differ) + " differ"};
}

Outcome leakage_guard() {
  auto c = lodo_config(2.0, 9, scratch("leak"));
  c.simulate->requests_per_cell = 80;
  const auto records = load_corpus(c);
  const auto settings = pipeline_settings(c);
  const auto folds = plan_folds(c, records);
  int changed = 0, mutated = 0;
  for (const auto& fold : folds) {
    const auto before = bundle_to_json(run_fold(records, c.profile, fold, settings).bundle).dump();
    auto altered = records;
    const std::set<std::string> target(fold.target_ids.begin(), fold.target_ids.end());
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(mutated)}));
    for (auto& r : altered) {
      if (!target.count(r.request_id)) continue;
      ++mutated;
      r.label = r.label == ClassLabel::positive ? ClassLabel::benign : ClassLabel::positive;
      for (auto& [layer, experts] : r.loads)
        for (auto& [e, v] : experts) v = std::floor(uniform01(rng) * 1000.0);
    }
    const auto after = bundle_to_json(run_fold(altered, c.profile, fold, settings).bundle).dump();
    changed += before != after;
  }
  return {changed == 0 && mutated > 0, std::to_string(folds.size()) + " folds, " + std::to_string(mutated) +
                                           " target records mutated, " + std::to_string(changed) + " bundles changed"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"representation invariants", 10, representation_invariants},
      {"AUROC oracle", 10, auroc_oracle},
      {"selector plug-in suite", 1e9, selector_plugins},
      {"adaptive-C suite", 1e9, adaptive_c},
      {"logistic/Platt oracle", 30, logistic_platt_oracle},
      {"planted signal", 120, planted_signal},
      {"null signal", 300, null_signal},
      {"mixed-positive transfer", 1e9, mixed_positive},
      {"probing confound", 1e9, probe_confound},
      {"determinism", 1e9, determinism},
      {"leakage guard", 1e9, leakage_guard},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    failures += !o.pass;
    std::printf("%s  %-26s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

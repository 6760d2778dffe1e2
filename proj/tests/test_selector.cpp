#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "routescan/random.hpp"
#include "routescan/selector.hpp"

using namespace routescan;

namespace {

// Builds a source matrix straight from values; profile keys are synthetic.
FeatureMatrix source_matrix(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                            const std::vector<std::string>& domains) {
  FeatureMatrix m;
  m.profile_id = "p";
  for (Eigen::Index j = 0; j < x.cols(); ++j) m.keys.push_back(FeatureKey::raw(1, static_cast<int>(j)));
  m.values = x;
  m.split = SplitTag::source_train;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SampleMeta meta;
    meta.request_id = "r" + std::to_string(i);
    meta.group_id = "g" + std::to_string(i);
    meta.label = labels[i] ? ClassLabel::positive : ClassLabel::benign;
    meta.domain = domains[i];
    m.meta.push_back(meta);
  }
  return m;
}

std::vector<FeatureKey> raw_keys(int n, int layer = 1) {
  std::vector<FeatureKey> k;
  for (int j = 0; j < n; ++j) k.push_back(FeatureKey::raw(layer, j));
  return k;
}

double q_of(double delta) { return 0.94 + 0.058 / (1.0 + std::exp(-12.0 * (delta - 0.43))); }

double delta_of(const std::vector<double>& rho) {
  double sum = 0.0;
  int n = 0;
  for (double r : rho)
    if (r > 0) sum += r, ++n;
  double h = 0.0;
  for (double r : rho)
    if (r > 0) h -= (r / sum) * std::log(r / sum);
  return std::exp(h) / n;
}

}  // namespace

TEST_CASE("dimension statistics") {
  SUBCASE("single benchmark, means 1 vs 0") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 1, 0, 0;
    const auto s = compute_dimension_stats(source_matrix(x, {1, 1, 0, 0}, {"a", "a", "a", "a"}));
    CHECK(s.pooled_gap(0) == 1.0);
    CHECK(s.direction(0) == 1.0);
    CHECK(s.sign_consistency(0) == 1.0);
    CHECK(s.gap_std(0) == 0.0);
  }
  SUBCASE("opposite gaps cancel to s = 0") {
    Eigen::MatrixXd x(8, 1);
    x << 1, 1, 0, 0, 0, 0, 1, 1;
    const auto s =
        compute_dimension_stats(source_matrix(x, {1, 1, 0, 0, 1, 1, 0, 0}, {"a", "a", "a", "a", "b", "b", "b", "b"}));
    CHECK(s.pooled_gap(0) == 0.0);
    CHECK(s.direction(0) == 0.0);
    CHECK(s.benchmark_gaps.col(0).isZero());
    CHECK(s.sign_consistency(0) == 0.0);
  }
  SUBCASE("benchmark order does not matter") {
    Rng rng(1);
    Eigen::MatrixXd x(12, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = standard_normal(rng);
    std::vector<int> y{1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    std::vector<std::string> d{"a", "a", "a", "a", "b", "b", "b", "b", "c", "c", "c", "c"};
    const auto s1 = compute_dimension_stats(source_matrix(x, y, d));
    std::vector<int> order{8, 9, 10, 11, 4, 5, 6, 7, 0, 1, 2, 3};
    Eigen::MatrixXd xp(12, 3);
    std::vector<int> yp;
    std::vector<std::string> dp;
    for (int i = 0; i < 12; ++i) {
      xp.row(i) = x.row(order[i]);
      yp.push_back(y[order[i]]);
      dp.push_back(d[order[i]]);
    }
    const auto s2 = compute_dimension_stats(source_matrix(xp, yp, dp));
    CHECK(s1.pooled_gap.isApprox(s2.pooled_gap, 1e-14));
    CHECK(s1.sign_consistency == s2.sign_consistency);
    CHECK(s1.gap_std.isApprox(s2.gap_std, 1e-14));
    CHECK(s1.domain_std.isApprox(s2.domain_std, 1e-14));
  }
  SUBCASE("missing class is a protocol error") {
    Eigen::MatrixXd x(2, 1);
    x << 1, 2;
    CHECK_THROWS_AS(compute_dimension_stats(source_matrix(x, {1, 1}, {"a", "a"})), ProtocolError);
  }
}

TEST_CASE("invariance score") {
  CHECK(invariance_score(1, 1, 0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(invariance_score(0, 1, 0, 0) == 0.0);
  CHECK(invariance_score(1, 0, 0, 0) == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(invariance_score(-2, 0.5, 1, 2) == doctest::Approx(2 * 0.625 / 3).epsilon(1e-12));
}

TEST_CASE("single-dimension AUC score") {
  const std::vector<double> p1{2, 3}, n1{0, 1}, p2{1, 3}, n2{2}, p3{0.5}, n3{0.5};
  CHECK(single_dim_auc_score(p1, n1) == 1.0);
  CHECK(single_dim_auc_score(n1, p1) == 1.0);
  CHECK(single_dim_auc_score(p2, n2) == 0.0);
  CHECK(single_dim_auc_score(p3, n3) == 0.0);
}

TEST_CASE("bootstrap stability") {
  SelectorConfig cfg;
  const std::vector<std::string> five{"a", "b", "c", "d", "e"};

  SUBCASE("constant large gap on every benchmark is always stable") {
    Eigen::MatrixXd x(20, 1);
    std::vector<int> y;
    std::vector<std::string> d;
    for (int i = 0; i < 20; ++i) {
      y.push_back(i % 2);
      d.push_back(five[static_cast<std::size_t>(i / 4)]);
      x(i, 0) = i % 2 ? 10.0 : 0.0;
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      cfg.seed = seed;
      CHECK(bootstrap_stability(source_matrix(x, y, d), cfg)(0) == 1.0);
    }
  }

  SUBCASE("no class difference means no stability") {
    // Dimension 0: identical class multisets per benchmark. Dimension 1:
    // gaps alternate in sign over ten benchmarks.
    std::vector<int> y;
    std::vector<std::string> d;
    std::vector<std::array<double, 2>> rows;
    for (int b = 0; b < 10; ++b)
      for (int i = 0; i < 6; ++i) {
        const int cls = i % 2;
        const double v = static_cast<double>(i / 2);
        const double alt = (b % 2 == 0) == (cls == 1) ? 1.0 + 0.1 * i : -0.1 * i;
        rows.push_back({v, alt});
        y.push_back(cls);
        d.push_back("b" + std::to_string(b));
      }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1];
    const auto m = source_matrix(x, y, d);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      cfg.seed = seed;
      const auto b = bootstrap_stability(m, cfg);
      CHECK(b(0) <= 1.0 / 6.0);
      CHECK(b(1) <= 1.0 / 6.0);
    }
  }

  SUBCASE("values are multiples of 1/6") {
    Rng rng(8);
    Eigen::MatrixXd x(60, 12);
    std::vector<int> y;
    std::vector<std::string> d;
    for (int i = 0; i < 60; ++i) {
      y.push_back(i % 2);
      d.push_back(five[static_cast<std::size_t>(i % 5)]);
      for (int j = 0; j < 12; ++j) x(i, j) = standard_normal(rng) + 0.1 * j * (i % 2);
    }
    const auto b = bootstrap_stability(source_matrix(x, y, d), cfg);
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const double six = b(j) * 6.0;
      CHECK(std::abs(six - std::round(six)) < 1e-12);
    }
  }
}

TEST_CASE("layer prior") {
  const double expected[] = {1.0, 0.875, 0.75, 0.625, 0.5};
  for (int l = 1; l <= 5; ++l) CHECK(layer_prior(l, 5) == doctest::Approx(expected[l - 1]).epsilon(1e-12));
  CHECK(layer_prior(1, 1) == 1.0);
}

TEST_CASE("hybrid score") {
  DimensionStats st;
  st.benchmarks = {"a"};
  st.pooled_gap = Eigen::Vector2d(1, 1);
  st.direction = Eigen::Vector2d(1, 1);
  st.benchmark_gaps = Eigen::MatrixXd::Ones(1, 2);
  st.sign_consistency = Eigen::Vector2d(1, 1);
  st.gap_std = Eigen::Vector2d::Zero();
  st.domain_std = Eigen::Vector2d::Zero();
  st.benign_mean = Eigen::Vector2d(0.1, 0.1);
  const std::vector<FeatureKey> keys{FeatureKey::raw(1, 0), FeatureKey::raw(3, 0)};

  SUBCASE("all factors maximal") {
    const auto s = hybrid_score(st, Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1), keys, 5);
    CHECK(s.rho(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.rho(1) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.rho_tilde(0) == 1.0);
  }
  SUBCASE("edge penalty") {
    st.edge_mean = Eigen::Vector2d(0.4, 0.4);
    const auto s = hybrid_score(st, Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1), keys, 5);
    CHECK(s.edge_penalty(0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(s.prior(0) == doctest::Approx(1.0 / 1.075).epsilon(1e-12));
  }
}

TEST_CASE("discriminative factor bounds") {
  Rng rng(77);
  for (int rep = 0; rep < 500; ++rep) {
    DimensionStats st;
    st.benchmarks = {"a", "b"};
    st.pooled_gap = Eigen::VectorXd::Constant(1, standard_normal(rng));
    st.direction = st.pooled_gap.array().sign().matrix();
    st.benchmark_gaps = Eigen::MatrixXd::Zero(2, 1);
    st.sign_consistency = Eigen::VectorXd::Constant(1, std::floor(uniform01(rng) * 3) / 2);
    st.gap_std = Eigen::VectorXd::Constant(1, uniform01(rng));
    st.domain_std = Eigen::VectorXd::Constant(1, uniform01(rng));
    st.benign_mean = Eigen::VectorXd::Zero(1);
    const double a = uniform01(rng) < 0.2 ? 0.0 : uniform01(rng);
    const auto s = hybrid_score(st, Eigen::VectorXd::Constant(1, a), Eigen::VectorXd::Constant(1, 0.5),
                                raw_keys(1), 2);
    if (a == 0.0 || s.invariance(0) <= 0.0) CHECK(s.disc(0) == 0.0);
    CHECK(s.disc(0) <= std::max(a, s.invariance(0)) + 1e-15);
  }
}

TEST_CASE("target mass") {
  SelectorConfig cfg;
  for (double d : {0.01, 0.2, 0.43, 0.8, 1.0}) CHECK(target_mass(d, cfg) == doctest::Approx(q_of(d)).epsilon(1e-14));
  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double q = target_mass(i / 100.0, cfg);
    CHECK(q > prev);
    CHECK(q > 0.94);
    CHECK(q < 0.998);
    prev = q;
  }
}

TEST_CASE("adaptive support examples") {
  SelectorConfig cfg;
  SUBCASE("[4,2,1,1] keeps every dimension") {
    const auto sel = adaptive_support(Eigen::Vector4d(4, 2, 1, 1), raw_keys(4), cfg);
    CHECK(delta_of({4, 2, 1, 1}) == doctest::Approx(0.84090).epsilon(1e-4));
    CHECK(sel.diffuseness == doctest::Approx(delta_of({4, 2, 1, 1})).epsilon(1e-12));
    CHECK(sel.target_mass == doctest::Approx(0.99758).epsilon(1e-4));
    CHECK(sel.indices.size() == 4);
  }
  SUBCASE("[100,1,1,1,1] keeps the dominant dimension") {
    Eigen::VectorXd rho(5);
    rho << 100, 1, 1, 1, 1;
    const auto sel = adaptive_support(rho, raw_keys(5), cfg);
    CHECK(sel.diffuseness == doctest::Approx(0.24831).epsilon(1e-4));
    CHECK(sel.target_mass == doctest::Approx(0.94589).epsilon(1e-4));
    CHECK(sel.indices == std::vector<Eigen::Index>{0});
    CHECK(sel.cumulative_mass == doctest::Approx(100.0 / 104.0).epsilon(1e-12));
  }
  SUBCASE("uniform scores keep all ten") {
    const auto sel = adaptive_support(Eigen::VectorXd::Constant(10, 0.3), raw_keys(10), cfg);
    CHECK(sel.diffuseness == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sel.target_mass == doctest::Approx(0.99794).epsilon(1e-4));
    CHECK(sel.indices.size() == 10);
    // Ties resolve by key order.
    for (std::size_t i = 0; i < 10; ++i) CHECK(sel.indices[i] == static_cast<Eigen::Index>(i));
  }
  SUBCASE("non-positive scores are never selected") {
    const auto sel = adaptive_support(Eigen::Vector4d(-1, 0, 2, 0), raw_keys(4), cfg);
    CHECK(sel.positive_count == 1);
    CHECK(sel.indices == std::vector<Eigen::Index>{2});
    CHECK(adaptive_support(Eigen::Vector2d(0, -1), raw_keys(2), cfg).empty());
  }
}

TEST_CASE("support minimality and normalized scores on random vectors") {
  SelectorConfig cfg;
  Rng rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 40));
    Eigen::VectorXd rho(n);
    for (int j = 0; j < n; ++j) {
      const double u = uniform01(rng);
      rho(j) = u < 0.2 ? 0.0 : (u < 0.3 ? -uniform01(rng) : std::pow(uniform01(rng), 4.0));
    }
    const auto keys = raw_keys(n);
    const auto sel = adaptive_support(rho, keys, cfg);
    Eigen::VectorXd rt, pi;
    normalize_scores(rho, rt, pi);
    const double total = rho.cwiseMax(0.0).sum();
    if (total == 0.0) {
      CHECK(sel.empty());
      continue;
    }
    CHECK(rt.maxCoeff() == 1.0);
    CHECK(rt.minCoeff() >= 0.0);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));

    double cum = 0.0;
    for (auto j : sel.indices) cum += rho(j) / total;
    double without_last = cum - rho(sel.indices.back()) / total;
    CHECK(cum >= sel.target_mass - 1e-12);
    CHECK(without_last < sel.target_mass);
    // Prefix of the descending order.
    for (std::size_t a = 0; a < sel.indices.size(); ++a)
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::find(sel.indices.begin(), sel.indices.end(), j) == sel.indices.end())
          CHECK(rho(sel.indices[a]) >= rho(j));

    const auto w = soft_weights(sel, rt, cfg);
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool in = std::find(sel.indices.begin(), sel.indices.end(), j) != sel.indices.end();
      if (!in) CHECK(w(j) == 0.0);
      else CHECK((w(j) >= 0.75 && w(j) <= 1.0));
    }
    CHECK(w(sel.indices.front()) == 1.0);
  }
}

TEST_CASE("soft weights") {
  SelectorConfig cfg;
  const auto keys = raw_keys(3);
  const Eigen::Vector3d rho(1.0, 0.25, 1e-12);
  SupportSelection sel;
  sel.indices = {0, 1, 2};
  sel.keys = keys;
  const auto w = soft_weights(sel, rho, cfg);
  CHECK(w(0) == 1.0);
  CHECK(w(1) == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(w(2) == doctest::Approx(0.75).epsilon(1e-5));
}

TEST_CASE("selector is deterministic given data and seed") {
  Rng rng(4);
  Eigen::MatrixXd x(80, 10);
  std::vector<int> y;
  std::vector<std::string> d;
  for (int i = 0; i < 80; ++i) {
    y.push_back(i % 2);
    d.push_back(i < 40 ? "a" : "b");
    for (int j = 0; j < 10; ++j) x(i, j) = standard_normal(rng) + (j < 3 ? 1.5 * (i % 2) : 0.0);
  }
  const auto m = source_matrix(x, y, d);
  SelectorConfig cfg;
  cfg.seed = 99;
  const auto a = run_selector(m, 1, cfg);
  const auto b = run_selector(m, 1, cfg);
  CHECK(a.selection.indices == b.selection.indices);
  CHECK(a.weights == b.weights);
  CHECK(a.scores.rho == b.scores.rho);
  // The planted dimensions lead the support.
  std::vector<Eigen::Index> top(a.selection.indices.begin(), a.selection.indices.begin() + 3);
  std::sort(top.begin(), top.end());
  CHECK(top == std::vector<Eigen::Index>{0, 1, 2});
}

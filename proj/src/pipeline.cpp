#include "routescan/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "routescan/feature_matrix.hpp"
#include "routescan/random.hpp"

namespace routescan {

namespace {

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

Json metrics_json(const MetricReport& m) {
  return {{"auroc", round4(m.auroc)},
          {"average_precision", round4(m.average_precision)},
          {"f1_at_05", round4(m.f1_at_05)},
          {"acc_at_05", round4(m.acc_at_05)},
          {"precision_at_p90", round4(m.precision_at_p90)},
          {"coverage_at_p90", round4(m.coverage_at_p90)},
          {"p90_empty", m.p90_empty},
          {"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn}};
}

MetricReport metrics_from(const Json& j) {
  MetricReport m;
  m.auroc = j.at("auroc").get<double>();
  m.average_precision = j.at("average_precision").get<double>();
  m.f1_at_05 = j.at("f1_at_05").get<double>();
  m.acc_at_05 = j.at("acc_at_05").get<double>();
  m.precision_at_p90 = j.at("precision_at_p90").get<double>();
  m.coverage_at_p90 = j.at("coverage_at_p90").get<double>();
  m.p90_empty = j.at("p90_empty").get<bool>();
  m.tp = j.at("tp").get<long>();
  m.fp = j.at("fp").get<long>();
  m.tn = j.at("tn").get<long>();
  m.fn = j.at("fn").get<long>();
  return m;
}

std::vector<std::string> domains_of(std::span<const TelemetryRecord> records) {
  std::set<std::string> d;
  for (const auto& r : records) d.insert(r.domain);
  return {d.begin(), d.end()};
}

}  // namespace

FoldReport make_fold_report(const FoldResult& r) {
  FoldReport f;
  f.fold = r.spec.name;
  f.protocol = r.spec.protocol;
  f.target = r.spec.target;
  f.sources = r.spec.source_benchmarks;
  f.target_size = static_cast<long>(r.target_ids.size());
  f.support_size = static_cast<long>(r.bundle.transform.keys.size());
  f.inverse_strength = r.bundle.model.inverse_strength;
  f.separation = r.bundle.margin_stats.separation;
  f.disparity = r.bundle.margin_stats.disparity;
  f.metrics = r.metrics;
  return f;
}

std::vector<TelemetryRecord> load_corpus(const RunConfig& config) {
  if (config.simulate) return generate_synthetic_corpus(*config.simulate);
  if (!config.telemetry_path) throw ConfigError("no telemetry source configured");
  return read_telemetry(*config.telemetry_path, config.profile);
}

std::vector<FoldSpec> plan_folds(const RunConfig& config, std::span<const TelemetryRecord> records) {
  const auto& p = config.protocol;
  const auto domains = domains_of(records);
  auto require_domain = [&](const std::string& d) {
    if (!std::binary_search(domains.begin(), domains.end(), d))
      throw ProtocolError("benchmark '" + d + "' has no records");
  };
  const std::uint64_t seed = derive_seed(config.seed, {4});

  std::vector<FoldSpec> folds;
  if (p.kind == Protocol::leave_one_target_out) {
    if (p.folds.empty()) {
      folds = make_lodo_folds(records, p.fractions, seed);
    } else {
      for (std::size_t i = 0; i < p.folds.size(); ++i) {
        const auto& f = p.folds[i];
        std::vector<std::string> sources = f.sources;
        if (sources.empty())
          for (const auto& d : domains)
            if (d != f.target) sources.push_back(d);
        for (const auto& s : sources) require_domain(s);
        require_domain(f.target);
        folds.push_back(make_lodo_fold(records, f.target, sources, p.fractions, derive_seed(seed, {i})));
      }
    }
  } else {
    require_domain(p.benchmark);
    for (const auto& w : p.unseen_wrappers)
      folds.push_back(make_mixed_positive_fold(records, p.benchmark, p.seen_wrapper, w, p.mixed_fractions, seed));
  }
  for (const auto& f : folds) check_fold_isolation(records, f);
  return folds;
}

PipelineSettings pipeline_settings(const RunConfig& config) {
  PipelineSettings s;
  s.selector = config.selector;
  s.transform = config.transform;
  s.regularizer = config.regularizer;
  s.config_hash = config_hash(config);
  s.edge_ids = config.edge_ids;
  return s;
}

PipelineOutcome run_pipeline(const RunConfig& config) {
  in_stage("config", [&] { config.validate(); });
  const auto records = in_stage(config.simulate ? "simulate" : "load", [&] { return load_corpus(config); });
  return run_pipeline(config, records);
}

PipelineOutcome run_pipeline(const RunConfig& config, std::span<const TelemetryRecord> records) {
  PipelineOutcome out;
  const auto settings = in_stage("config", [&] {
    config.validate();
    return pipeline_settings(config);
  });
  out.config_hash = settings.config_hash;
  const auto folds = in_stage("protocol", [&] { return plan_folds(config, records); });

  for (const auto& fold : folds) {
    const auto result = in_stage("fold", [&] {
      try {
        return run_fold(records, config.profile, fold, settings);
      } catch (const std::exception& e) {
        throw StageError("fold " + fold.name, e.what());
      }
    });
    out.reports.push_back(make_fold_report(result));
    in_stage("write", [&] {
      const auto stem = file_stem(fold.name);
      const auto sel = config.output_dir / ("selector_report_" + stem + ".json");
      write_file_atomic(sel, selector_report(result.selector, config.selector, settings.config_hash).dump(2) + "\n");
      const auto bun = config.output_dir / ("detector_bundle_" + stem + ".json");
      write_file_atomic(bun, bundle_to_json(result.bundle).dump(2) + "\n");
      out.files.push_back(sel);
      out.files.push_back(bun);
    });
  }
  const auto reports = in_stage("report", [&] { return emit_report(out.reports, out.config_hash, config.output_dir); });
  out.files.insert(out.files.end(), reports.begin(), reports.end());
  return out;
}

double round4(double x) {
  const double r = std::round(x * 1e4) / 1e4;
  return r == 0.0 ? 0.0 : r;
}

std::string format4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", round4(x));
  return buf;
}

std::string metrics_csv(std::span<const FoldReport> reports, const std::string& config_hash) {
  std::string out =
      "fold,protocol,target,n_target,support_size,inverse_strength,separation,disparity,auroc,average_precision,"
      "f1_at_05,acc_at_05,precision_at_p90,coverage_at_p90,p90_empty,tp,fp,tn,fn,config_hash\n";
  for (const auto& r : reports) {
    const auto& m = r.metrics;
    out += r.fold + ',' + std::string(to_string(r.protocol)) + ',' + r.target + ',' + std::to_string(r.target_size) +
           ',' + std::to_string(r.support_size) + ',' + format4(r.inverse_strength) + ',' + format4(r.separation) +
           ',' + format4(r.disparity) + ',' + format4(m.auroc) + ',' + format4(m.average_precision) + ',' +
           format4(m.f1_at_05) + ',' + format4(m.acc_at_05) + ',' + format4(m.precision_at_p90) + ',' +
           format4(m.coverage_at_p90) + ',' + (m.p90_empty ? "1" : "0") + ',' + std::to_string(m.tp) + ',' +
           std::to_string(m.fp) + ',' + std::to_string(m.tn) + ',' + std::to_string(m.fn) + ',' + config_hash + '\n';
  }
  return out;
}

Json summary_json(std::span<const FoldReport> reports, const std::string& config_hash) {
  Json folds = Json::array();
  double auroc = 0.0, f1 = 0.0, acc = 0.0, ap = 0.0;
  for (const auto& r : reports) {
    folds.push_back({{"fold", r.fold},
                     {"protocol", std::string(to_string(r.protocol))},
                     {"target", r.target},
                     {"sources", r.sources},
                     {"n_target", r.target_size},
                     {"support_size", r.support_size},
                     {"inverse_strength", round4(r.inverse_strength)},
                     {"separation", round4(r.separation)},
                     {"disparity", round4(r.disparity)},
                     {"metrics", metrics_json(r.metrics)}});
    auroc += r.metrics.auroc;
    f1 += r.metrics.f1_at_05;
    acc += r.metrics.acc_at_05;
    ap += r.metrics.average_precision;
  }
  const double n = reports.empty() ? 1.0 : static_cast<double>(reports.size());
  return {{"format", "routescan.summary/1"},
          {"config_hash", config_hash},
          {"folds", folds},
          {"mean",
           {{"auroc", round4(auroc / n)},
            {"average_precision", round4(ap / n)},
            {"f1_at_05", round4(f1 / n)},
            {"acc_at_05", round4(acc / n)}}}};
}

std::vector<FoldReport> reports_from_summary(const Json& summary) {
  std::vector<FoldReport> out;
  try {
    for (const auto& f : summary.at("folds")) {
      FoldReport r;
      r.fold = f.at("fold").get<std::string>();
      r.protocol = parse_protocol(f.at("protocol").get<std::string>());
      r.target = f.at("target").get<std::string>();
      r.sources = f.at("sources").get<std::vector<std::string>>();
      r.target_size = f.at("n_target").get<long>();
      r.support_size = f.at("support_size").get<long>();
      r.inverse_strength = f.at("inverse_strength").get<double>();
      r.separation = f.at("separation").get<double>();
      r.disparity = f.at("disparity").get<double>();
      r.metrics = metrics_from(f.at("metrics"));
      out.push_back(std::move(r));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("invalid summary: ") + e.what());
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(std::span<const FoldReport> reports, const std::string& config_hash,
                                               const std::filesystem::path& dir) {
  if (reports.empty()) throw ConfigError("no fold reports to emit");
  const auto csv = dir / "metrics.csv";
  const auto summary = dir / "summary.json";
  write_file_atomic(csv, metrics_csv(reports, config_hash));
  write_file_atomic(summary, summary_json(reports, config_hash).dump(2) + "\n");
  return {csv, summary};
}

std::string file_stem(std::string_view fold_name) {
  std::string s;
  for (char c : fold_name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '.';
    s += ok ? c : '_';
  }
  return s;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::string full_precision(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string features_csv(const FeatureMatrix& m, const std::string& config_hash) {
  std::string out = "# config_hash=" + config_hash + "\nrequest_id,group_id,class,domain,wrapper";
  for (const auto& k : m.keys) out += ',' + k.to_string();
  out += '\n';
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    const auto& meta = m.meta[static_cast<std::size_t>(i)];
    out += csv_field(meta.request_id) + ',' + csv_field(meta.group_id) + ',' + std::string(to_string(meta.label)) +
           ',' + csv_field(meta.domain) + ',' + csv_field(meta.wrapper.value_or(""));
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) out += ',' + full_precision(m.values(i, j));
    out += '\n';
  }
  return out;
}

TrainedAudit train_on_corpus(const RunConfig& config, std::span<const TelemetryRecord> records) {
  const auto split = group_isolated_split(records, config.protocol.fractions, derive_seed(config.seed, {4}));
  std::vector<TelemetryRecord> train, validation;
  for (auto i : split.train) train.push_back(records[static_cast<std::size_t>(i)]);
  for (auto i : split.validation) validation.push_back(records[static_cast<std::size_t>(i)]);

  bool wrapped = false;
  for (const auto& r : records) wrapped = wrapped || (r.label == ClassLabel::positive && r.wrapper);
  PositivePartition partition;
  for (const auto& r : validation)
    if (r.label == ClassLabel::positive)
      partition[wrapped ? r.wrapper.value_or("direct") : "harmful"].push_back(r.request_id);

  const auto settings = pipeline_settings(config);
  const auto train_m = featurize(train, config.profile, SplitTag::source_train);
  const auto val_m = featurize(validation, config.profile, SplitTag::source_validation);
  TrainedAudit out;
  out.selector = run_selector(train_m, config.profile.num_layers(), config.selector, config.edge_ids);
  out.bundle = train_audit_model(train_m, val_m, partition, out.selector, config.transform, config.regularizer,
                                 {settings.config_hash, config.seed});
  return out;
}

FoldReport evaluate_bundle(const DetectorBundle& bundle, std::span<const TelemetryRecord> records,
                           const DeploymentProfile& profile) {
  const std::vector<TelemetryRecord> rows(records.begin(), records.end());
  const auto m = featurize(rows, profile, SplitTag::target_test);
  const auto scored = score(bundle, m);
  FoldReport r;
  r.fold = "external";
  r.target = "external";
  r.target_size = static_cast<long>(rows.size());
  r.support_size = static_cast<long>(bundle.transform.keys.size());
  r.inverse_strength = bundle.model.inverse_strength;
  r.separation = bundle.margin_stats.separation;
  r.disparity = bundle.margin_stats.disparity;
  r.metrics = bundle_metrics(bundle, scored, m.labels());
  return r;
}

Json probe_report(const RunConfig& config, std::span<const TelemetryRecord> records, const std::string& config_hash) {
  const auto& attribute = config.probe.attribute;
  if (attribute.empty()) throw ConfigError("probe needs an attribute name");
  const std::vector<TelemetryRecord> rows(records.begin(), records.end());
  const auto m = featurize(rows, config.profile, SplitTag::unassigned);
  Eigen::VectorXd y(m.values.rows());
  std::vector<std::string> scenarios, groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = rows[i].attributes.find(attribute);
    if (it == rows[i].attributes.end())
      throw InputError("record '" + rows[i].request_id + "' lacks attribute '" + attribute + "'");
    y(static_cast<Eigen::Index>(i)) = it->second ? 1.0 : 0.0;
    scenarios.push_back(rows[i].domain);
    groups.push_back(rows[i].group_id);
  }
  const auto res = attribute_probe_eval(m.values, y, scenarios, groups, config.probe.probe);
  Json loso = res.loso_available ? Json{{"auroc", round4(res.loso.auroc)},
                                        {"f1_at_05", round4(res.loso.f1_at_05)},
                                        {"acc_at_05", round4(res.loso.acc_at_05)},
                                        {"precision_at_p90", round4(res.loso.precision_at_p90)},
                                        {"coverage_at_p90", round4(res.loso.coverage_at_p90)},
                                        {"p90_empty", res.loso.p90_empty},
                                        {"folds", res.loso_folds},
                                        {"folds_skipped", res.loso_folds_skipped}}
                                 : Json(nullptr);
  return {{"format", "routescan.probe_report/1"},
          {"config_hash", config_hash},
          {"attribute", attribute},
          {"positive_rate", round4(res.positive_rate)},
          {"all_positive_f1", round4(res.all_positive_f1)},
          {"scenario_only_f1", round4(res.scenario_only_f1)},
          {"random_split",
           {{"auroc", round4(res.random_split.auroc)},
            {"average_precision", round4(res.random_split.average_precision)},
            {"f1_at_05", round4(res.random_split.f1_at_05)},
            {"acc_at_05", round4(res.random_split.acc_at_05)},
            {"precision_at_p90", round4(res.random_split.precision_at_p90)},
            {"coverage_at_p90", round4(res.random_split.coverage_at_p90)},
            {"p90_empty", res.random_split.p90_empty}}},
          {"loso", loso}};
}

}  // namespace routescan

// Batch auditing CLI over routing telemetry.
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "routescan/feature_matrix.hpp"
#include "routescan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace routescan;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the master seed");
  cmd->add_option("--out", c.out, "output directory (defaults to the config's output_dir)");
}

RunConfig resolve(const Common& c) {
  auto config = load_run_config(c.config);
  if (c.seed) config.apply_seed(*c.seed);
  if (!c.out.empty()) config.output_dir = c.out;
  return config;
}

std::vector<TelemetryRecord> records_for(const RunConfig& config, const std::string& telemetry) {
  if (telemetry.empty()) return load_corpus(config);
  return read_telemetry(telemetry, config.profile);
}

void announce(const fs::path& p) { std::cout << p.string() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"routescan: routing-telemetry auditing"};
  app.require_subcommand(1);

  Common sim_opts, feat_opts, sel_opts, train_opts, eval_opts, probe_opts;
  std::string feat_telemetry, sel_telemetry, train_telemetry, eval_telemetry, eval_bundle, probe_telemetry,
      probe_attribute, report_input, report_out;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic telemetry corpus");
  add_common(sim, sim_opts);

  auto* feat = app.add_subcommand("featurize", "write the request representation as CSV");
  add_common(feat, feat_opts);
  feat->add_option("--telemetry", feat_telemetry, "telemetry JSONL (defaults to the config's source)");

  auto* sel = app.add_subcommand("select", "run hybrid scoring and adaptive support on a corpus");
  add_common(sel, sel_opts);
  sel->add_option("--telemetry", sel_telemetry, "telemetry JSONL");

  auto* train = app.add_subcommand("train", "train a detector bundle on a whole corpus");
  add_common(train, train_opts);
  train->add_option("--telemetry", train_telemetry, "telemetry JSONL");

  auto* eval = app.add_subcommand("evaluate", "run the configured protocol, or score a corpus with a bundle");
  add_common(eval, eval_opts);
  eval->add_option("--telemetry", eval_telemetry, "telemetry JSONL");
  eval->add_option("--bundle", eval_bundle, "frozen detector bundle; skips training")->check(CLI::ExistingFile);

  auto* probe = app.add_subcommand("probe", "attribute-inference probe with random and LOSO splits");
  add_common(probe, probe_opts);
  probe->add_option("--telemetry", probe_telemetry, "telemetry JSONL");
  probe->add_option("--attribute", probe_attribute, "attribute name (overrides the config)");

  auto* report = app.add_subcommand("report", "re-emit metrics.csv and summary.json from a summary");
  std::string report_config;
  report->add_option("--config", report_config, "run configuration; supplies the default directories")
      ->check(CLI::ExistingFile);
  report->add_option("--input", report_input, "summary.json (defaults to <output_dir>/summary.json)")
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "output directory (defaults to the config's output_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto config = resolve(sim_opts);
      if (!config.simulate) throw ConfigError("config has no 'simulate' section");
      const auto records = generate_synthetic_corpus(*config.simulate);
      const auto path = config.output_dir / "telemetry.jsonl";
      write_telemetry(path, records, config.profile);
      const auto meta = config.output_dir / "telemetry.meta.json";
      write_file_atomic(meta, Json{{"config_hash", config_hash(config)},
                                   {"records", records.size()},
                                   {"profile", profile_to_json(config.profile)}}
                                      .dump(2) + "\n");
      announce(path);
      announce(meta);
    } else if (*feat) {
      const auto config = resolve(feat_opts);
      const auto m = featurize(records_for(config, feat_telemetry), config.profile, SplitTag::unassigned);
      const auto path = config.output_dir / "features.csv";
      write_file_atomic(path, features_csv(m, config_hash(config)));
      announce(path);
    } else if (*sel) {
      const auto config = resolve(sel_opts);
      const auto m = featurize(records_for(config, sel_telemetry), config.profile, SplitTag::source_train);
      const auto result = run_selector(m, config.profile.num_layers(), config.selector, config.edge_ids);
      const auto path = config.output_dir / "selector_report.json";
      write_file_atomic(path, selector_report(result, config.selector, config_hash(config)).dump(2) + "\n");
      announce(path);
    } else if (*train) {
      const auto config = resolve(train_opts);
      const auto trained = train_on_corpus(config, records_for(config, train_telemetry));
      const auto hash = config_hash(config);
      const auto sel_path = config.output_dir / "selector_report.json";
      write_file_atomic(sel_path, selector_report(trained.selector, config.selector, hash).dump(2) + "\n");
      const auto path = config.output_dir / "detector_bundle.json";
      write_file_atomic(path, bundle_to_json(trained.bundle).dump(2) + "\n");
      announce(sel_path);
      announce(path);
    } else if (*eval) {
      const auto config = resolve(eval_opts);
      if (!eval_bundle.empty()) {
        const auto bundle = bundle_from_json(Json::parse(read_file(eval_bundle)));
        const auto records = records_for(config, eval_telemetry);
        const std::vector<FoldReport> reports{evaluate_bundle(bundle, records, config.profile)};
        for (const auto& p : emit_report(reports, bundle.provenance.config_hash, config.output_dir)) announce(p);
      } else {
        const auto outcome = eval_telemetry.empty()
                                 ? run_pipeline(config)
                                 : run_pipeline(config, read_telemetry(eval_telemetry, config.profile));
        for (const auto& p : outcome.files) announce(p);
      }
    } else if (*probe) {
      auto config = resolve(probe_opts);
      if (!probe_attribute.empty()) config.probe.attribute = probe_attribute;
      const auto records = records_for(config, probe_telemetry);
      const auto path = config.output_dir / "probe_report.json";
      write_file_atomic(path, probe_report(config, records, config_hash(config)).dump(2) + "\n");
      announce(path);
    } else if (*report) {
      fs::path dir;
      if (!report_config.empty()) dir = load_run_config(report_config).output_dir;
      if (report_input.empty() && dir.empty()) throw ConfigError("report needs --input or --config");
      if (report_out.empty() && dir.empty()) throw ConfigError("report needs --out or --config");
      if (report_input.empty()) report_input = (dir / "summary.json").string();
      if (report_out.empty()) report_out = dir.string();
      const auto summary = Json::parse(read_file(report_input));
      const auto reports = reports_from_summary(summary);
      for (const auto& p : emit_report(reports, summary.at("config_hash").get<std::string>(), report_out)) announce(p);
    }
  } catch (const std::exception& e) {
    std::cerr << "routescan: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

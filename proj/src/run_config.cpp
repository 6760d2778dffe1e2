#include "routescan/run_config.hpp"

#include <fstream>
#include <set>

#include "routescan/errors.hpp"
#include "routescan/random.hpp"

namespace routescan {

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [k, v] : j.items())
    if (!ok.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

Json section(const Json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? Json::object() : *it;
}

SyntheticCorpusSpec parse_simulate(const Json& j, const DeploymentProfile& profile) {
  reject_unknown(j,
                 {"domains", "wrappers", "requests_per_cell", "min_tokens", "max_tokens", "class_bias_strength",
                  "bias_experts_per_layer", "token_noise_std", "group_noise_std", "domain_shift_std",
                  "wrapper_shift_strength", "wrapper_experts_per_layer", "domain_attributes"},
                 "simulate");
  SyntheticCorpusSpec s;
  s.profile = profile;
  read(j, "domains", s.domains);
  read(j, "wrappers", s.wrappers);
  read(j, "requests_per_cell", s.requests_per_cell);
  read(j, "min_tokens", s.min_tokens);
  read(j, "max_tokens", s.max_tokens);
  read(j, "class_bias_strength", s.class_bias_strength);
  read(j, "bias_experts_per_layer", s.bias_experts_per_layer);
  read(j, "token_noise_std", s.token_noise_std);
  read(j, "group_noise_std", s.group_noise_std);
  read(j, "domain_shift_std", s.domain_shift_std);
  read(j, "wrapper_shift_strength", s.wrapper_shift_strength);
  read(j, "wrapper_experts_per_layer", s.wrapper_experts_per_layer);
  read(j, "domain_attributes", s.domain_attributes);
  return s;
}

Json simulate_to_json(const SyntheticCorpusSpec& s) {
  return {{"domains", s.domains},
          {"wrappers", s.wrappers},
          {"requests_per_cell", s.requests_per_cell},
          {"min_tokens", s.min_tokens},
          {"max_tokens", s.max_tokens},
          {"class_bias_strength", s.class_bias_strength},
          {"bias_experts_per_layer", s.bias_experts_per_layer},
          {"token_noise_std", s.token_noise_std},
          {"group_noise_std", s.group_noise_std},
          {"domain_shift_std", s.domain_shift_std},
          {"wrapper_shift_strength", s.wrapper_shift_strength},
          {"wrapper_experts_per_layer", s.wrapper_experts_per_layer},
          {"domain_attributes", s.domain_attributes}};
}

SplitFractions parse_fractions(const Json& j, SplitFractions f, const std::string& where) {
  reject_unknown(j, {"train", "validation"}, where);
  read(j, "train", f.train);
  read(j, "validation", f.validation);
  return f;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  if (simulate) simulate->seed = derive_seed(s, {1});
  selector.seed = derive_seed(s, {2});
  probe.probe.seed = derive_seed(s, {3});
}

void RunConfig::validate() const {
  profile.validate();
  selector.validate();
  transform.validate();
  regularizer.validate();
  protocol.fractions.validate();
  if (simulate) {
    simulate->validate();
    if (simulate->profile.profile_id != profile.profile_id) throw ConfigError("simulator profile differs from run profile");
  } else if (!telemetry_path) {
    throw ConfigError("config needs either a 'simulate' section or a 'telemetry' path");
  }
  for (const auto& f : protocol.folds) {
    if (f.target.empty()) throw ConfigError("fold without a target");
    for (const auto& s : f.sources)
      if (s == f.target) throw ProtocolError("target '" + f.target + "' is also listed as a source");
  }
  if (protocol.kind == Protocol::mixed_positive) {
    if (protocol.benchmark.empty() || protocol.seen_wrapper.empty() || protocol.unseen_wrappers.empty())
      throw ConfigError("mixed_positive needs benchmark, seen_wrapper and unseen_wrappers");
    for (const auto& w : protocol.unseen_wrappers)
      if (w == protocol.seen_wrapper) throw ProtocolError("wrapper '" + w + "' is both seen and unseen");
  }
}

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    reject_unknown(j,
                   {"profile", "simulate", "telemetry", "selector", "transform", "regularizer", "protocol", "probe",
                    "edge_ids", "seed", "output_dir"},
                   "config");
    if (!j.contains("profile")) throw ConfigError("config needs a 'profile' section");
    c.profile = profile_from_json(j.at("profile"));
    if (const auto it = j.find("simulate"); it != j.end() && !it->is_null())
      c.simulate = parse_simulate(*it, c.profile);
    if (const auto it = j.find("telemetry"); it != j.end() && !it->is_null()) {
      std::filesystem::path p = it->get<std::string>();
      c.telemetry_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }

    const Json sel = section(j, "selector");
    reject_unknown(sel,
                   {"eta", "kappa", "bootstrap_rounds", "bootstrap_benchmark_fraction", "bootstrap_gap_floor", "q_low",
                    "q_high", "q_slope", "q_center"},
                   "selector");
    read(sel, "eta", c.selector.eta);
    read(sel, "kappa", c.selector.kappa);
    read(sel, "bootstrap_rounds", c.selector.bootstrap_rounds);
    read(sel, "bootstrap_benchmark_fraction", c.selector.bootstrap_benchmark_fraction);
    read(sel, "bootstrap_gap_floor", c.selector.bootstrap_gap_floor);
    read(sel, "q_low", c.selector.q_low);
    read(sel, "q_high", c.selector.q_high);
    read(sel, "q_slope", c.selector.q_slope);
    read(sel, "q_center", c.selector.q_center);

    const Json tr = section(j, "transform");
    reject_unknown(tr, {"w_raw", "w_rate", "w_res"}, "transform");
    read(tr, "w_raw", c.transform.w_raw);
    read(tr, "w_rate", c.transform.w_rate);
    read(tr, "w_res", c.transform.w_res);

    const Json reg = section(j, "regularizer");
    reject_unknown(reg, {"c_min", "c_max", "c_ref", "alpha", "beta", "gamma", "eps_sep"}, "regularizer");
    read(reg, "c_min", c.regularizer.c_min);
    read(reg, "c_max", c.regularizer.c_max);
    read(reg, "c_ref", c.regularizer.c_ref);
    read(reg, "alpha", c.regularizer.alpha);
    read(reg, "beta", c.regularizer.beta);
    read(reg, "gamma", c.regularizer.gamma);
    read(reg, "eps_sep", c.regularizer.eps_sep);

    const Json pr = section(j, "protocol");
    reject_unknown(pr, {"kind", "fractions", "folds", "benchmark", "seen_wrapper", "unseen_wrappers", "mixed_fractions"},
                   "protocol");
    if (pr.contains("kind")) c.protocol.kind = parse_protocol(pr.at("kind").get<std::string>());
    if (pr.contains("fractions")) c.protocol.fractions = parse_fractions(pr.at("fractions"), {}, "protocol.fractions");
    if (pr.contains("mixed_fractions"))
      c.protocol.mixed_fractions =
          parse_fractions(pr.at("mixed_fractions"), c.protocol.mixed_fractions, "protocol.mixed_fractions");
    if (const auto it = pr.find("folds"); it != pr.end())
      for (const auto& f : *it) {
        reject_unknown(f, {"target", "sources"}, "protocol.folds[]");
        LotoFoldConfig fold;
        read(f, "target", fold.target);
        read(f, "sources", fold.sources);
        c.protocol.folds.push_back(std::move(fold));
      }
    read(pr, "benchmark", c.protocol.benchmark);
    read(pr, "seen_wrapper", c.protocol.seen_wrapper);
    read(pr, "unseen_wrappers", c.protocol.unseen_wrappers);

    const Json pb = section(j, "probe");
    reject_unknown(pb, {"attribute", "inverse_strength", "max_iterations", "balanced", "train_fraction"}, "probe");
    read(pb, "attribute", c.probe.attribute);
    read(pb, "inverse_strength", c.probe.probe.inverse_strength);
    read(pb, "max_iterations", c.probe.probe.max_iterations);
    read(pb, "balanced", c.probe.probe.balanced);
    read(pb, "train_fraction", c.probe.probe.train_fraction);

    read(j, "edge_ids", c.edge_ids);
    read(j, "output_dir", c.output_dir);
    std::uint64_t seed = 0;
    read(j, "seed", seed);
    c.apply_seed(seed);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

Json run_config_to_json(const RunConfig& c) {
  Json folds = Json::array();
  for (const auto& f : c.protocol.folds) folds.push_back({{"target", f.target}, {"sources", f.sources}});
  Json j = {
      {"profile", profile_to_json(c.profile)},
      {"simulate", c.simulate ? simulate_to_json(*c.simulate) : Json(nullptr)},
      {"telemetry", c.telemetry_path ? Json(c.telemetry_path->generic_string()) : Json(nullptr)},
      {"selector",
       {{"eta", c.selector.eta},
        {"kappa", c.selector.kappa},
        {"bootstrap_rounds", c.selector.bootstrap_rounds},
        {"bootstrap_benchmark_fraction", c.selector.bootstrap_benchmark_fraction},
        {"bootstrap_gap_floor", c.selector.bootstrap_gap_floor},
        {"q_low", c.selector.q_low},
        {"q_high", c.selector.q_high},
        {"q_slope", c.selector.q_slope},
        {"q_center", c.selector.q_center}}},
      {"transform", {{"w_raw", c.transform.w_raw}, {"w_rate", c.transform.w_rate}, {"w_res", c.transform.w_res}}},
      {"regularizer",
       {{"c_min", c.regularizer.c_min},
        {"c_max", c.regularizer.c_max},
        {"c_ref", c.regularizer.c_ref},
        {"alpha", c.regularizer.alpha},
        {"beta", c.regularizer.beta},
        {"gamma", c.regularizer.gamma},
        {"eps_sep", c.regularizer.eps_sep}}},
      {"protocol",
       {{"kind", std::string(to_string(c.protocol.kind))},
        {"fractions", {{"train", c.protocol.fractions.train}, {"validation", c.protocol.fractions.validation}}},
        {"folds", folds},
        {"benchmark", c.protocol.benchmark},
        {"seen_wrapper", c.protocol.seen_wrapper},
        {"unseen_wrappers", c.protocol.unseen_wrappers},
        {"mixed_fractions",
         {{"train", c.protocol.mixed_fractions.train}, {"validation", c.protocol.mixed_fractions.validation}}}}},
      {"probe",
       {{"attribute", c.probe.attribute},
        {"inverse_strength", c.probe.probe.inverse_strength},
        {"max_iterations", c.probe.probe.max_iterations},
        {"balanced", c.probe.probe.balanced},
        {"train_fraction", c.probe.probe.train_fraction}}},
      {"edge_ids", c.edge_ids},
      {"seed", c.seed},
  };
  return j;
}

std::string config_hash(const RunConfig& c) { return fnv1a_hex(run_config_to_json(c).dump()); }

}  // namespace routescan

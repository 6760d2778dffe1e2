#include "routescan/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "routescan/errors.hpp"

namespace routescan {

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Json telemetry_to_json(const TelemetryRecord& r, const DeploymentProfile& profile) {
  Json layers = Json::array();
  for (const auto& [layer_id, experts] : r.loads) {
    if (layer_id < 1 || layer_id > profile.num_layers())
      throw AlignmentError("record '" + r.request_id + "' has layer " + std::to_string(layer_id) + " outside the profile");
    std::vector<double> dense(static_cast<std::size_t>(profile.experts(layer_id)), 0.0);
    for (const auto& [e, v] : experts) {
      if (e < 0 || e >= static_cast<int>(dense.size()))
        throw AlignmentError("record '" + r.request_id + "' has expert " + std::to_string(e) + " outside layer " +
                             std::to_string(layer_id));
      dense[static_cast<std::size_t>(e)] = v;
    }
    layers.push_back({{"layer_id", layer_id}, {"loads", dense}});
  }
  Json attrs = Json::object();
  for (const auto& [k, v] : r.attributes) attrs[k] = v;
  return {{"request_id", r.request_id},
          {"profile_id", r.profile_id},
          {"group_id", r.group_id},
          {"class", std::string(to_string(r.label))},
          {"domain", r.domain},
          {"wrapper", r.wrapper ? Json(*r.wrapper) : Json(nullptr)},
          {"attributes", attrs},
          {"layers", layers}};
}

TelemetryRecord telemetry_from_json(const Json& j, const DeploymentProfile& profile, std::size_t line) {
  auto fail = [&](const std::string& what) { return ParseError(what, line); };
  if (!j.is_object()) throw fail("telemetry record must be a JSON object");
  auto text = [&](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw fail(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };

  TelemetryRecord r;
  r.request_id = text("request_id");
  r.profile_id = text("profile_id");
  r.group_id = text("group_id");
  r.domain = text("domain");
  try {
    r.label = parse_class_label(text("class"));
  } catch (const ParseError& e) {
    throw fail(e.what());
  }
  if (r.profile_id != profile.profile_id) {
    const std::string where = line ? "line " + std::to_string(line) + ": " : "";
    throw AlignmentError(where + "record '" + r.request_id + "' belongs to profile '" + r.profile_id +
                         "', expected '" + profile.profile_id + "'");
  }
  if (const auto w = j.find("wrapper"); w != j.end() && !w->is_null()) {
    if (!w->is_string()) throw fail("field 'wrapper' must be a string or null");
    r.wrapper = w->get<std::string>();
  }
  if (const auto a = j.find("attributes"); a != j.end() && !a->is_null()) {
    if (!a->is_object()) throw fail("field 'attributes' must be an object");
    for (const auto& [k, v] : a->items()) {
      if (!v.is_boolean()) throw fail("attribute '" + k + "' must be a boolean");
      r.attributes[k] = v.get<bool>();
    }
  }
  const auto layers = j.find("layers");
  if (layers == j.end() || !layers->is_array()) throw fail("field 'layers' must be an array");
  for (const auto& layer : *layers) {
    if (!layer.is_object() || !layer.contains("layer_id") || !layer["layer_id"].is_number_integer())
      throw fail("layer entry needs an integer 'layer_id'");
    const int id = layer["layer_id"].get<int>();
    if (id < 1 || id > profile.num_layers())
      throw fail("layer " + std::to_string(id) + " outside [1, " + std::to_string(profile.num_layers()) + "]");
    if (r.loads.contains(id)) throw fail("layer " + std::to_string(id) + " listed twice");
    const auto loads = layer.find("loads");
    if (loads == layer.end() || !loads->is_array()) throw fail("layer " + std::to_string(id) + " needs a 'loads' array");
    if (static_cast<int>(loads->size()) != profile.experts(id))
      throw fail("layer " + std::to_string(id) + " has " + std::to_string(loads->size()) + " loads, profile expects " +
                 std::to_string(profile.experts(id)));
    auto& out = r.loads[id];
    for (std::size_t e = 0; e < loads->size(); ++e) {
      const auto& v = (*loads)[e];
      if (!v.is_number()) throw fail("layer " + std::to_string(id) + " load " + std::to_string(e) + " is not a number");
      const double x = v.get<double>();
      if (!(x >= 0.0) || !std::isfinite(x))
        throw fail("layer " + std::to_string(id) + " load " + std::to_string(e) + " must be finite and non-negative");
      out[static_cast<int>(e)] = x;
    }
  }
  return r;
}

std::vector<TelemetryRecord> parse_telemetry(std::istream& in, const DeploymentProfile& profile) {
  std::vector<TelemetryRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), number);
    }
    out.push_back(telemetry_from_json(j, profile, number));
  }
  return out;
}

std::vector<TelemetryRecord> read_telemetry(const std::filesystem::path& path, const DeploymentProfile& profile) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open telemetry file '" + path.string() + "'");
  return parse_telemetry(in, profile);
}

std::string format_telemetry(const std::vector<TelemetryRecord>& records, const DeploymentProfile& profile) {
  std::string out;
  for (const auto& r : records) {
    out += telemetry_to_json(r, profile).dump();
    out += '\n';
  }
  return out;
}

void write_telemetry(const std::filesystem::path& path, const std::vector<TelemetryRecord>& records,
                     const DeploymentProfile& profile) {
  write_file_atomic(path, format_telemetry(records, profile));
}

Json profile_to_json(const DeploymentProfile& p) {
  return {{"profile_id", p.profile_id},
          {"experts_per_layer", p.experts_per_layer},
          {"top_k_per_layer", p.top_k_per_layer},
          {"eps_cov", p.eps_cov},
          {"thread_scale", p.thread_scale},
          {"thread_noise_std", p.thread_noise_std}};
}

DeploymentProfile profile_from_json(const Json& j) {
  DeploymentProfile p;
  try {
    p.profile_id = j.at("profile_id").get<std::string>();
    p.experts_per_layer = j.at("experts_per_layer").get<std::vector<int>>();
    p.top_k_per_layer = j.at("top_k_per_layer").get<std::vector<int>>();
    p.eps_cov = get_or(j, "eps_cov", p.eps_cov);
    p.thread_scale = get_or(j, "thread_scale", p.thread_scale);
    p.thread_noise_std = get_or(j, "thread_noise_std", p.thread_noise_std);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid profile: ") + e.what());
  }
  p.validate();
  return p;
}

Json bundle_to_json(const DetectorBundle& b) {
  Json keys = Json::array();
  for (const auto& k : b.transform.keys) keys.push_back(k.to_string());
  std::vector<long long> columns(b.transform.columns.begin(), b.transform.columns.end());
  return {
      {"format", "routescan.detector_bundle/1"},
      {"provenance", {{"config_hash", b.provenance.config_hash}, {"seed", b.provenance.seed}}},
      {"profile_id", b.transform.profile_id},
      {"transform",
       {{"support_keys", keys},
        {"columns", columns},
        {"divisors", vec_json(b.transform.divisors)},
        {"weights", vec_json(b.transform.weights)}}},
      {"detector",
       {{"coef", vec_json(b.model.coef)},
        {"intercept", b.model.intercept},
        {"inverse_strength", b.model.inverse_strength},
        {"iterations", b.model.iterations},
        {"converged", b.model.converged},
        {"gradient_norm", b.model.gradient_norm}}},
      {"regularization",
       {{"reference_strength", b.reference_strength},
        {"benign_mean", b.margin_stats.benign_mean},
        {"subset_names", b.subset_names},
        {"subset_means", b.margin_stats.subset_means},
        {"separation", b.margin_stats.separation},
        {"disparity", b.margin_stats.disparity}}},
      {"calibration",
       {{"slope", b.calibration.slope},
        {"offset", b.calibration.offset},
        {"identity_fallback", b.calibration.identity_fallback}}},
  };
}

DetectorBundle bundle_from_json(const Json& j) {
  DetectorBundle b;
  try {
    if (j.at("format") != "routescan.detector_bundle/1") throw ParseError("unsupported bundle format");
    b.provenance.config_hash = j.at("provenance").at("config_hash").get<std::string>();
    b.provenance.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    b.transform.profile_id = j.at("profile_id").get<std::string>();
    const auto& t = j.at("transform");
    for (const auto& k : t.at("support_keys")) b.transform.keys.push_back(FeatureKey::parse(k.get<std::string>()));
    for (const auto& c : t.at("columns")) b.transform.columns.push_back(c.get<Eigen::Index>());
    b.transform.divisors = vec_from(t.at("divisors"));
    b.transform.weights = vec_from(t.at("weights"));
    const auto& d = j.at("detector");
    b.model.coef = vec_from(d.at("coef"));
    b.model.intercept = d.at("intercept").get<double>();
    b.model.inverse_strength = d.at("inverse_strength").get<double>();
    b.model.iterations = d.at("iterations").get<int>();
    b.model.converged = d.at("converged").get<bool>();
    b.model.gradient_norm = d.at("gradient_norm").get<double>();
    const auto& r = j.at("regularization");
    b.reference_strength = r.at("reference_strength").get<double>();
    b.margin_stats.benign_mean = r.at("benign_mean").get<double>();
    b.subset_names = r.at("subset_names").get<std::vector<std::string>>();
    b.margin_stats.subset_means = r.at("subset_means").get<std::vector<double>>();
    b.margin_stats.separation = r.at("separation").get<double>();
    b.margin_stats.disparity = r.at("disparity").get<double>();
    const auto& c = j.at("calibration");
    b.calibration = {c.at("slope").get<double>(), c.at("offset").get<double>(), c.at("identity_fallback").get<bool>()};
  } catch (const Json::exception& e) {
    throw ParseError(std::string("invalid detector bundle: ") + e.what());
  }
  const auto k = static_cast<Eigen::Index>(b.transform.keys.size());
  if (static_cast<Eigen::Index>(b.transform.columns.size()) != k || b.transform.divisors.size() != k ||
      b.transform.weights.size() != k || b.model.coef.size() != k)
    throw ParseError("detector bundle arrays disagree on support size");
  return b;
}

Json selector_report(const SelectorResult& r, const SelectorConfig& config, const std::string& config_hash) {
  std::set<Eigen::Index> chosen(r.selection.indices.begin(), r.selection.indices.end());
  Json dims = Json::array();
  const auto& s = r.scores;
  for (std::size_t j = 0; j < r.keys.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    dims.push_back({{"key", r.keys[j].to_string()},
                    {"pooled_gap", r.stats.pooled_gap(i)},
                    {"direction", r.stats.direction(i)},
                    {"sign_consistency", r.stats.sign_consistency(i)},
                    {"gap_std", r.stats.gap_std(i)},
                    {"domain_std", r.stats.domain_std(i)},
                    {"invariance", s.invariance(i)},
                    {"auc_score", s.auc(i)},
                    {"bootstrap_stability", s.stability(i)},
                    {"m_disc", s.disc(i)},
                    {"m_cons", s.cons(i)},
                    {"layer_prior", s.layer_prior(i)},
                    {"edge_penalty", s.edge_penalty(i)},
                    {"m_prior", s.prior(i)},
                    {"rho", s.rho(i)},
                    {"rho_tilde", s.rho_tilde(i)},
                    {"mass", s.mass(i)},
                    {"selected", chosen.contains(i)},
                    {"weight", r.weights(i)}});
  }
  Json support = Json::array();
  for (const auto& k : r.selection.keys) support.push_back(k.to_string());
  return {{"format", "routescan.selector_report/1"},
          {"config_hash", config_hash},
          {"seed", config.seed},
          {"benchmarks", r.stats.benchmarks},
          {"diffuseness", r.selection.diffuseness},
          {"target_mass", r.selection.target_mass},
          {"cumulative_mass", r.selection.cumulative_mass},
          {"positive_count", r.selection.positive_count},
          {"support", support},
          {"dimensions", dims}};
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace routescan

#include "coadapt/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace coadapt {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfig, field + ": " + what, field);
}

// Typed access to one JSON object; finish() rejects keys nobody read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "config" : path_, "must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      const json& v = j_.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) config_error(field(key), "must be a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) config_error(field(key), "must be an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
            config_error(field(key), "must be non-negative");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) config_error(field(key), "must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) config_error(field(key), "must be a string");
      }
      return v.get<T>();
    } catch (const json::exception&) {
      config_error(field(key), "has the wrong type");
    }
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) config_error(field(key), "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) config_error(field(key), "must contain only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) config_error(field(key), "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) config_error(field(key), "must contain only strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) config_error(field(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

HumanModelKind parse_kind(const std::string& name, const std::string& field) {
  if (name == "bam") return HumanModelKind::kBam;
  if (name == "best-response") return HumanModelKind::kBestResponse;
  if (name == "fixed") return HumanModelKind::kFixed;
  config_error(field, "unknown human model '" + name + "' (bam | best-response | fixed)");
}

void check_condition(const std::string& condition, const std::string& field) {
  const auto& names = condition_names();
  if (std::find(names.begin(), names.end(), condition) == names.end())
    throw Error(ErrorCode::kBadCondition, field + ": unknown condition '" + condition + "'", field);
}

}  // namespace

AppConfig parse_config(const nlohmann::json& document) {
  AppConfig c;
  c.document = document;
  Section top(document, "");
  if (!top.has("env")) config_error("env", "is required");
  c.env = top.get<std::string>("env", "");
  if (top.has("params")) {
    c.params = top.raw("params");
    if (!c.params.is_object()) config_error("params", "must be a JSON object");
  }
  c.horizon = top.get<int>("horizon", 10);
  if (c.horizon < 1) config_error("horizon", "must be >= 1");
  c.seed = top.get<std::uint64_t>("seed", 0);

  if (top.has("human_model")) {
    Section s(top.raw("human_model"), "human_model");
    if (s.has("model")) c.human.kind = parse_kind(s.get<std::string>("model", ""), "human_model.model");
    const int k = s.get<int>("k", 1);
    if (k < 1) config_error("human_model.k", "must be >= 1");
    c.human.k = static_cast<std::size_t>(k);
    if (s.has("alpha_grid")) c.human.alpha_grid = s.numbers("alpha_grid");
    c.human.eps_learn = s.get<double>("eps_learn", 0.0);
    c.human.eps_plan = s.get<double>("eps_plan", 0.01);
    if (s.has("fixed_types")) c.human.fixed_types = s.strings("fixed_types");
    s.finish();
  }

  if (top.has("planner")) {
    Section s(top.raw("planner"), "planner");
    if (s.has("prior")) {
      const json& p = s.raw("prior");
      if (p.is_string()) {
        if (p.get<std::string>() != "uniform") config_error("planner.prior", "must be \"uniform\" or an array");
      } else {
        c.prior = s.numbers("prior");
      }
    }
    c.planner.belief_cap = s.get<std::size_t>("belief_cap", c.planner.belief_cap);
    const auto zl = s.get<std::string>("zero_likelihood", "raise");
    if (zl == "raise") c.planner.update.on_zero = ZeroLikelihoodPolicy::kRaise;
    else if (zl == "smooth") c.planner.update.on_zero = ZeroLikelihoodPolicy::kSmooth;
    else config_error("planner.zero_likelihood", "must be \"raise\" or \"smooth\"");
    c.condition = s.get<std::string>("condition", c.condition);
    check_condition(c.condition, "planner.condition");
    s.finish();
  }

  if (top.has("simulate")) {
    Section s(top.raw("simulate"), "simulate");
    c.simulate.condition = s.get<std::string>("condition", c.simulate.condition);
    check_condition(c.simulate.condition, "simulate.condition");
    c.simulate.episodes = s.get<std::size_t>("episodes", 1);
    if (c.simulate.episodes < 1) config_error("simulate.episodes", "must be >= 1");
    if (s.has("type")) c.simulate.type = s.get<int>("type", 0);
    s.finish();
  }

  if (top.has("population")) {
    Section s(top.raw("population"), "population");
    if (s.has("conditions")) {
      c.population.conditions = s.strings("conditions");
      for (const auto& cond : c.population.conditions) check_condition(cond, "population.conditions");
    }
    if (s.has("mixture")) c.population.mixture = s.numbers("mixture");
    c.population.episodes = s.get<std::size_t>("episodes", c.population.episodes);
    if (c.population.episodes < 1) config_error("population.episodes", "must be >= 1");
    c.population.keep_traces = s.get<bool>("traces", true);
    s.finish();
  }

  if (top.has("crosstrain")) {
    Section s(top.raw("crosstrain"), "crosstrain");
    c.crosstrain.rounds = s.get<int>("rounds", c.crosstrain.rounds);
    c.crosstrain.true_preference = s.get<int>("true_preference", c.crosstrain.true_preference);
    c.crosstrain.human_noise = s.get<double>("human_noise", c.crosstrain.human_noise);
    c.crosstrain.fit_noise = s.get<double>("fit_noise", c.crosstrain.fit_noise);
    s.finish();
  }

  if (top.has("cluster")) {
    Section s(top.raw("cluster"), "cluster");
    c.cluster.k = s.get<int>("k", c.cluster.k);
    c.cluster.per_type = s.get<int>("per_type", c.cluster.per_type);
    c.cluster.restarts = s.get<int>("restarts", c.cluster.restarts);
    c.cluster.fit_noise = s.get<double>("fit_noise", c.cluster.fit_noise);
    c.cluster.held_out = s.get<std::size_t>("held_out", c.cluster.held_out);
    c.cluster.demos = s.get<std::string>("demos", "");
    if (c.cluster.k < 1) config_error("cluster.k", "must be >= 1");
    if (c.cluster.per_type < 1) config_error("cluster.per_type", "must be >= 1");
    s.finish();
  }

  if (top.has("server")) {
    Section s(top.raw("server"), "server");
    c.server.host = s.get<std::string>("host", c.server.host);
    c.server.port = s.get<int>("port", c.server.port);
    c.server.idle_timeout_s = s.get<int>("idle_timeout_s", c.server.idle_timeout_s);
    c.server.cors_origin = s.get<std::string>("cors_origin", c.server.cors_origin);
    if (c.server.port < 0 || c.server.port > 65535) config_error("server.port", "must lie in [0, 65535]");
    if (c.server.idle_timeout_s < 1) config_error("server.idle_timeout_s", "must be >= 1");
    s.finish();
  }
  top.finish();
  return c;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + path, "config");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path + ": malformed JSON (" + e.what() + ")", "config");
  }
}

void apply_override(nlohmann::json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorCode::kConfig, "override '" + assignment + "' is not key=value", "--set");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  if (!document.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object", "config");
  nlohmann::json* node = &document;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::kConfig, "override key '" + key + "' has an empty segment", "--set");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    nlohmann::json& child = (*node)[part];
    if (child.is_null()) child = nlohmann::json::object();
    if (!child.is_object())
      throw Error(ErrorCode::kConfig, "override path '" + key + "' crosses a non-object", key.substr(0, dot));
    node = &child;
    start = dot + 1;
  }
}

GameModel build_model(const AppConfig& config) { return build_env(config.env, config.params, config.horizon, config.human); }

Belief prior_for(const AppConfig& config, const GameModel& model) {
  if (!config.prior) return Belief::uniform(model.types.size());
  if (config.prior->size() != model.types.size())
    throw Error(ErrorCode::kConfig,
                "planner.prior: has " + std::to_string(config.prior->size()) + " entries, the type space has " +
                    std::to_string(model.types.size()),
                "planner.prior");
  try {
    return Belief(*config.prior);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("planner.prior: ") + e.what(), "planner.prior");
  }
}

std::string config_hash(const nlohmann::json& document) {
  const std::string text = document.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace coadapt

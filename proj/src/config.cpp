// SPDX-License-Identifier: Apache-2.0
#include "acrag/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "acrag/errors.hpp"

namespace acrag {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double threshold_from(const json& value) {
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigurationError("bad threshold value: " + text);
  }
  return value.get<double>();
}

ordered_json threshold_json(double value) {
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  return value;
}

std::optional<std::string> env(const std::string& name) {
  if (const char* value = std::getenv(name.c_str()); value != nullptr && *value != '\0') return std::string(value);
  return std::nullopt;
}

std::string env_key(const std::string& backend_name) {
  std::string key;
  for (unsigned char c : backend_name) key += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  return key;
}

CheckConfig check_from(const json& j, CheckConfig fallback) {
  if (auto it = j.find("tokens"); it != j.end()) {
    const auto tokens = it->get<std::vector<std::string>>();
    try {
      fallback.tokens = AffirmativeSet(std::set<std::string, std::less<>>(tokens.begin(), tokens.end()));
    } catch (const InvalidArgument& e) {
      throw ConfigurationError(e.what());
    }
  }
  if (auto it = j.find("polarity"); it != j.end()) {
    try {
      fallback.polarity = check_polarity_from_string(it->get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigurationError(e.what());
    }
  }
  return fallback;
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

}  // namespace

EngineSettings parse_settings(std::string_view json_text, const std::filesystem::path& base_dir) {
  EngineSettings s;
  try {
    const auto j = json::parse(json_text);

    for (const auto& [name, b] : j.at("backends").items()) {
      BackendSpec spec;
      auto& d = spec.descriptor;
      d.name = name;
      d.endpoint = b.at("endpoint").get<std::string>();
      d.model_id = b.value("model", name);
      d.request_timeout = std::chrono::milliseconds(b.value("timeout_ms", 60'000));
      d.max_tokens = b.value("max_tokens", 64);
      d.temperature = b.value("temperature", 0.0);
      d.top_logprobs = b.value("top_logprobs", 5);
      d.api_key = b.value("api_key", "");
      if (auto v = env("ACRAG_BACKEND_" + env_key(name) + "_ENDPOINT")) d.endpoint = *v;
      if (auto v = env("ACRAG_BACKEND_" + env_key(name) + "_API_KEY")) {
        d.api_key = *v;
      } else if (auto fallback = env("ACRAG_API_KEY"); fallback && d.api_key.empty()) {
        d.api_key = *fallback;
      }
      if (d.is_scripted()) {
        if (!b.contains("script")) throw ConfigurationError("scripted backend " + name + " needs a \"script\" file");
        spec.script = resolve(base_dir, b.at("script").get<std::string>());
      }
      validate_descriptor(d);
      s.backends.emplace(name, std::move(spec));
    }

    const auto& roles = j.at("roles");
    s.detector_name = roles.at("detector").get<std::string>();
    s.resolver_name = roles.at("resolver").get<std::string>();
    for (const auto* role : {&s.detector_name, &s.resolver_name}) {
      if (!s.backends.contains(*role)) throw ConfigurationError("role refers to unknown backend '" + *role + "'");
    }
    s.engine.roles = {s.backends.at(s.detector_name).descriptor, s.backends.at(s.resolver_name).descriptor};

    if (auto it = j.find("thresholds"); it != j.end()) {
      auto& t = s.engine.thresholds;
      if (it->contains("delta1")) t.delta1 = threshold_from(it->at("delta1"));
      if (it->contains("delta4")) t.delta4 = threshold_from(it->at("delta4"));
      t.max_iterations = it->value("max_iterations", t.max_iterations);
      t.single_round = it->value("single_round", t.single_round);
    }
    if (auto it = j.find("pre_check"); it != j.end()) s.engine.pre_check = check_from(*it, s.engine.pre_check);
    if (auto it = j.find("post_check"); it != j.end()) s.engine.post_check = check_from(*it, s.engine.post_check);
    s.engine.top_k = j.value("top_k", 1);
    if (auto it = j.find("template_pack"); it != j.end() && !it->is_null())
      s.engine.template_pack = resolve(base_dir, it->get<std::string>());
    s.engine.system_prompt_seed = j.value("system_prompt_seed", std::size_t{0});
    s.engine.dedupe_terms = j.value("dedupe_terms", false);
    s.engine.few_shot_prefix = j.value("few_shot_prefix", "");
    if (auto it = j.find("score_log_base"); it != j.end() && !it->is_null())
      s.engine.score_log_base = it->get<double>();
    s.parallelism = std::max<std::size_t>(1, j.value("parallelism", std::size_t{1}));
    if (auto it = j.find("retry"); it != j.end()) {
      s.retry.max_retries = it->value("max_retries", s.retry.max_retries);
      s.retry.initial_backoff = std::chrono::milliseconds(it->value("initial_backoff_ms", 250));
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed engine config: ") + e.what());
  }
  validate_engine_config(s.engine);
  return s;
}

EngineSettings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_settings(buf.str(), path.parent_path());
}

std::string settings_to_json(const EngineSettings& s) {
  ordered_json j;
  ordered_json backends = ordered_json::object();
  for (const auto& [name, spec] : s.backends) {
    const auto& d = spec.descriptor;
    ordered_json b;
    b["endpoint"] = d.endpoint;
    b["model"] = d.model_id;
    b["timeout_ms"] = d.request_timeout.count();
    b["max_tokens"] = d.max_tokens;
    b["temperature"] = d.temperature;
    b["top_logprobs"] = d.top_logprobs;
    if (!d.api_key.empty()) b["api_key"] = "<redacted>";
    if (!spec.script.empty()) b["script"] = spec.script.string();
    backends[name] = b;
  }
  j["backends"] = backends;
  j["roles"] = {{"detector", s.detector_name}, {"resolver", s.resolver_name}};
  const auto& t = s.engine.thresholds;
  j["thresholds"] = {{"delta1", threshold_json(t.delta1)},
                     {"delta4", threshold_json(t.delta4)},
                     {"max_iterations", t.max_iterations},
                     {"single_round", t.single_round}};
  auto check = [](const CheckConfig& c) {
    return ordered_json{{"tokens", std::vector<std::string>(c.tokens.tokens().begin(), c.tokens.tokens().end())},
                        {"polarity", to_string(c.polarity)}};
  };
  j["pre_check"] = check(s.engine.pre_check);
  j["post_check"] = check(s.engine.post_check);
  j["top_k"] = s.engine.top_k;
  j["template_pack"] = s.engine.template_pack.string();
  j["system_prompt_seed"] = s.engine.system_prompt_seed;
  j["dedupe_terms"] = s.engine.dedupe_terms;
  j["few_shot_prefix"] = s.engine.few_shot_prefix;
  j["score_log_base"] = s.engine.score_log_base ? ordered_json(*s.engine.score_log_base) : ordered_json(nullptr);
  j["parallelism"] = s.parallelism;
  j["retry"] = {{"max_retries", s.retry.max_retries}, {"initial_backoff_ms", s.retry.initial_backoff.count()}};
  return j.dump(2);
}

BackendPool make_backends(const EngineSettings& settings) {
  BackendPool pool;
  for (const auto& [name, spec] : settings.backends) {
    if (spec.descriptor.is_scripted()) {
      pool.emplace(name, std::make_shared<ScriptedBackend>(spec.descriptor, ScriptedBehavior::from_file(spec.script)));
    } else {
      pool.emplace(name, std::make_shared<RemoteBackend>(spec.descriptor, nullptr, settings.retry));
    }
  }
  return pool;
}

Agents agents_for(const BackendPool& pool, const std::string& detector, const std::string& resolver) {
  auto find = [&](const std::string& name) {
    auto it = pool.find(name);
    if (it == pool.end()) throw ConfigurationError("unknown backend '" + name + "'");
    return it->second;
  };
  auto d = find(detector);
  auto r = find(resolver);
  return {std::move(d), std::move(r)};
}

}  // namespace acrag

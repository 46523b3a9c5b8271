// SPDX-License-Identifier: Apache-2.0
#include "acrag/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "acrag/errors.hpp"

namespace acrag {

using nlohmann::json;

void validate_descriptor(const BackendDescriptor& d) {
  if (d.name.empty()) throw ConfigurationError("backend name must not be empty");
  if (d.endpoint.empty()) throw ConfigurationError("backend " + d.name + ": endpoint must not be empty");
  if (d.top_logprobs < 1) throw ConfigurationError("backend " + d.name + ": top_logprobs must be >= 1");
  if (!(d.temperature >= 0.0)) throw ConfigurationError("backend " + d.name + ": temperature must be >= 0");
  if (d.max_tokens < 1) throw ConfigurationError("backend " + d.name + ": max_tokens must be >= 1");
  if (d.request_timeout.count() <= 0) throw ConfigurationError("backend " + d.name + ": timeout must be positive");
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

void validate_completion(const CompletionResult& result) {
  for (std::size_t pos = 0; pos < result.token_logprobs.size(); ++pos) {
    double mass = 0.0;
    for (const auto& [token, logprob] : result.token_logprobs[pos]) {
      if (std::isnan(logprob) || logprob > 0.0) {
        throw ProtocolError("position " + std::to_string(pos) + ": log-probability of '" + token +
                            "' is not <= 0");
      }
      mass += std::exp(logprob);
    }
    if (mass > 1.0 + kProbabilityMassEpsilon) {
      throw ProtocolError("position " + std::to_string(pos) + ": probability mass exceeds 1");
    }
  }
}

TokenLogprobs truncate_top(const TokenLogprobs& logprobs, int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= logprobs.size()) return logprobs;
  std::vector<std::pair<std::string, double>> ranked(logprobs.begin(), logprobs.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize(static_cast<std::size_t>(k));
  return {ranked.begin(), ranked.end()};
}

TokenLogprobs first_position_logprobs(const CompletionResult& result) {
  if (result.token_logprobs.empty()) throw EmptyCompletionError("completion has no generated positions");
  return result.token_logprobs.front();
}

// ---------------------------------------------------------------------------
// Scripted adapter

bool ScriptedRule::matches(std::string_view prompt) const {
  for (const auto& needle : contains) {
    if (prompt.find(needle) == std::string_view::npos) return false;
  }
  if (pattern) {
    const std::regex re(*pattern, std::regex::ECMAScript);
    if (!std::regex_search(prompt.begin(), prompt.end(), re)) return false;
  }
  return true;
}

void ScriptedBehavior::validate() const {
  if (rules.empty() || !rules.back().is_catch_all())
    throw ConfigurationError("scripted behavior must end with a catch-all rule");
  for (const auto& rule : rules) {
    if (rule.pattern) {
      try {
        std::regex re(*rule.pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw ConfigurationError("bad scripted pattern '" + *rule.pattern + "': " + e.what());
      }
    }
    validate_completion({rule.response_text, {rule.first_position_logprobs}, FinishReason::stop});
  }
}

ScriptedBehavior ScriptedBehavior::from_json_text(std::string_view text) {
  ScriptedBehavior behavior;
  try {
    const auto j = json::parse(text);
    for (const auto& r : j.at("rules")) {
      ScriptedRule rule;
      if (auto it = r.find("contains"); it != r.end()) {
        if (it->is_string()) {
          rule.contains.push_back(it->get<std::string>());
        } else {
          rule.contains = it->get<std::vector<std::string>>();
        }
      }
      if (auto it = r.find("pattern"); it != r.end()) rule.pattern = it->get<std::string>();
      rule.response_text = r.value("response", "");
      if (auto it = r.find("logprobs"); it != r.end()) rule.first_position_logprobs = it->get<TokenLogprobs>();
      behavior.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed scripted behavior: ") + e.what());
  } catch (const ProtocolError& e) {
    throw ConfigurationError(std::string("scripted behavior: ") + e.what());
  }
  try {
    behavior.validate();
  } catch (const ProtocolError& e) {
    throw ConfigurationError(std::string("scripted behavior: ") + e.what());
  }
  return behavior;
}

ScriptedBehavior ScriptedBehavior::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open scripted behavior " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

ScriptedBackend::ScriptedBackend(BackendDescriptor descriptor, ScriptedBehavior behavior)
    : descriptor_(std::move(descriptor)), behavior_(std::move(behavior)) {
  validate_descriptor(descriptor_);
}

CompletionResult ScriptedBackend::complete(std::string_view prompt) const {
  if (prompt.empty()) throw InvalidArgument("complete: prompt must not be empty");
  {
    std::lock_guard lock(log_mutex_);
    prompts_.emplace_back(prompt);
  }
  for (const auto& rule : behavior_.rules) {
    if (!rule.matches(prompt)) continue;
    CompletionResult result;
    result.text = rule.response_text;
    if (!rule.first_position_logprobs.empty())
      result.token_logprobs.push_back(truncate_top(rule.first_position_logprobs, descriptor_.top_logprobs));
    result.finish_reason = FinishReason::stop;
    return result;
  }
  throw ConfigurationError("backend " + descriptor_.name + ": no scripted rule matched the prompt");
}

std::vector<std::string> ScriptedBackend::prompts() const {
  std::lock_guard lock(log_mutex_);
  return prompts_;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(log_mutex_);
  return prompts_.size();
}

// ---------------------------------------------------------------------------
// Remote adapter

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigurationError("endpoint is not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

FinishReason finish_reason_from(const json& value) {
  if (!value.is_string()) return FinishReason::stop;
  const auto text = value.get<std::string>();
  if (text == "stop" || text == "eos") return FinishReason::stop;
  if (text == "length") return FinishReason::length;
  return FinishReason::error;
}

}  // namespace

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::string& bearer_token, std::chrono::milliseconds timeout) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!bearer_token.empty()) client.set_bearer_token_auth(bearer_token);
  auto res = client.Post(parts.path, body, "application/json");
  if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

RemoteBackend::RemoteBackend(BackendDescriptor descriptor, std::shared_ptr<HttpTransport> transport,
                             RetryPolicy retry)
    : descriptor_(std::move(descriptor)), transport_(std::move(transport)), retry_(retry) {
  validate_descriptor(descriptor_);
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
}

std::string RemoteBackend::build_request_body(const BackendDescriptor& descriptor, std::string_view prompt) {
  json body;
  body["model"] = descriptor.model_id;
  body["prompt"] = prompt;
  body["max_tokens"] = descriptor.max_tokens;
  body["temperature"] = descriptor.temperature;
  body["logprobs"] = descriptor.top_logprobs;
  return body.dump();
}

CompletionResult RemoteBackend::parse_response_body(std::string_view body, int top_logprobs) {
  CompletionResult result;
  try {
    const auto j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    result.text = choice.at("text").get<std::string>();
    result.finish_reason = finish_reason_from(choice.value("finish_reason", json()));
    const auto& logprobs = choice.at("logprobs");
    if (!logprobs.is_object()) throw ProtocolError("response carries no logprobs object");
    const auto& top = logprobs.at("top_logprobs");
    if (!top.is_array()) throw ProtocolError("logprobs.top_logprobs must be an array");
    for (const auto& position : top) {
      if (!position.is_object()) throw ProtocolError("top_logprobs entries must be objects");
      TokenLogprobs map;
      for (const auto& [token, value] : position.items()) {
        if (!value.is_number()) throw ProtocolError("log-probability of '" + token + "' is not a number");
        map.emplace(token, value.get<double>());
      }
      result.token_logprobs.push_back(truncate_top(map, top_logprobs));
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed completion reply: ") + e.what());
  }
  validate_completion(result);
  return result;
}

CompletionResult RemoteBackend::complete(std::string_view prompt) const {
  if (prompt.empty()) throw InvalidArgument("complete: prompt must not be empty");
  const auto body = build_request_body(descriptor_, prompt);
  auto backoff = retry_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      const auto response = transport_->post(descriptor_.endpoint, body, descriptor_.api_key,
                                             descriptor_.request_timeout);
      if (response.status == 429 || response.status >= 500)
        throw TransportError("backend " + descriptor_.name + " returned HTTP " + std::to_string(response.status));
      if (response.status != 200)
        throw ProtocolError("backend " + descriptor_.name + " returned HTTP " + std::to_string(response.status));
      return parse_response_body(response.body, descriptor_.top_logprobs);
    } catch (const TransportError&) {
      if (attempt >= retry_.max_retries) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

}  // namespace acrag

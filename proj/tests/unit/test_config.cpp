// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "acrag/config.hpp"
#include "acrag/errors.hpp"
#include "scenarios.hpp"

using namespace acrag;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "backends": {
    "base": {"endpoint": "http://localhost:9000/v1/completions", "model": "llama-3-8b", "top_logprobs": 5},
    "ft": {"endpoint": "scripted", "script": "ft.json"}
  },
  "roles": {"detector": "base", "resolver": "ft"},
  "thresholds": {"delta1": -1.5, "delta4": "-inf", "max_iterations": 2},
  "post_check": {"tokens": ["No"], "polarity": "affirmative_means_stop"},
  "top_k": 3,
  "system_prompt_seed": 4,
  "parallelism": 8,
  "retry": {"max_retries": 1, "initial_backoff_ms": 10}
})";

}  // namespace

TEST_CASE("settings parse with defaults and path resolution") {
  const auto s = parse_settings(kConfig, "/cfg");
  CHECK(s.detector_name == "base");
  CHECK(s.resolver_name == "ft");
  CHECK(s.engine.roles.detector.model_id == "llama-3-8b");
  CHECK(s.engine.roles.resolver.is_scripted());
  CHECK(s.backends.at("ft").script == fs::path("/cfg/ft.json"));
  CHECK(s.engine.thresholds.delta1 == -1.5);
  CHECK(std::isinf(s.engine.thresholds.delta4));
  CHECK(s.engine.thresholds.max_iterations == 2);
  CHECK_FALSE(s.engine.thresholds.single_round);
  CHECK(s.engine.pre_check.tokens == AffirmativeSet::default_affirmative());
  CHECK(s.engine.post_check.tokens == AffirmativeSet{"No"});
  CHECK(s.engine.post_check.polarity == CheckPolarity::affirmative_means_stop);
  CHECK(s.engine.top_k == 3);
  CHECK(s.engine.system_prompt_seed == 4);
  CHECK(s.parallelism == 8);
  CHECK(s.retry.max_retries == 1);
  CHECK(s.retry.initial_backoff == std::chrono::milliseconds(10));
}

TEST_CASE("resolved settings serialize and re-parse") {
  const auto s = parse_settings(kConfig, "/cfg");
  const auto text = settings_to_json(s);
  const auto again = parse_settings(text, "");
  CHECK(again.engine.thresholds == s.engine.thresholds);
  CHECK(again.engine.post_check.tokens == s.engine.post_check.tokens);
  CHECK(again.backends.at("ft").script == s.backends.at("ft").script);
  CHECK(nlohmann::json::parse(text)["thresholds"]["delta4"] == "-inf");
}

TEST_CASE("environment overrides endpoint and key; keys are redacted") {
  ::setenv("ACRAG_BACKEND_BASE_ENDPOINT", "http://override:1/v1/completions", 1);
  ::setenv("ACRAG_API_KEY", "fallback-key", 1);
  const auto s = parse_settings(kConfig, "");
  ::unsetenv("ACRAG_BACKEND_BASE_ENDPOINT");
  ::unsetenv("ACRAG_API_KEY");
  CHECK(s.engine.roles.detector.endpoint == "http://override:1/v1/completions");
  CHECK(s.engine.roles.detector.api_key == "fallback-key");
  const auto text = settings_to_json(s);
  CHECK(text.find("fallback-key") == std::string::npos);
  CHECK(text.find("<redacted>") != std::string::npos);
}

TEST_CASE("invalid configurations") {
  auto bad = [](const std::string& patch) {
    auto j = nlohmann::json::parse(kConfig);
    j.merge_patch(nlohmann::json::parse(patch));
    return j.dump();
  };
  CHECK_THROWS_AS(parse_settings("{", ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"roles": {"detector": "nope"}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"thresholds": {"delta1": "low"}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"thresholds": {"max_iterations": -1}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"top_k": 0})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"pre_check": {"tokens": []}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"pre_check": {"polarity": "up"}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"backends": {"ft": {"script": null}}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(parse_settings(bad(R"({"backends": {"base": {"top_logprobs": 0}}})"), ""), ConfigurationError);
  CHECK_THROWS_AS(load_settings("/nonexistent/config.json"), ConfigurationError);
}

TEST_CASE("backend pool and role lookup") {
  const auto dir = fs::temp_directory_path() / "acrag_config_pool";
  fs::remove_all(dir);
  fs::create_directories(dir);
  testing::write_file((dir / "ft.json").string(), R"({"rules": [{"response": "B"}]})");
  testing::write_file((dir / "engine.json").string(), kConfig);
  const auto s = load_settings(dir / "engine.json");
  const auto pool = make_backends(s);
  CHECK(pool.size() == 2);
  CHECK(pool.at("ft")->complete("anything").text == "B");
  const auto agents = agents_for(pool, "ft", "base");
  CHECK(agents.detector->descriptor().name == "ft");
  CHECK_THROWS_AS(agents_for(pool, "ft", "missing"), ConfigurationError);
}

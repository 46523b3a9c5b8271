// SPDX-License-Identifier: Apache-2.0
#pragma once

// The declarative engine configuration file (JSON).
//
//   {
//     "backends": {"base": {"endpoint": "http://host:8080/v1/completions",
//                           "model": "llama-3-8b", "top_logprobs": 5, ...},
//                  "ft":   {"endpoint": "scripted", "script": "ft.json"}},
//     "roles": {"detector": "base", "resolver": "ft"},
//     "thresholds": {"delta1": -2.0, "delta4": -3.0, "max_iterations": 3,
//                    "single_round": false},
//     "pre_check":  {"tokens": ["yes", "Yes", " yes", " Yes"],
//                    "polarity": "affirmative_means_proceed"},
//     "post_check": {"tokens": ["no", "No", " no", " No"],
//                    "polarity": "affirmative_means_proceed"},
//     "top_k": 1, "template_pack": "templates/medical",
//     "system_prompt_seed": 0, "dedupe_terms": false, "few_shot_prefix": "",
//     "score_log_base": null, "parallelism": 4,
//     "retry": {"max_retries": 2, "initial_backoff_ms": 250}
//   }
//
// Relative paths resolve against the config file's directory. Thresholds may
// be written as "-inf". ACRAG_BACKEND_<NAME>_ENDPOINT and
// ACRAG_BACKEND_<NAME>_API_KEY (NAME upper-cased) override a backend's
// endpoint and key; ACRAG_API_KEY is the fallback key for every backend.

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "acrag/llm_gateway.hpp"
#include "acrag/orchestrator.hpp"

namespace acrag {

struct BackendSpec {
  BackendDescriptor descriptor;
  std::filesystem::path script;  // scripted backends only
};

struct EngineSettings {
  std::map<std::string, BackendSpec> backends;
  std::string detector_name;
  std::string resolver_name;
  EngineConfig engine;
  std::size_t parallelism = 1;
  RetryPolicy retry;
};

// Throws ConfigurationError on a malformed or inconsistent config.
EngineSettings load_settings(const std::filesystem::path& path);
EngineSettings parse_settings(std::string_view json_text, const std::filesystem::path& base_dir);

// Resolved configuration as pretty-printed JSON (API keys redacted).
std::string settings_to_json(const EngineSettings& settings);

using BackendPool = std::map<std::string, std::shared_ptr<const CompletionBackend>>;

// One backend instance per catalog entry.
BackendPool make_backends(const EngineSettings& settings);

// Resolves named roles against the pool. Throws ConfigurationError on an
// unknown name.
Agents agents_for(const BackendPool& pool, const std::string& detector, const std::string& resolver);

}  // namespace acrag

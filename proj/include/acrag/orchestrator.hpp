// SPDX-License-Identifier: Apache-2.0
#pragma once

// The moderator. One session runs Pre-Check on the Detector, then up to N
// rounds of
//
//   dissect (Detector) -> preliminary explanation (Resolver) -> retrieve
//   -> integrate summary (Resolver) -> memory append -> Post-Check (Detector)
//
// and finally asks the Resolver for the answer with whatever memory was
// gathered. Every phase is appended to a SessionTrace.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "acrag/adaptive_retrieval.hpp"
#include "acrag/core_model.hpp"
#include "acrag/errors.hpp"
#include "acrag/knowledge_base.hpp"
#include "acrag/llm_gateway.hpp"
#include "acrag/prompt_registry.hpp"

namespace acrag {

struct AgentRoles {
  BackendDescriptor detector;
  BackendDescriptor resolver;
};

struct CheckConfig {
  AffirmativeSet tokens;
  CheckPolarity polarity = CheckPolarity::affirmative_means_proceed;
};

struct EngineConfig {
  AgentRoles roles;
  Thresholds thresholds;
  CheckConfig pre_check{AffirmativeSet::default_affirmative(), CheckPolarity::affirmative_means_proceed};
  // "no" at Post-Check means the summary is not sufficient, i.e. another
  // round is requested.
  CheckConfig post_check{AffirmativeSet::default_negative(), CheckPolarity::affirmative_means_proceed};
  int top_k = 1;
  std::filesystem::path template_pack;  // empty selects the bundled pack
  std::size_t system_prompt_seed = 0;
  // A repeated dissected term ends the loop instead of being appended again.
  bool dedupe_terms = false;
  // Prepended to the final QA prompt (few-shot exemplars).
  std::string few_shot_prefix;
  // Scores are natural-log unless a base is given here.
  std::optional<double> score_log_base;
};

// Throws ConfigurationError on top_k < 1, bad thresholds, or bad log base.
void validate_engine_config(const EngineConfig& config);

struct Agents {
  std::shared_ptr<const CompletionBackend> detector;
  std::shared_ptr<const CompletionBackend> resolver;
};

struct SessionResult {
  Answer answer;
  SessionTrace trace;
  Memory memory;
};

// A backend, embedding, or index failure inside a session. Carries the trace
// recorded up to the failure.
class SessionError : public Error {
 public:
  SessionError(std::string message, SessionTrace partial)
      : Error(std::move(message)), partial_(std::move(partial)) {}

  const SessionTrace& partial_trace() const noexcept { return partial_; }

 private:
  SessionTrace partial_;
};

// The Detector produced no usable term.
class DissectionError : public Error {
 public:
  using Error::Error;
};

class Engine {
 public:
  // The retriever must outlive the engine.
  Engine(EngineConfig config, Agents agents, PromptRegistry prompts, const Retriever& retriever);

  // Throws SessionError (backend failure after retries) or
  // ConfigurationError (template or scripted-rule problems).
  SessionResult run_session(const Task& task) const;

  // Single phases, usable on their own. None of them records a trace.
  std::string dissect(const Task& task, const Memory& memory) const;
  std::string retrieve_and_integrate(const std::string& term) const;
  Answer final_answer(const Task& task, const Memory& memory) const;

  // The prompt final_answer would send.
  std::string final_prompt(const Task& task, const Memory& memory, std::size_t call_index) const;

  const EngineConfig& config() const noexcept { return config_; }
  const PromptRegistry& prompts() const noexcept { return prompts_; }

 private:
  class Session;

  EngineConfig config_;
  Agents agents_;
  PromptRegistry prompts_;
  const Retriever& retriever_;
};

// Loads config.template_pack, or the bundled pack when it is empty.
PromptRegistry load_prompts(const EngineConfig& config);

}  // namespace acrag

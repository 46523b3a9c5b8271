// SPDX-License-Identifier: Apache-2.0
#include "acrag/orchestrator.hpp"

#include <cmath>

#include "acrag/answer_parser.hpp"

namespace acrag {

void validate_engine_config(const EngineConfig& config) {
  if (config.top_k < 1) throw ConfigurationError("top_k must be >= 1");
  try {
    validate_thresholds(config.thresholds);
    validate_descriptor(config.roles.detector);
    validate_descriptor(config.roles.resolver);
  } catch (const InvalidArgument& e) {
    throw ConfigurationError(e.what());
  }
  if (config.score_log_base && !(*config.score_log_base > 0.0 && *config.score_log_base != 1.0))
    throw ConfigurationError("score_log_base must be positive and not 1");
}

PromptRegistry load_prompts(const EngineConfig& config) {
  return config.template_pack.empty() ? PromptRegistry::load_default() : PromptRegistry::load(config.template_pack);
}

namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

// The dissect prompt ends mid-sentence ("...hard to understand is:"), so the
// completion is the term itself. Models that echo the prompt are handled by
// cutting after the last echo; only the first non-blank line is kept.
std::string extract_term(std::string_view completion) {
  constexpr std::string_view echo = "hard to understand is:";
  if (auto pos = completion.rfind(echo); pos != std::string_view::npos) completion.remove_prefix(pos + echo.size());
  std::size_t start = 0;
  while (start <= completion.size()) {
    const auto end = completion.find('\n', start);
    auto line = trim(completion.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!line.empty()) return line;
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return {};
}

TemplateVars task_vars(const Task& task) {
  TemplateVars vars{{"question", task.question}};
  if (task.kind == TaskKind::multiple_choice) {
    vars["options"] = render_options(task);
  } else {
    vars["context"] = task.context.value_or("");
  }
  return vars;
}

bool is_mcq(const Task& task) { return task.kind == TaskKind::multiple_choice; }

std::string exchange_payload(std::string_view prompt, std::string_view completion) {
  std::string payload(prompt);
  payload += "\n\x1e\n";
  payload += completion;
  return payload;
}

}  // namespace

// Per-session state: the trace under construction and the system prompt
// counter.
class Engine::Session {
 public:
  Session(const Engine& engine, const Task& task)
      : engine_(engine), task_(task), call_index_(engine.config_.system_prompt_seed) {
    trace_.task_id = task.id;
  }

  SessionResult run() {
    const auto& cfg = engine_.config_;
    try {
      Memory memory;
      if (run_pre_check() == PreCheckDecision::retrieve) {
        for (int k = 1; k <= cfg.thresholds.max_iterations; ++k) {
          std::string term;
          try {
            term = dissect(memory, k);
          } catch (const DissectionError&) {
            break;
          }
          memory = memory_append(memory, term, retrieve_and_integrate(term, k));
          if (run_post_check(memory.entries().back().summary, k) == PostCheckDecision::stop) break;
        }
      }
      Answer answer = final_answer(memory, true);
      return {std::move(answer), std::move(trace_), std::move(memory)};
    } catch (const ConfigurationError&) {
      throw;
    } catch (const SessionError&) {
      throw;
    } catch (const Error& e) {
      throw SessionError("task " + task_.id + ": " + e.what(), trace_);
    }
  }

  std::string dissect(const Memory& memory, int k) {
    auto vars = task_vars(task_);
    vars["memory"] = memory_render(memory);
    const auto prompt =
        engine_.prompts_.render(is_mcq(task_) ? TemplateId::dissect_mcq : TemplateId::dissect_yesno, vars);
    const auto reply = engine_.agents_.detector->complete(prompt);
    auto term = extract_term(reply.text);
    const bool repeated = engine_.config_.dedupe_terms && memory.contains_term(term);
    if (term.empty() || repeated) {
      record(Phase::dissect, k, exchange_payload(prompt, reply.text), std::nullopt, std::nullopt, Decision::stop);
      throw DissectionError(term.empty() ? "detector produced no term" : "detector repeated term '" + term + "'");
    }
    record(Phase::dissect, k, exchange_payload(prompt, reply.text));
    return term;
  }

  std::string retrieve_and_integrate(const std::string& term, int k) {
    if (term.empty()) throw InvalidArgument("retrieve_and_integrate: term must not be empty");
    const auto& resolver = *engine_.agents_.resolver;

    const auto explain_prompt = engine_.prompts_.render_extension("explain_term", {{"term", term}});
    const auto explanation = resolver.complete(explain_prompt);
    record(Phase::resolve_preliminary, k, exchange_payload(explain_prompt, explanation.text));

    auto query = trim(explanation.text);
    if (query.empty()) query = term;
    const auto hits = engine_.retriever_.retrieve(query, engine_.config_.top_k);
    std::string hit_ids;
    std::string rag_context;
    for (const auto& hit : hits) {
      if (!hit_ids.empty()) {
        hit_ids += '\n';
        rag_context += '\n';
      }
      hit_ids += hit.chunk_id;
      rag_context += hit.text;
    }
    record(Phase::retrieve, k, hit_ids);

    const auto integrate_prompt = engine_.prompts_.render(TemplateId::integrate_summary, {{"rag_context", rag_context}});
    const auto summary_reply = resolver.complete(integrate_prompt);
    record(Phase::integrate, k, exchange_payload(integrate_prompt, summary_reply.text));

    auto summary = trim(summary_reply.text);
    if (summary.empty()) summary = query;
    return summary;
  }

  Answer final_answer(const Memory& memory, bool traced) {
    const auto prompt = engine_.final_prompt(task_, memory, call_index_++);
    const auto reply = engine_.agents_.resolver->complete(prompt);
    Answer answer;
    answer.raw_text = reply.text;
    answer.label = parse_answer(reply.text, task_.kind);
    // The QA prompt itself ends with the answer marker.
    if (!answer.label && reply.text.find(kAnswerMarker) == std::string::npos)
      answer.label = parse_answer(std::string(kAnswerMarker) + reply.text, task_.kind);
    answer.iterations_used = static_cast<int>(memory.size());
    answer.retrieved_at_least_once = !memory.empty();
    if (traced) record(Phase::final_answer, answer.iterations_used, exchange_payload(prompt, reply.text));
    return answer;
  }

 private:
  PreCheckDecision run_pre_check() {
    const auto& cfg = engine_.config_;
    const auto prompt =
        engine_.prompts_.render(is_mcq(task_) ? TemplateId::pre_check_mcq : TemplateId::pre_check_yesno,
                                task_vars(task_));
    const auto reply = engine_.agents_.detector->complete(prompt);
    const double score = score_of(reply, cfg.pre_check.tokens);
    const auto decision = pre_check(score, cfg.thresholds, cfg.pre_check.polarity);
    record(Phase::pre_check, 0, exchange_payload(prompt, reply.text), score, cfg.thresholds.delta1,
           decision == PreCheckDecision::retrieve ? Decision::retrieve : Decision::skip);
    return decision;
  }

  PostCheckDecision run_post_check(const std::string& summary, int k) {
    const auto& cfg = engine_.config_;
    const auto prompt =
        engine_.prompts_.render(TemplateId::post_check, {{"summary_context", summary}, {"question", task_.question}});
    const auto reply = engine_.agents_.detector->complete(prompt);
    const double score = score_of(reply, cfg.post_check.tokens);
    const auto decision = post_check(score, k, cfg.thresholds, cfg.post_check.polarity);
    record(Phase::post_check, k, exchange_payload(prompt, reply.text), score, cfg.thresholds.delta4,
           decision == PostCheckDecision::proceed ? Decision::proceed : Decision::stop);
    return decision;
  }

  double score_of(const CompletionResult& reply, const AffirmativeSet& tokens) const {
    const double natural = affirmative_score(first_position_logprobs(reply), tokens);
    const auto& base = engine_.config_.score_log_base;
    return base ? natural / std::log(*base) : natural;
  }

  void record(Phase phase, int iteration, std::string_view payload, std::optional<double> score = std::nullopt,
              std::optional<double> threshold = std::nullopt, std::optional<Decision> decision = std::nullopt) {
    trace_.events.push_back({phase, iteration, score, threshold, decision, digest(payload)});
  }

  const Engine& engine_;
  const Task& task_;
  std::size_t call_index_;
  SessionTrace trace_;
};

Engine::Engine(EngineConfig config, Agents agents, PromptRegistry prompts, const Retriever& retriever)
    : config_(std::move(config)), agents_(std::move(agents)), prompts_(std::move(prompts)), retriever_(retriever) {
  validate_engine_config(config_);
  if (!agents_.detector || !agents_.resolver) throw ConfigurationError("both detector and resolver are required");
}

SessionResult Engine::run_session(const Task& task) const {
  validate_task(task);
  return Session(*this, task).run();
}

std::string Engine::dissect(const Task& task, const Memory& memory) const {
  return Session(*this, task).dissect(memory, static_cast<int>(memory.size()) + 1);
}

std::string Engine::retrieve_and_integrate(const std::string& term) const {
  const Task placeholder{"", TaskKind::yes_no, "", {}, std::nullopt, std::nullopt};
  return Session(*this, placeholder).retrieve_and_integrate(term, 1);
}

Answer Engine::final_answer(const Task& task, const Memory& memory) const {
  return Session(*this, task).final_answer(memory, false);
}

std::string Engine::final_prompt(const Task& task, const Memory& memory, std::size_t call_index) const {
  auto vars = task_vars(task);
  TemplateId id;
  if (memory.empty()) {
    id = is_mcq(task) ? TemplateId::qa_without_rag_mcq : TemplateId::qa_without_rag_yesno;
  } else {
    id = is_mcq(task) ? TemplateId::qa_with_rag_mcq : TemplateId::qa_with_rag_yesno;
    vars["memory"] = memory_render(memory);
  }
  return config_.few_shot_prefix + prompts_.apply_system_prompt(prompts_.render(id, vars), call_index);
}

}  // namespace acrag

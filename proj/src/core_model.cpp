// SPDX-License-Identifier: Apache-2.0
#include "acrag/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "acrag/errors.hpp"

namespace acrag {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::multiple_choice: return "multiple_choice";
    case TaskKind::yes_no: return "yes_no";
  }
  return "unknown";
}

TaskKind task_kind_from_string(std::string_view text) {
  if (text == "multiple_choice") return TaskKind::multiple_choice;
  if (text == "yes_no") return TaskKind::yes_no;
  throw InvalidArgument("unknown task kind: " + std::string(text));
}

void validate_task(const Task& task) {
  if (task.id.empty()) throw InvalidArgument("task id must not be empty");
  if (task.question.empty()) throw InvalidArgument("task " + task.id + ": question must not be empty");
  if (task.kind == TaskKind::multiple_choice) {
    if (task.options.empty()) throw InvalidArgument("task " + task.id + ": multiple_choice needs options");
    std::set<std::string> seen;
    for (const auto& option : task.options) {
      if (option.label.size() != 1 || option.label[0] < 'A' || option.label[0] > 'E')
        throw InvalidArgument("task " + task.id + ": option label '" + option.label + "' not in A-E");
      if (!seen.insert(option.label).second)
        throw InvalidArgument("task " + task.id + ": duplicate option label " + option.label);
    }
    if (task.gold && !seen.contains(*task.gold))
      throw InvalidArgument("task " + task.id + ": gold '" + *task.gold + "' is not an option label");
  } else {
    if (!task.options.empty()) throw InvalidArgument("task " + task.id + ": yes_no takes no options");
    if (task.gold && *task.gold != "yes" && *task.gold != "no" && *task.gold != "maybe")
      throw InvalidArgument("task " + task.id + ": gold must be yes, no or maybe");
  }
}

std::string render_options(const Task& task) {
  std::string out;
  for (std::size_t i = 0; i < task.options.size(); ++i) {
    if (i > 0) out += '\n';
    out += task.options[i].label + ". " + task.options[i].text;
  }
  return out;
}

namespace {

Task task_from_json(const json& j) {
  Task task;
  task.id = j.at("id").get<std::string>();
  task.kind = task_kind_from_string(j.at("kind").get<std::string>());
  task.question = j.at("question").get<std::string>();
  if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
    for (const auto& option : *it) {
      task.options.push_back({option.at("label").get<std::string>(), option.at("text").get<std::string>()});
    }
  }
  if (auto it = j.find("context"); it != j.end() && !it->is_null()) task.context = it->get<std::string>();
  if (auto it = j.find("gold"); it != j.end() && !it->is_null()) task.gold = it->get<std::string>();
  validate_task(task);
  return task;
}

}  // namespace

Task task_from_json_line(std::string_view line) {
  try {
    return task_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed task: ") + e.what());
  }
}

std::string task_to_json_line(const Task& task) {
  ordered_json j;
  j["id"] = task.id;
  j["kind"] = to_string(task.kind);
  j["question"] = task.question;
  ordered_json options = ordered_json::array();
  for (const auto& option : task.options) options.push_back({{"label", option.label}, {"text", option.text}});
  j["options"] = options;
  if (task.context) j["context"] = *task.context;
  if (task.gold) j["gold"] = *task.gold;
  return j.dump();
}

std::vector<Task> load_tasks_jsonl(std::istream& in) {
  std::vector<Task> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tasks.push_back(task_from_json_line(line));
    } catch (const InvalidArgument& e) {
      throw LoadError("dataset line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return tasks;
}

std::vector<Task> load_tasks_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset " + path, 0);
  return load_tasks_jsonl(in);
}

bool Memory::contains_term(std::string_view term) const {
  for (const auto& entry : entries_) {
    if (entry.term == term) return true;
  }
  return false;
}

Memory memory_append(const Memory& memory, std::string term, std::string summary) {
  if (term.empty()) throw InvalidArgument("memory_append: term must not be empty");
  if (summary.empty()) throw InvalidArgument("memory_append: summary must not be empty");
  Memory next = memory;
  next.entries_.push_back({std::move(term), std::move(summary), static_cast<int>(memory.size()) + 1});
  return next;
}

std::string memory_render(const Memory& memory) {
  std::string out;
  for (const auto& entry : memory.entries()) {
    if (!out.empty()) out += '\n';
    out += entry.term;
    out += ": ";
    out += entry.summary;
  }
  return out;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::pre_check: return "pre_check";
    case Phase::dissect: return "dissect";
    case Phase::resolve_preliminary: return "resolve_preliminary";
    case Phase::retrieve: return "retrieve";
    case Phase::integrate: return "integrate";
    case Phase::post_check: return "post_check";
    case Phase::final_answer: return "final_answer";
  }
  return "unknown";
}

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::retrieve: return "retrieve";
    case Decision::skip: return "skip";
    case Decision::proceed: return "continue";
    case Decision::stop: return "stop";
  }
  return "unknown";
}

Phase phase_from_string(std::string_view text) {
  for (auto phase : {Phase::pre_check, Phase::dissect, Phase::resolve_preliminary, Phase::retrieve,
                     Phase::integrate, Phase::post_check, Phase::final_answer}) {
    if (to_string(phase) == text) return phase;
  }
  throw InvalidArgument("unknown phase: " + std::string(text));
}

Decision decision_from_string(std::string_view text) {
  for (auto decision : {Decision::retrieve, Decision::skip, Decision::proceed, Decision::stop}) {
    if (to_string(decision) == text) return decision;
  }
  throw InvalidArgument("unknown decision: " + std::string(text));
}

std::size_t SessionTrace::count(Phase phase) const {
  std::size_t n = 0;
  for (const auto& event : events) n += event.phase == phase ? 1 : 0;
  return n;
}

void validate_trace(const SessionTrace& trace, int max_retrievals) {
  if (trace.events.empty() || trace.events.front().phase != Phase::pre_check)
    throw InvalidArgument("trace " + trace.task_id + ": first event must be pre_check");
  if (trace.count(Phase::final_answer) != 1 || trace.events.back().phase != Phase::final_answer)
    throw InvalidArgument("trace " + trace.task_id + ": exactly one final_answer, and it must be last");
  if (trace.count(Phase::retrieve) > static_cast<std::size_t>(std::max(max_retrievals, 0)))
    throw InvalidArgument("trace " + trace.task_id + ": more retrieve events than the iteration cap");
}

namespace {

ordered_json score_json(double value) {
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  return value;
}

double score_from_json(const json& j) {
  if (j.is_string()) {
    const auto text = j.get<std::string>();
    if (text == "-inf") return -INFINITY;
    if (text == "inf") return INFINITY;
    throw InvalidArgument("bad score value: " + text);
  }
  return j.get<double>();
}

}  // namespace

std::string trace_to_jsonl(const SessionTrace& trace) {
  std::string out;
  for (const auto& event : trace.events) {
    ordered_json j;
    j["task_id"] = trace.task_id;
    j["phase"] = to_string(event.phase);
    j["iteration"] = event.iteration;
    if (event.score) j["score"] = score_json(*event.score);
    if (event.threshold) j["threshold"] = score_json(*event.threshold);
    if (event.decision) j["decision"] = to_string(*event.decision);
    j["payload_digest"] = event.payload_digest;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<SessionTrace> traces_from_jsonl(std::istream& in) {
  std::vector<SessionTrace> traces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      TraceEvent event;
      event.phase = phase_from_string(j.at("phase").get<std::string>());
      event.iteration = j.at("iteration").get<int>();
      if (j.contains("score")) event.score = score_from_json(j["score"]);
      if (j.contains("threshold")) event.threshold = score_from_json(j["threshold"]);
      if (j.contains("decision")) event.decision = decision_from_string(j["decision"].get<std::string>());
      event.payload_digest = j.value("payload_digest", "");
      const auto task_id = j.at("task_id").get<std::string>();
      if (traces.empty() || traces.back().task_id != task_id || event.phase == Phase::pre_check)
        traces.push_back({task_id, {}});
      traces.back().events.push_back(std::move(event));
    } catch (const json::exception& e) {
      throw LoadError("trace line " + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const InvalidArgument& e) {
      throw LoadError("trace line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return traces;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

}  // namespace acrag

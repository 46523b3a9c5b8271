// SPDX-License-Identifier: Apache-2.0
#pragma once

// Domain types shared across the engine: tasks, the (term, summary) memory
// ledger, answers, and the per-session trace.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace acrag {

enum class TaskKind { multiple_choice, yes_no };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view text);

struct Option {
  std::string label;
  std::string text;

  bool operator==(const Option&) const = default;
};

struct Task {
  std::string id;
  TaskKind kind = TaskKind::multiple_choice;
  std::string question;
  std::vector<Option> options;          // empty for yes_no
  std::optional<std::string> context;   // the yes_no passage
  std::optional<std::string> gold;

  bool operator==(const Task&) const = default;
};

// Throws InvalidArgument when the kind-specific invariants do not hold.
void validate_task(const Task& task);

// "A. text" lines joined by '\n', in option order.
std::string render_options(const Task& task);

Task task_from_json_line(std::string_view line);
std::string task_to_json_line(const Task& task);

// One Task per non-blank line. Throws LoadError naming the 1-based line.
std::vector<Task> load_tasks_jsonl(std::istream& in);
std::vector<Task> load_tasks_jsonl_file(const std::string& path);

struct MemoryEntry {
  std::string term;
  std::string summary;
  int iteration = 0;

  bool operator==(const MemoryEntry&) const = default;
};

// Ordered ledger of (term, summary) pairs. Only memory_append produces
// non-empty values, so iterations are always 1..n in order.
class Memory {
 public:
  Memory() = default;

  const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains_term(std::string_view term) const;

  bool operator==(const Memory&) const = default;

 private:
  friend Memory memory_append(const Memory& memory, std::string term, std::string summary);
  std::vector<MemoryEntry> entries_;
};

// Returns a new memory with (term, summary) appended at iteration size()+1.
// Throws InvalidArgument on an empty term or summary.
[[nodiscard]] Memory memory_append(const Memory& memory, std::string term, std::string summary);

// "<term>: <summary>" per entry, newline-separated; "" for the empty memory.
std::string memory_render(const Memory& memory);

struct Answer {
  std::optional<std::string> label;  // nullopt means unparsed
  std::string raw_text;
  bool retrieved_at_least_once = false;
  int iterations_used = 0;

  bool operator==(const Answer&) const = default;
};

enum class Phase { pre_check, dissect, resolve_preliminary, retrieve, integrate, post_check, final_answer };
enum class Decision { retrieve, skip, proceed, stop };

std::string_view to_string(Phase phase);
std::string_view to_string(Decision decision);  // proceed is spelled "continue"
Phase phase_from_string(std::string_view text);
Decision decision_from_string(std::string_view text);

struct TraceEvent {
  Phase phase = Phase::pre_check;
  int iteration = 0;
  std::optional<double> score;
  std::optional<double> threshold;
  std::optional<Decision> decision;
  std::string payload_digest;

  bool operator==(const TraceEvent&) const = default;
};

struct SessionTrace {
  std::string task_id;
  std::vector<TraceEvent> events;

  std::size_t count(Phase phase) const;
  bool operator==(const SessionTrace&) const = default;
};

// Throws InvalidArgument when the trace breaks its structural invariants:
// first event pre_check, exactly one final_answer and it is last, at most
// max_retrievals retrieve events.
void validate_trace(const SessionTrace& trace, int max_retrievals);

// One JSON object per event, each terminated by '\n'. Infinite scores are
// written as the strings "-inf" / "inf".
std::string trace_to_jsonl(const SessionTrace& trace);

// Splits consecutive event lines into sessions. A session starts at a
// pre_check event or where the task_id changes.
std::vector<SessionTrace> traces_from_jsonl(std::istream& in);

// 64-bit FNV-1a, rendered as "fnv1a64:<16 hex digits>".
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest(std::string_view bytes);

}  // namespace acrag

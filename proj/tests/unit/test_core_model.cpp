// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "acrag/core_model.hpp"
#include "acrag/errors.hpp"

using namespace acrag;

namespace {

Task mcq() {
  return {"q1", TaskKind::multiple_choice, "Which?", {{"A", "one"}, {"B", "two"}}, std::nullopt, "B"};
}

}  // namespace

TEST_CASE("task validation") {
  CHECK_NOTHROW(validate_task(mcq()));

  auto t = mcq();
  t.options.push_back({"B", "dup"});
  CHECK_THROWS_AS(validate_task(t), InvalidArgument);

  t = mcq();
  t.options = {};
  CHECK_THROWS_AS(validate_task(t), InvalidArgument);

  t = mcq();
  t.options.push_back({"F", "out of range"});
  CHECK_THROWS_AS(validate_task(t), InvalidArgument);

  t = mcq();
  t.gold = "C";
  CHECK_THROWS_AS(validate_task(t), InvalidArgument);

  Task yn{"y1", TaskKind::yes_no, "Is it?", {}, "ctx", "maybe"};
  CHECK_NOTHROW(validate_task(yn));
  yn.gold = "B";
  CHECK_THROWS_AS(validate_task(yn), InvalidArgument);
  yn.gold = "no";
  yn.options = {{"A", "x"}};
  CHECK_THROWS_AS(validate_task(yn), InvalidArgument);
}

TEST_CASE("options render one labelled line each") {
  CHECK(render_options(mcq()) == "A. one\nB. two");
}

TEST_CASE("task JSON lines round-trip") {
  const auto t = mcq();
  CHECK(task_from_json_line(task_to_json_line(t)) == t);

  Task yn{"y1", TaskKind::yes_no, "Is it?", {}, "passage", "yes"};
  CHECK(task_from_json_line(task_to_json_line(yn)) == yn);
}

TEST_CASE("dataset loader reports the failing line") {
  std::istringstream ok(task_to_json_line(mcq()) + "\n\n" + task_to_json_line(mcq()) + "\n");
  CHECK(load_tasks_jsonl(ok).size() == 2);

  std::istringstream bad("{not json\n");
  try {
    load_tasks_jsonl(bad);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  std::istringstream third(task_to_json_line(mcq()) + "\n" + task_to_json_line(mcq()) + "\n{\"id\": 3}\n");
  try {
    load_tasks_jsonl(third);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("memory append is functional and ordered") {
  const Memory empty;
  const auto one = memory_append(empty, "t1", "s1");
  const auto two = memory_append(one, "t2", "s2");
  CHECK(empty.empty());
  CHECK(one.size() == 1);
  REQUIRE(two.size() == 2);
  CHECK(two.entries()[0] == MemoryEntry{"t1", "s1", 1});
  CHECK(two.entries()[1] == MemoryEntry{"t2", "s2", 2});
  CHECK(two.contains_term("t2"));
  CHECK_FALSE(two.contains_term("t3"));
  CHECK(memory_render(empty).empty());
  CHECK(memory_render(two) == "t1: s1\nt2: s2");
  CHECK_THROWS_AS((void)memory_append(one, "", "s"), InvalidArgument);
  CHECK_THROWS_AS((void)memory_append(one, "t", ""), InvalidArgument);
}

TEST_CASE("property: memory iterations are 1..n after any append sequence") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Memory m;
    const int n = static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) m = memory_append(m, "t" + std::to_string(rng() % 5), "s");
    REQUIRE(m.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) CHECK(m.entries()[static_cast<std::size_t>(i)].iteration == i + 1);
  }
}

TEST_CASE("enum spellings") {
  CHECK(to_string(Decision::proceed) == "continue");
  CHECK(decision_from_string("continue") == Decision::proceed);
  for (auto p : {Phase::pre_check, Phase::dissect, Phase::resolve_preliminary, Phase::retrieve, Phase::integrate,
                 Phase::post_check, Phase::final_answer}) {
    CHECK(phase_from_string(to_string(p)) == p);
  }
  CHECK_THROWS_AS(phase_from_string("nope"), InvalidArgument);
}

TEST_CASE("FNV-1a 64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(digest("") == "fnv1a64:cbf29ce484222325");
}

namespace {

SessionTrace sample_trace() {
  SessionTrace t;
  t.task_id = "q1";
  t.events.push_back({Phase::pre_check, 0, -0.25, -2.0, Decision::retrieve, digest("a")});
  t.events.push_back({Phase::dissect, 1, std::nullopt, std::nullopt, std::nullopt, digest("b")});
  t.events.push_back({Phase::retrieve, 1, std::nullopt, std::nullopt, std::nullopt, digest("c")});
  t.events.push_back(
      {Phase::post_check, 1, -std::numeric_limits<double>::infinity(), -3.0, Decision::stop, digest("d")});
  t.events.push_back({Phase::final_answer, 1, std::nullopt, std::nullopt, std::nullopt, digest("e")});
  return t;
}

}  // namespace

TEST_CASE("trace JSONL layout and round-trip") {
  const auto t = sample_trace();
  const auto text = trace_to_jsonl(t);
  const auto first = text.substr(0, text.find('\n'));
  CHECK(first ==
        "{\"task_id\":\"q1\",\"phase\":\"pre_check\",\"iteration\":0,\"score\":-0.25,\"threshold\":-2.0,"
        "\"decision\":\"retrieve\",\"payload_digest\":\"fnv1a64:af63dc4c8601ec8c\"}");
  CHECK(text.find("\"score\":\"-inf\"") != std::string::npos);

  std::istringstream in(text + trace_to_jsonl(SessionTrace{"q2", {t.events.front(), t.events.back()}}));
  const auto back = traces_from_jsonl(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == t);
  CHECK(back[1].task_id == "q2");
  CHECK(back[1].events.size() == 2);
}

TEST_CASE("trace structural validation") {
  const auto t = sample_trace();
  CHECK_NOTHROW(validate_trace(t, 3));
  CHECK_THROWS_AS(validate_trace(t, 0), InvalidArgument);

  auto no_final = t;
  no_final.events.pop_back();
  CHECK_THROWS_AS(validate_trace(no_final, 3), InvalidArgument);

  auto wrong_start = t;
  std::swap(wrong_start.events[0], wrong_start.events[1]);
  CHECK_THROWS_AS(validate_trace(wrong_start, 3), InvalidArgument);

  auto two_finals = t;
  two_finals.events.push_back(t.events.back());
  CHECK_THROWS_AS(validate_trace(two_finals, 3), InvalidArgument);
}

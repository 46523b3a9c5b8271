// SPDX-License-Identifier: Apache-2.0
#include "acrag/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "acrag/errors.hpp"

namespace acrag {

using nlohmann::json;
using nlohmann::ordered_json;

std::string record_to_json_line(const RunRecord& r) {
  ordered_json j;
  j["task_id"] = r.task_id;
  j["repeat"] = r.repeat;
  j["gold"] = r.gold;
  j["predicted"] = r.predicted ? ordered_json(*r.predicted) : ordered_json(nullptr);
  j["retrieved_at_least_once"] = r.retrieved_at_least_once;
  j["iterations_used"] = r.iterations_used;
  j["wall_time_ms"] = std::round(r.wall_time.count() * 1e6) / 1e3;
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump();
}

std::vector<RunRecord> load_records_jsonl(std::istream& in) {
  std::vector<RunRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      RunRecord r;
      r.task_id = j.at("task_id").get<std::string>();
      r.repeat = j.value("repeat", 0);
      r.gold = j.at("gold").get<std::string>();
      if (const auto& p = j.at("predicted"); !p.is_null()) r.predicted = p.get<std::string>();
      r.retrieved_at_least_once = j.at("retrieved_at_least_once").get<bool>();
      r.iterations_used = j.at("iterations_used").get<int>();
      r.wall_time = std::chrono::duration<double>(j.value("wall_time_ms", 0.0) / 1e3);
      r.error = j.value("error", "");
      if (r.retrieved_at_least_once && r.iterations_used < 1)
        throw LoadError("records line " + std::to_string(line_no) + ": retrieved record with 0 iterations", line_no);
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw LoadError("records line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return records;
}

MetricsReport compute_metrics(std::span<const RunRecord> records) {
  if (records.empty()) throw InvalidArgument("compute_metrics: no records");
  std::size_t correct = 0;
  std::size_t retrieved = 0;
  long long iterations = 0;
  for (const auto& r : records) {
    correct += r.correct() ? 1 : 0;
    if (r.retrieved_at_least_once) {
      ++retrieved;
      iterations += r.iterations_used;
    }
  }
  const double n = static_cast<double>(records.size());
  MetricsReport m;
  m.n = records.size();
  m.accuracy = static_cast<double>(correct) / n;
  m.ra_rate = static_cast<double>(retrieved) / n;
  m.direct_answer_rate = 1.0 - m.ra_rate;
  if (retrieved > 0) m.avg_iters = static_cast<double>(iterations) / static_cast<double>(retrieved);
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

MetricsReport BenchmarkReport::mean_report() const {
  MetricsReport m;
  m.accuracy = accuracy.mean;
  m.ra_rate = ra_rate.mean;
  m.direct_answer_rate = direct_answer_rate.mean;
  if (avg_iters) m.avg_iters = avg_iters->mean;
  m.n = tasks;
  return m;
}

BenchmarkReport aggregate(std::span<const RunRecord> records) {
  std::map<int, std::vector<RunRecord>> by_repeat;
  for (const auto& r : records) by_repeat[r.repeat].push_back(r);

  BenchmarkReport report;
  std::vector<double> acc, ra, iters, dar;
  for (const auto& [repeat, group] : by_repeat) {
    const auto m = compute_metrics(group);
    report.per_repeat.push_back(m);
    acc.push_back(m.accuracy);
    ra.push_back(m.ra_rate);
    dar.push_back(m.direct_answer_rate);
    if (m.avg_iters) iters.push_back(*m.avg_iters);
    report.tasks = std::max(report.tasks, group.size());
    for (const auto& r : group) report.session_errors += r.error.empty() ? 0 : 1;
  }
  report.accuracy = mean_std(acc);
  report.ra_rate = mean_std(ra);
  report.direct_answer_rate = mean_std(dar);
  if (!iters.empty()) report.avg_iters = mean_std(iters);
  return report;
}

namespace {

std::string timestamp_dir_name() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::ostringstream name;
  name << "run-" << std::put_time(&tm, "%Y%m%dT%H%M%S") << '-' << std::setw(3) << std::setfill('0') << ms;
  return name.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

std::filesystem::path write_run(const std::filesystem::path& root, const BenchmarkOptions& options,
                                const BenchmarkResult& result) {
  auto dir = root / timestamp_dir_name();
  for (int suffix = 1; std::filesystem::exists(dir); ++suffix)
    dir = root / (timestamp_dir_name() + "-" + std::to_string(suffix));
  std::filesystem::create_directories(dir);

  write_file(dir / "config.json", options.resolved_config_json.empty() ? "{}\n" : options.resolved_config_json + "\n");
  std::string records, traces;
  for (const auto& r : result.records) records += record_to_json_line(r) + "\n";
  for (const auto& t : result.traces) traces += trace_to_jsonl(t);
  write_file(dir / "records.jsonl", records);
  write_file(dir / "traces.jsonl", traces);
  write_file(dir / "report.json", report_to_json(result.report) + "\n");
  write_file(dir / "report.txt", format_report(result.report));
  return dir;
}

}  // namespace

BenchmarkResult run_benchmark(const std::vector<Task>& tasks, const Engine& engine, const BenchmarkOptions& options) {
  if (options.repeats < 1) throw InvalidArgument("repeats must be >= 1");
  if (tasks.empty()) throw InvalidArgument("dataset has no tasks");
  for (const auto& task : tasks) {
    if (!task.gold) throw InvalidArgument("task " + task.id + " has no gold label");
  }

  const std::size_t per_repeat = tasks.size();
  const std::size_t total = per_repeat * static_cast<std::size_t>(options.repeats);
  BenchmarkResult result;
  result.records.resize(total);
  result.traces.resize(total);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (!abort) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= total) return;
      const auto& task = tasks[slot % per_repeat];
      RunRecord& record = result.records[slot];
      record.task_id = task.id;
      record.gold = *task.gold;
      record.repeat = static_cast<int>(slot / per_repeat);
      const auto start = std::chrono::steady_clock::now();
      try {
        auto session = engine.run_session(task);
        record.predicted = session.answer.label;
        record.retrieved_at_least_once = session.answer.retrieved_at_least_once;
        record.iterations_used = session.answer.iterations_used;
        result.traces[slot] = std::move(session.trace);
      } catch (const SessionError& e) {
        record.error = e.what();
        const auto retrievals = static_cast<int>(e.partial_trace().count(Phase::retrieve));
        record.retrieved_at_least_once = retrievals > 0;
        record.iterations_used = retrievals;
        result.traces[slot] = e.partial_trace();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
      record.wall_time = std::chrono::steady_clock::now() - start;
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, total);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  result.report = aggregate(result.records);
  if (options.out_dir) result.run_dir = write_run(*options.out_dir, options, result);
  return result;
}

BenchmarkResult run_benchmark(const std::filesystem::path& dataset, const Engine& engine,
                              const BenchmarkOptions& options) {
  return run_benchmark(load_tasks_jsonl_file(dataset.string()), engine, options);
}

namespace {

ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.stddev}}; }

ordered_json metrics_json(const MetricsReport& m) {
  return {{"n", m.n},
          {"accuracy", m.accuracy},
          {"ra_rate", m.ra_rate},
          {"avg_iters", m.avg_iters ? ordered_json(*m.avg_iters) : ordered_json(nullptr)},
          {"direct_answer_rate", m.direct_answer_rate}};
}

ordered_json report_json(const BenchmarkReport& r) {
  ordered_json j;
  j["tasks"] = r.tasks;
  j["repeats"] = r.per_repeat.size();
  j["session_errors"] = r.session_errors;
  j["accuracy"] = mean_std_json(r.accuracy);
  j["ra_rate"] = mean_std_json(r.ra_rate);
  j["avg_iters"] = r.avg_iters ? mean_std_json(*r.avg_iters) : ordered_json(nullptr);
  j["direct_answer_rate"] = mean_std_json(r.direct_answer_rate);
  ordered_json per = ordered_json::array();
  for (const auto& m : r.per_repeat) per.push_back(metrics_json(m));
  j["per_repeat"] = per;
  return j;
}

std::string pct(const MeanStd& m) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << 100.0 * m.mean << " ± " << std::setprecision(2) << 100.0 * m.stddev;
  return out.str();
}

std::string threshold_text(double value) {
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << value;
  return out.str();
}

}  // namespace

std::string report_to_json(const BenchmarkReport& report) { return report_json(report).dump(2); }

std::string format_report(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "tasks: " << r.tasks << "  repeats: " << r.per_repeat.size() << "  session errors: " << r.session_errors
      << '\n';
  out << "Accuracy (%):           " << pct(r.accuracy) << '\n';
  out << "RA Rate (%):            " << pct(r.ra_rate) << '\n';
  out << "Iters:                  ";
  if (r.avg_iters) {
    out << std::fixed << std::setprecision(2) << r.avg_iters->mean << " ± " << r.avg_iters->stddev << '\n';
  } else {
    out << "-\n";
  }
  out << "Direct Answer Rate (%): " << pct(r.direct_answer_rate) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<SweepCell> parse_sweep_grid(std::string_view json_text) {
  static const std::set<std::string> known = {"name",   "detector", "resolver",     "delta1",
                                              "delta4", "single_round", "max_iterations"};
  std::vector<SweepCell> cells;
  try {
    const auto j = json::parse(json_text);
    const auto& list = j.at("cells");
    if (!list.is_array()) throw SweepConfigError("\"cells\" must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& c = list[i];
      if (!c.is_object()) throw SweepConfigError("cell " + std::to_string(i) + " is not an object");
      for (const auto& [key, value] : c.items()) {
        if (!known.contains(key)) throw SweepConfigError("cell " + std::to_string(i) + ": unknown key '" + key + "'");
      }
      SweepCell cell;
      cell.name = c.value("name", "cell" + std::to_string(i));
      if (c.contains("detector")) cell.detector = c["detector"].get<std::string>();
      if (c.contains("resolver")) cell.resolver = c["resolver"].get<std::string>();
      auto threshold = [&](const char* key) -> std::optional<double> {
        if (!c.contains(key)) return std::nullopt;
        const auto& v = c[key];
        if (v.is_string()) {
          const auto text = v.get<std::string>();
          if (text == "-inf") return -std::numeric_limits<double>::infinity();
          if (text == "inf") return std::numeric_limits<double>::infinity();
          throw SweepConfigError("cell " + cell.name + ": bad " + key + " value '" + text + "'");
        }
        if (!v.is_number()) throw SweepConfigError("cell " + cell.name + ": " + key + " must be a number");
        return v.get<double>();
      };
      cell.delta1 = threshold("delta1");
      cell.delta4 = threshold("delta4");
      if (c.contains("single_round")) cell.single_round = c["single_round"].get<bool>();
      if (c.contains("max_iterations")) cell.max_iterations = c["max_iterations"].get<int>();
      cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw SweepConfigError(std::string("malformed sweep grid: ") + e.what());
  }
  return cells;
}

std::vector<SweepCell> load_sweep_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SweepConfigError("cannot open sweep grid " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sweep_grid(buf.str());
}

EngineSettings apply_cell(const EngineSettings& base, const SweepCell& cell) {
  EngineSettings s = base;
  if (cell.detector) s.detector_name = *cell.detector;
  if (cell.resolver) s.resolver_name = *cell.resolver;
  for (const auto* name : {&s.detector_name, &s.resolver_name}) {
    if (!s.backends.contains(*name))
      throw SweepConfigError("cell " + cell.name + ": unknown backend '" + *name + "'");
  }
  s.engine.roles = {s.backends.at(s.detector_name).descriptor, s.backends.at(s.resolver_name).descriptor};
  auto& t = s.engine.thresholds;
  if (cell.delta1) t.delta1 = *cell.delta1;
  if (cell.delta4) t.delta4 = *cell.delta4;
  if (cell.single_round) t.single_round = *cell.single_round;
  if (cell.max_iterations) t.max_iterations = *cell.max_iterations;
  if (std::isnan(t.delta1) || std::isnan(t.delta4)) throw SweepConfigError("cell " + cell.name + ": NaN threshold");
  if (t.max_iterations < 0) throw SweepConfigError("cell " + cell.name + ": max_iterations must be >= 0");
  return s;
}

std::vector<AblationRow> run_ablation(const std::vector<SweepCell>& grid, const EngineSettings& base,
                                      const BackendPool& backends, const std::vector<Task>& tasks,
                                      const Retriever& retriever, const BenchmarkOptions& options) {
  // Resolve every cell before running any, so a bad grid fails fast.
  std::vector<EngineSettings> resolved;
  resolved.reserve(grid.size());
  for (const auto& cell : grid) resolved.push_back(apply_cell(base, cell));

  const auto prompts = load_prompts(base.engine);
  std::vector<AblationRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& s = resolved[i];
    Engine engine(s.engine, agents_for(backends, s.detector_name, s.resolver_name), prompts, retriever);
    BenchmarkOptions cell_options = options;
    if (options.out_dir) {
      cell_options.out_dir = *options.out_dir / grid[i].name;
      cell_options.resolved_config_json = settings_to_json(s);
    }
    auto result = run_benchmark(tasks, engine, cell_options);
    rows.push_back({grid[i], s.detector_name, s.resolver_name, s.engine.thresholds, std::move(result.report)});
  }
  return rows;
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  ordered_json out = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json j;
    j["cell"] = row.cell.name;
    j["detector"] = row.detector;
    j["resolver"] = row.resolver;
    j["delta1"] = threshold_text(row.thresholds.delta1);
    j["delta4"] = threshold_text(row.thresholds.delta4);
    j["max_iterations"] = row.thresholds.max_iterations;
    j["single_round"] = row.thresholds.single_round;
    j["report"] = report_json(row.report);
    out.push_back(j);
  }
  return out.dump(2);
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "cell" << std::setw(12) << "Detector" << std::setw(12) << "Resolver"
      << std::setw(8) << "delta1" << std::setw(8) << "delta4" << std::setw(8) << "Acc" << std::setw(9) << "RA Rate"
      << std::setw(7) << "Iters" << "Direct Answer Rate\n";
  for (const auto& row : rows) {
    const auto m = row.report.mean_report();
    std::ostringstream iters;
    if (m.avg_iters) {
      iters << std::fixed << std::setprecision(2) << *m.avg_iters;
    } else {
      iters << "-";
    }
    out << std::left << std::setw(16) << row.cell.name << std::setw(12) << row.detector << std::setw(12)
        << row.resolver << std::setw(8) << threshold_text(row.thresholds.delta1) << std::setw(8)
        << threshold_text(row.thresholds.delta4) << std::fixed << std::setprecision(1) << std::setw(8)
        << 100.0 * m.accuracy << std::setw(9) << 100.0 * m.ra_rate << std::setw(7) << iters.str()
        << 100.0 * m.direct_answer_rate << '\n';
  }
  return out.str();
}

}  // namespace acrag

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Benchmark driver, metrics, and the ablation sweep runner.
//
// Metrics per pass over a dataset:
//   accuracy            correct / n, unparsed predictions count as wrong
//   ra_rate             share of samples with at least one retrieval
//   avg_iters           mean retrievals among samples that retrieved at all
//                       (undefined when none did)
//   direct_answer_rate  1 - ra_rate

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acrag/answer_parser.hpp"
#include "acrag/config.hpp"
#include "acrag/core_model.hpp"
#include "acrag/orchestrator.hpp"

namespace acrag {

struct RunRecord {
  std::string task_id;
  std::string gold;
  std::optional<std::string> predicted;  // nullopt = unparsed
  bool retrieved_at_least_once = false;
  int iterations_used = 0;
  std::chrono::duration<double> wall_time{0};
  int repeat = 0;
  std::string error;  // non-empty when the session failed

  bool correct() const { return predicted && *predicted == gold; }
};

std::string record_to_json_line(const RunRecord& record);
// Throws LoadError naming the 1-based line.
std::vector<RunRecord> load_records_jsonl(std::istream& in);

struct MetricsReport {
  double accuracy = 0.0;
  double ra_rate = 0.0;
  std::optional<double> avg_iters;
  double direct_answer_rate = 1.0;
  std::size_t n = 0;

  bool operator==(const MetricsReport&) const = default;
};

// Throws InvalidArgument on an empty record set.
MetricsReport compute_metrics(std::span<const RunRecord> records);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct BenchmarkReport {
  std::vector<MetricsReport> per_repeat;
  MeanStd accuracy;
  MeanStd ra_rate;
  std::optional<MeanStd> avg_iters;  // over repeats where it is defined
  MeanStd direct_answer_rate;
  std::size_t tasks = 0;
  std::size_t session_errors = 0;

  // Means as a MetricsReport (n = tasks).
  MetricsReport mean_report() const;
};

// Groups records by repeat, in ascending repeat order.
BenchmarkReport aggregate(std::span<const RunRecord> records);

struct BenchmarkOptions {
  int repeats = 1;
  std::size_t parallelism = 1;
  // When set, a run-<timestamp> directory is created under it holding
  // config.json, records.jsonl, traces.jsonl, report.json and report.txt.
  std::optional<std::filesystem::path> out_dir;
  std::string resolved_config_json;  // embedded as config.json
};

struct BenchmarkResult {
  BenchmarkReport report;
  std::vector<RunRecord> records;     // repeat-major, task order within a repeat
  std::vector<SessionTrace> traces;   // parallel to records
  std::optional<std::filesystem::path> run_dir;
};

// Runs every task once per repeat. Sessions run concurrently up to
// options.parallelism. A SessionError becomes a record with an error and an
// unparsed prediction; configuration errors abort the run. Throws
// InvalidArgument if a task has no gold label or repeats < 1.
BenchmarkResult run_benchmark(const std::vector<Task>& tasks, const Engine& engine, const BenchmarkOptions& options);

// Loads the dataset first; a malformed line raises LoadError.
BenchmarkResult run_benchmark(const std::filesystem::path& dataset, const Engine& engine,
                              const BenchmarkOptions& options);

std::string report_to_json(const BenchmarkReport& report);
std::string format_report(const BenchmarkReport& report);

// One ablation cell: a delta applied to the base settings.
struct SweepCell {
  std::string name;
  std::optional<std::string> detector;
  std::optional<std::string> resolver;
  std::optional<double> delta1;
  std::optional<double> delta4;
  std::optional<bool> single_round;
  std::optional<int> max_iterations;
};

// {"cells": [{"name": "...", "detector": "base", "resolver": "ft",
//             "delta1": -2.0, "delta4": "-inf", "single_round": true,
//             "max_iterations": 3}]}
// Unknown keys raise SweepConfigError.
std::vector<SweepCell> parse_sweep_grid(std::string_view json_text);
std::vector<SweepCell> load_sweep_grid(const std::filesystem::path& path);

// Applies a cell to the base settings. Throws SweepConfigError on an unknown
// backend name, NaN threshold, or negative max_iterations.
EngineSettings apply_cell(const EngineSettings& base, const SweepCell& cell);

struct AblationRow {
  SweepCell cell;
  std::string detector;
  std::string resolver;
  Thresholds thresholds;
  BenchmarkReport report;
};

// Every cell is an independent benchmark over the same tasks and retriever.
// Backends come from the pool, keyed by catalog name.
std::vector<AblationRow> run_ablation(const std::vector<SweepCell>& grid, const EngineSettings& base,
                                      const BackendPool& backends, const std::vector<Task>& tasks,
                                      const Retriever& retriever, const BenchmarkOptions& options);

std::string ablation_to_json(const std::vector<AblationRow>& rows);
// Columns: cell, Detector, Resolver, delta1, delta4, Acc, RA Rate, Iters,
// Direct Answer Rate.
std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace acrag

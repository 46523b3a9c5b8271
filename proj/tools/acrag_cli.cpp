// SPDX-License-Identifier: Apache-2.0
// acrag: index building, benchmark runs, metric evaluation, ablation sweeps,
// and trace inspection.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "acrag/config.hpp"
#include "acrag/errors.hpp"
#include "acrag/eval_harness.hpp"
#include "acrag/knowledge_base.hpp"
#include "acrag/orchestrator.hpp"

namespace {

struct LoadedIndex {
  acrag::VectorIndex index;
  std::unique_ptr<acrag::Embedder> embedder;
};

LoadedIndex load_index(const std::string& dir) {
  auto index = acrag::VectorIndex::load(dir);
  auto embedder = acrag::make_embedder(index.metadata().embedder_id);
  return {std::move(index), std::move(embedder)};
}

int cmd_index_build(const std::string& corpus_path, const std::string& out, int chunk_size, std::size_t dim,
                    bool include_title) {
  const auto corpus = acrag::load_corpus_jsonl_file(corpus_path);
  const acrag::WhitespacePunctTokenizer tokenizer;
  const acrag::HashingEmbedder embedder(dim);
  const auto index = acrag::build_knowledge_base(corpus, tokenizer, embedder, {chunk_size, include_title});
  index.save(out);
  std::cout << "indexed " << corpus.size() << " documents into " << index.size() << " chunks (" << embedder.id()
            << ", " << tokenizer.id() << ") -> " << out << '\n';
  return 0;
}

int cmd_run(const std::string& dataset, const std::string& config, const std::string& index_dir, int repeats,
            const std::optional<std::string>& out, std::optional<std::size_t> parallelism) {
  const auto settings = acrag::load_settings(config);
  const auto loaded = load_index(index_dir);
  const acrag::Retriever retriever(*loaded.embedder, loaded.index);
  const auto backends = acrag::make_backends(settings);
  const acrag::Engine engine(settings.engine, acrag::agents_for(backends, settings.detector_name, settings.resolver_name),
                             acrag::load_prompts(settings.engine), retriever);

  acrag::BenchmarkOptions options;
  options.repeats = repeats;
  options.parallelism = parallelism.value_or(settings.parallelism);
  if (out) options.out_dir = *out;
  options.resolved_config_json = acrag::settings_to_json(settings);
  const auto result = acrag::run_benchmark(std::filesystem::path(dataset), engine, options);
  std::cout << acrag::format_report(result.report);
  if (result.run_dir) std::cout << "run directory: " << result.run_dir->string() << '\n';
  return 0;
}

int cmd_eval(const std::string& records_path, bool as_json) {
  std::ifstream in(records_path);
  if (!in) throw acrag::LoadError("cannot open records " + records_path, 0);
  const auto records = acrag::load_records_jsonl(in);
  if (records.empty()) throw acrag::InvalidArgument("no records in " + records_path);
  const auto report = acrag::aggregate(records);
  std::cout << (as_json ? acrag::report_to_json(report) + "\n" : acrag::format_report(report));
  return 0;
}

int cmd_ablate(const std::string& grid_path, const std::string& config, const std::string& dataset,
               const std::string& index_dir, int repeats, const std::optional<std::string>& out, bool as_json) {
  const auto grid = acrag::load_sweep_grid(grid_path);
  const auto settings = acrag::load_settings(config);
  const auto tasks = acrag::load_tasks_jsonl_file(dataset);
  const auto loaded = load_index(index_dir);
  const acrag::Retriever retriever(*loaded.embedder, loaded.index);
  const auto backends = acrag::make_backends(settings);

  acrag::BenchmarkOptions options;
  options.repeats = repeats;
  options.parallelism = settings.parallelism;
  if (out) options.out_dir = *out;
  const auto rows = acrag::run_ablation(grid, settings, backends, tasks, retriever, options);
  if (out) {
    std::filesystem::create_directories(*out);
    std::ofstream(std::filesystem::path(*out) / "ablation.json") << acrag::ablation_to_json(rows) << '\n';
    std::ofstream(std::filesystem::path(*out) / "ablation.txt") << acrag::format_ablation(rows);
  }
  std::cout << (as_json ? acrag::ablation_to_json(rows) + "\n" : acrag::format_ablation(rows));
  return 0;
}

std::string score_text(const std::optional<double>& value) {
  if (!value) return "";
  if (std::isinf(*value)) return *value < 0 ? "-inf" : "inf";
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << *value;
  return out.str();
}

int cmd_trace_show(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw acrag::LoadError("cannot open trace " + path, 0);
  for (const auto& trace : acrag::traces_from_jsonl(in)) {
    std::cout << "task " << trace.task_id << " (" << trace.events.size() << " events)\n";
    for (const auto& e : trace.events) {
      std::cout << "  " << std::left << std::setw(20) << acrag::to_string(e.phase) << std::setw(4) << e.iteration
                << std::setw(10) << score_text(e.score) << std::setw(10) << score_text(e.threshold) << std::setw(10)
                << (e.decision ? std::string(acrag::to_string(*e.decision)) : std::string()) << e.payload_digest
                << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive collaborative retrieval engine"};
  app.require_subcommand(1);

  auto* index_cmd = app.add_subcommand("index", "Knowledge-base index operations");
  index_cmd->require_subcommand(1);
  auto* build_cmd = index_cmd->add_subcommand("build", "Chunk, embed and index a corpus");
  std::string corpus, index_out;
  int chunk_size = acrag::kDefaultChunkSize;
  std::size_t dim = 64;
  bool include_title = false;
  build_cmd->add_option("--corpus", corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--out", index_out, "Output index directory")->required();
  build_cmd->add_option("--chunk-size", chunk_size, "Tokens per chunk")->check(CLI::PositiveNumber);
  build_cmd->add_option("--dim", dim, "Hashing embedder dimension")->check(CLI::PositiveNumber);
  build_cmd->add_flag("--include-title", include_title, "Embed the title with each chunk");

  auto* run_cmd = app.add_subcommand("run", "Run a benchmark");
  std::string dataset, config, index_dir;
  int repeats = 1;
  std::optional<std::string> out;
  std::optional<std::size_t> parallelism;
  run_cmd->add_option("--dataset", dataset, "Task JSONL")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--config", config, "Engine config JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--index", index_dir, "Index directory")->required()->check(CLI::ExistingDirectory);
  run_cmd->add_option("--repeats", repeats, "Passes over the dataset")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out, "Directory for run artifacts");
  run_cmd->add_option("--parallelism", parallelism, "Concurrent sessions")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a records file");
  std::string records;
  bool as_json = false;
  eval_cmd->add_option("--records", records, "records.jsonl")->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--json", as_json, "Print the report as JSON");

  auto* ablate_cmd = app.add_subcommand("ablate", "Run a configuration sweep");
  std::string grid;
  ablate_cmd->add_option("--grid", grid, "Sweep grid JSON")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--config", config, "Base engine config JSON")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--dataset", dataset, "Task JSONL")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--index", index_dir, "Index directory")->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--repeats", repeats, "Passes per cell")->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--out", out, "Directory for per-cell artifacts and the table");
  ablate_cmd->add_flag("--json", as_json, "Print the table as JSON");

  auto* trace_cmd = app.add_subcommand("trace", "Session trace tools");
  trace_cmd->require_subcommand(1);
  auto* show_cmd = trace_cmd->add_subcommand("show", "Print a traces.jsonl file");
  std::string trace_file;
  show_cmd->add_option("file", trace_file, "traces.jsonl")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build_cmd) return cmd_index_build(corpus, index_out, chunk_size, dim, include_title);
    if (*run_cmd) return cmd_run(dataset, config, index_dir, repeats, out, parallelism);
    if (*eval_cmd) return cmd_eval(records, as_json);
    if (*ablate_cmd) return cmd_ablate(grid, config, dataset, index_dir, repeats, out, as_json);
    if (*show_cmd) return cmd_trace_show(trace_file);
  } catch (const acrag::LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return 3;
  } catch (const acrag::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 4;
  } catch (const acrag::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// SPDX-License-Identifier: Apache-2.0
//
// Subcommands behind the `cgl` binary. Each returns a process exit code:
// 0 success, 2 usage or data error, 3 numeric failure.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cgl/data.hpp"
#include "cgl/model.hpp"

namespace cgl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

struct RunConfig {
  std::filesystem::path ontology;
  std::filesystem::path dataset;
  std::filesystem::path out = ".";
  std::filesystem::path checkpoint;  // defaults to <out>/checkpoint
  std::filesystem::path history;     // patient history for predict / attention export

  ModelConfig model;
  bool task_set = false;
  bool lambda_set = false;
  GeneratorSpec generator;
  std::uint64_t seed = 0;
  std::vector<std::size_t> ks{20, 40};
  /// All zero: 60/10/30 of the loaded patients. Ignored when the dataset
  /// file carries split tags.
  SplitCounts split;
  std::size_t threads = 0;  // 0: CGL_THREADS or hardware threads
  std::size_t top = 0;      // predict rows; 0: first configured k
  std::string what;         // export kind
  bool patient_csv = false;

  /// Accepts run keys (paths, seed, ks, split_*, ...), model keys and
  /// `generator.<field>` keys. Throws ContractError for unknown keys.
  void set(const std::string& key, const std::string& value);
  /// `key = value` lines; `#` starts a comment.
  void load(std::istream& in);
  void load(const std::filesystem::path& path);

  void set_task(const std::string& name);
  /// no-hier | no-notes | no-ontology-weights | no-observation-graph
  void apply_ablation(const std::string& name);

  std::filesystem::path checkpoint_dir() const { return checkpoint.empty() ? out / "checkpoint" : checkpoint; }
  std::size_t thread_count() const;
};

std::vector<std::size_t> parse_ks(const std::string& text);

int cmd_generate(const RunConfig& config, std::ostream& log, std::ostream& err);
/// Writes <checkpoint>/, <out>/history.csv and <checkpoint>/splits.tsv.
int cmd_train(const RunConfig& config, std::ostream& log, std::ostream& err);
/// Writes <out>/report.tsv and, when requested, <out>/patients.csv.
int cmd_evaluate(const RunConfig& config, std::ostream& log, std::ostream& err);
/// Prints `rank,code,score` rows (diagnosis) or `probability` (hf).
int cmd_predict(const RunConfig& config, std::ostream& out, std::ostream& err);
/// Writes <out>/code_embeddings.csv or <out>/attention.csv.
int cmd_export(const RunConfig& config, std::ostream& log, std::ostream& err);

}  // namespace cgl

// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgl/commands.hpp"
#include "cgl/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cgl: collaborative graph learning on EHR data"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, task, ks, out, ontology, dataset, checkpoint, history, what;
  std::vector<std::string> ablations, overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, top;
  bool patient_csv = false;

  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--task", task, "diagnosis | hf");
  app.add_option("--ablation", ablations, "no-hier | no-notes | no-ontology-weights | no-observation-graph");
  app.add_option("--k", ks, "comma-separated recall cut-offs, e.g. 20,40");
  app.add_option("--out", out, "output directory");
  app.add_option("--ontology", ontology, "ontology edge file");
  app.add_option("--dataset", dataset, "JSONL dataset");
  app.add_option("--checkpoint", checkpoint, "checkpoint directory (default <out>/checkpoint)");
  app.add_option("--history", history, "patient history file for predict / attention export");
  app.add_option("--epochs", epochs, "training epochs");
  app.add_option("--top", top, "number of codes printed by predict");
  app.add_option("--set", overrides, "extra key=value setting (repeatable)");
  app.add_flag("--patient-csv", patient_csv, "evaluate: also write per-patient CSV");

  auto* generate = app.add_subcommand("generate", "write a synthetic ontology and dataset");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint plus history CSV");
  auto* evaluate = app.add_subcommand("evaluate", "score the validation and test splits");
  auto* predict = app.add_subcommand("predict", "top-k codes (or HF probability) for one patient history");
  auto* exporter = app.add_subcommand("export", "write code embeddings or note attention as CSV");
  exporter->add_option("what", what, "code-embeddings | attention")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cgl::kExitUsage;
  }

  cgl::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg.load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw cgl::ContractError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (!task.empty()) cfg.set_task(task);
    for (const auto& a : ablations) cfg.apply_ablation(a);
    if (!ks.empty()) cfg.ks = cgl::parse_ks(ks);
    if (!out.empty()) cfg.out = out;
    if (!ontology.empty()) cfg.ontology = ontology;
    if (!dataset.empty()) cfg.dataset = dataset;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (!history.empty()) cfg.history = history;
    if (epochs) cfg.model.epochs = *epochs;
    if (top) cfg.top = *top;
    if (patient_csv) cfg.patient_csv = true;
    if (!what.empty()) cfg.what = what;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cgl::kExitUsage;
  }

  if (*generate) return cgl::cmd_generate(cfg, std::cout, std::cerr);
  if (*train) return cgl::cmd_train(cfg, std::cout, std::cerr);
  if (*evaluate) return cgl::cmd_evaluate(cfg, std::cout, std::cerr);
  if (*predict) return cgl::cmd_predict(cfg, std::cout, std::cerr);
  return cgl::cmd_export(cfg, std::cout, std::cerr);
}

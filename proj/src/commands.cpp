// SPDX-License-Identifier: Apache-2.0
#include "cgl/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cgl/checkpoint.hpp"
#include "cgl/error.hpp"
#include "cgl/metrics.hpp"
#include "cgl/pipeline.hpp"
#include "cgl/trainer.hpp"

namespace cgl {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ContractError("setting '" + key + "' expects an integer, got '" + value + "'");
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ContractError("setting '" + key + "' expects a number, got '" + value + "'");
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const long long v = to_int(key, value);
  if (v < 0) throw ContractError("setting '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool set_generator(GeneratorSpec& g, const std::string& key, const std::string& v) {
  const std::map<std::string, int*> ints{{"levels", &g.levels},       {"roots", &g.roots},
                                         {"branching", &g.branching}, {"min_visits", &g.min_visits},
                                         {"max_visits", &g.max_visits}, {"min_codes", &g.min_codes},
                                         {"max_codes", &g.max_codes},   {"max_clusters_per_patient", &g.max_clusters_per_patient},
                                         {"min_words", &g.min_words},   {"max_words", &g.max_words}};
  const std::map<std::string, std::size_t*> sizes{{"patients", &g.patients},
                                                  {"clusters", &g.clusters},
                                                  {"cluster_size", &g.cluster_size},
                                                  {"vocab_size", &g.vocab_size}};
  const std::map<std::string, double*> reals{{"p_persist", &g.p_persist},
                                             {"p_noise", &g.p_noise},
                                             {"p_internal", &g.p_internal},
                                             {"p_background", &g.p_background}};
  if (auto it = ints.find(key); it != ints.end()) {
    *it->second = static_cast<int>(to_int(key, v));
  } else if (auto it2 = sizes.find(key); it2 != sizes.end()) {
    *it2->second = to_count(key, v);
  } else if (auto it3 = reals.find(key); it3 != reals.end()) {
    *it3->second = to_double(key, v);
  } else if (key == "hf_prefix") {
    g.hf_prefix = v;
  } else {
    return false;
  }
  return true;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericDomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

void require_path(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ContractError("missing " + what + " path");
  if (!fs::exists(p)) throw IoError(what + " '" + p.string() + "' does not exist");
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

bool has_tags(const EhrDataset& ds) {
  return std::any_of(ds.patients.begin(), ds.patients.end(), [](const Patient& p) { return p.split != Split::kNone; });
}

void assign_splits(EhrDataset& ds, const RunConfig& cfg) {
  if (has_tags(ds)) return;
  SplitCounts counts = cfg.split;
  if (counts.train + counts.valid + counts.test == 0) {
    const std::size_t n = ds.patients.size();
    counts.train = n * 6 / 10;
    counts.valid = n / 10;
    counts.test = n - counts.train - counts.valid;
  }
  split_dataset(ds, counts, cfg.seed);
}

void write_splits(const fs::path& path, const EhrDataset& ds) {
  auto out = open_out(path);
  for (const auto& p : ds.patients) out << p.id << '\t' << to_string(p.split) << '\n';
}

/// Applies a saved id -> split table; returns false when there is none.
bool read_splits(const fs::path& path, EhrDataset& ds) {
  std::ifstream in(path);
  if (!in) return false;
  std::map<std::string, Split> tags;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string tag = line.substr(tab + 1);
    tags[line.substr(0, tab)] = tag == "train" ? Split::kTrain : tag == "valid" ? Split::kValid
                                               : tag == "test"  ? Split::kTest
                                                                : Split::kNone;
  }
  for (auto& p : ds.patients) {
    auto it = tags.find(p.id);
    p.split = it == tags.end() ? Split::kNone : it->second;
  }
  return true;
}

std::vector<EncodedPatient> encode_split(const EhrDataset& ds, Split split, const OntologyTree& tree,
                                         const Vocabulary& vocab, const ModelConfig& cfg) {
  const auto patients = ds.in_split(split);
  const LabelSet labels = make_labels(patients, tree, cfg.hf_prefix);
  std::vector<EncodedPatient> out;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    EncodedPatient e = encode_history(patients[i]->id, patients[i]->feature_visits(), tree, vocab, kBetaEpsilon,
                                      cfg.idf);
    e.label_codes = labels.diagnosis[i];
    e.hf_label = labels.heart_failure[i];
    out.push_back(std::move(e));
  }
  return out;
}

EncodedPatient load_history(const RunConfig& cfg, const Checkpoint& ck) {
  require_path(cfg.history, "patient history");
  std::ifstream in(cfg.history);
  if (!in) throw IoError("cannot read " + cfg.history.string());
  const std::vector<Visit> visits = parse_history(in);
  return encode_history(cfg.history.stem().string(), visits, ck.tree, ck.vocab, kBetaEpsilon, ck.model.config().idf);
}

void check_task(const RunConfig& cfg, const Checkpoint& ck) {
  if (cfg.task_set && cfg.model.task != ck.model.config().task) {
    throw DataError("requested task '" + to_string(cfg.model.task) + "' but the checkpoint was trained for '" +
                    to_string(ck.model.config().task) + "'");
  }
}

}  // namespace

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const std::size_t k = to_count("k", item);
    if (k == 0) throw ContractError("k must be at least 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw ContractError("need at least one k");
  return ks;
}

void RunConfig::set_task(const std::string& name) {
  model.task = parse_task(name);
  task_set = true;
  if (!lambda_set) model.lambda = ModelConfig::default_lambda(model.task);
}

void RunConfig::apply_ablation(const std::string& name) {
  if (name == "no-hier") {
    model.use_hierarchical_embedding = false;
  } else if (name == "no-notes") {
    model.use_notes = false;
  } else if (name == "no-ontology-weights") {
    model.use_ontology_weights = false;
  } else if (name == "no-observation-graph") {
    model.use_observation_graph = false;
  } else if (name != "none") {
    throw ContractError("unknown ablation '" + name + "'");
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "ontology") {
    ontology = value;
  } else if (key == "dataset") {
    dataset = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "checkpoint") {
    checkpoint = value;
  } else if (key == "history") {
    history = value;
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(to_count(key, value));
  } else if (key == "k" || key == "ks") {
    ks = parse_ks(value);
  } else if (key == "split_train") {
    split.train = to_count(key, value);
  } else if (key == "split_valid") {
    split.valid = to_count(key, value);
  } else if (key == "split_test") {
    split.test = to_count(key, value);
  } else if (key == "threads") {
    threads = to_count(key, value);
  } else if (key == "top") {
    top = to_count(key, value);
  } else if (key == "what") {
    what = value;
  } else if (key == "patient_csv") {
    patient_csv = value == "true" || value == "1";
  } else if (key == "ablation") {
    apply_ablation(value);
  } else if (key == "task") {
    set_task(value);
  } else if (key.rfind("generator.", 0) == 0) {
    if (!set_generator(generator, key.substr(10), value)) throw ContractError("unknown setting '" + key + "'");
  } else if (model.set(key, value)) {
    if (key == "lambda") lambda_set = true;
  } else {
    throw ContractError("unknown setting '" + key + "'");
  }
}

void RunConfig::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  load(in);
}

std::size_t RunConfig::thread_count() const { return threads > 0 ? threads : default_threads(); }

int cmd_generate(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const SyntheticData data = generate_synthetic(cfg.generator, cfg.seed);
    write_synthetic(data, cfg.generator, cfg.seed, cfg.out);
    log << "wrote " << data.dataset.patients.size() << " patients to " << cfg.out.string() << '\n'
        << "avg codes per visit " << fmt(data.stats.avg_codes_per_visit) << " (reference corpus "
        << kReferenceCodesPerVisit << ")\n"
        << "cluster/label mutual information " << fmt(data.stats.cluster_label_mutual_information) << " nats\n";
    return kExitOk;
  });
}

int cmd_train(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    require_path(cfg.ontology, "ontology");
    require_path(cfg.dataset, "dataset");
    const OntologyTree raw = OntologyTree::load(cfg.ontology);
    EhrDataset ds = load_dataset(cfg.dataset, &raw);
    assign_splits(ds, cfg);
    const PreparedData data = prepare(ds, raw, cfg.model.prepare_options());
    const GraphTensors graph = GraphTensors::from(data, cfg.model.use_observation_graph);
    CglModel model(cfg.model, ModelDims::from(data.tree, data.train.size(), data.vocab.size()), cfg.seed);

    TrainOptions opts;
    opts.ks = cfg.ks;
    opts.seed = cfg.seed;
    opts.threads = cfg.thread_count();
    opts.on_epoch = [&](std::size_t epoch, double loss) { log << "epoch " << epoch << " loss " << fmt(loss) << '\n'; };
    const History history = train(model, data, graph, opts);

    const fs::path dir = cfg.checkpoint_dir();
    save_checkpoint(dir, model, data.tree, data.vocab);
    write_splits(dir / "splits.tsv", ds);
    auto csv = open_out(cfg.out / "history.csv");
    history.write_csv(csv);
    log << "checkpoint " << dir.string() << '\n';
    return kExitOk;
  });
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    require_path(cfg.dataset, "dataset");
    const fs::path dir = cfg.checkpoint_dir();
    const Checkpoint ck = load_checkpoint(dir);
    check_task(cfg, ck);
    const ModelConfig& mc = ck.model.config();
    EhrDataset ds = load_dataset(cfg.dataset, &ck.tree);
    if (!read_splits(dir / "splits.tsv", ds)) assign_splits(ds, cfg);

    const auto valid = encode_split(ds, Split::kValid, ck.tree, ck.vocab, mc);
    const auto test = encode_split(ds, Split::kTest, ck.tree, ck.vocab, mc);
    if (test.empty()) throw DataError("test split is empty");

    metrics::EvalReport report;
    report.metadata = {{"task", to_string(mc.task)},
                       {"recall_averaging", "per-patient mean"},
                       {"onset_denominator", "all positives of the patient"},
                       {"valid_patients", std::to_string(valid.size())},
                       {"test_patients", std::to_string(test.size())}};
    const std::size_t threads = cfg.thread_count();
    evaluate_split(ck.model, valid, "valid", cfg.ks, threads, report);
    evaluate_split(ck.model, test, "test", cfg.ks, threads, report);
    auto out = open_out(cfg.out / "report.tsv");
    report.write(out);
    if (cfg.patient_csv) {
      auto csv = open_out(cfg.out / "patients.csv");
      write_patient_csv(csv, ck.model, test, score_patients(ck.model, test, threads), cfg.ks);
    }
    for (const auto& [name, value] : report.values) log << name << '\t' << fmt(value) << '\n';
    return kExitOk;
  });
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ck = load_checkpoint(cfg.checkpoint_dir());
    check_task(cfg, ck);
    const EncodedPatient patient = load_history(cfg, ck);
    const std::vector<double> scores = ck.model.predict(patient);
    if (ck.model.config().task == Task::kHeartFailure) {
      out << "probability\n" << fmt(scores[0]) << '\n';
      return kExitOk;
    }
    const std::size_t k = cfg.top > 0 ? cfg.top : cfg.ks.front();
    out << "rank,code,score\n";
    const auto top = metrics::top_k(scores, k);
    for (std::size_t r = 0; r < top.size(); ++r) {
      out << r + 1 << ',' << ck.tree.leaf_id(top[r]) << ',' << fmt(scores[top[r]]) << '\n';
    }
    return kExitOk;
  });
}

int cmd_export(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.what != "code-embeddings" && cfg.what != "attention") {
      throw ContractError("unknown export kind '" + cfg.what + "' (expected code-embeddings or attention)");
    }
    const Checkpoint ck = load_checkpoint(cfg.checkpoint_dir());
    if (cfg.what == "code-embeddings") {
      const ad::Tensor& h = ck.model.frozen_codes();
      const fs::path path = cfg.out / "code_embeddings.csv";
      auto out = open_out(path);
      out << "code,level1,level2,level3";
      for (std::size_t j = 0; j < h.cols(); ++j) out << ",h" << j;
      out << '\n';
      for (std::size_t i = 0; i < h.rows(); ++i) {
        const AncestorPath path_i = ck.tree.ancestor_path(i);
        out << ck.tree.leaf_id(i);
        for (std::size_t lv = 0; lv < 3; ++lv) out << ',' << (lv < path_i.ancestors.size() ? path_i.ancestors[lv] : "");
        for (std::size_t j = 0; j < h.cols(); ++j) out << ',' << fmt(h.at(i, j));
        out << '\n';
      }
      log << "wrote " << path.string() << '\n';
      return kExitOk;
    }
    if (!ck.model.config().use_notes) throw DataError("the checkpoint was trained without notes");
    const EncodedPatient patient = load_history(cfg, ck);
    const auto explanation = ck.model.explain(patient);
    const fs::path path = cfg.out / "attention.csv";
    auto out = open_out(path);
    out << "token,alpha,beta\n";
    for (std::size_t i = 0; i < explanation.note_attention.size(); ++i) {
      out << patient.note_words[i] << ',' << fmt(explanation.note_attention[i]) << ',' << fmt(patient.note_beta[i])
          << '\n';
    }
    log << "wrote " << path.string() << '\n';
    return kExitOk;
  });
}

}  // namespace cgl

// SPDX-License-Identifier: Apache-2.0
#include "cgl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

namespace cgl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename F>
double or_nan(F&& f) {
  try {
    return f();
  } catch (const DegenerateInputError&) {
    return kNaN;
  }
}

}  // namespace

std::size_t default_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CGL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
  }
  return n;
}

void History::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "");
      if (i == 0) {
        out << static_cast<std::size_t>(row[i]);
      } else {
        out << format_value(row[i]);
      }
    }
    out << '\n';
  }
}

std::vector<std::string> metric_names(Task task, std::span<const std::size_t> ks) {
  if (task == Task::kHeartFailure) return {"auc", "f1"};
  std::vector<std::string> names{"w_f1"};
  for (std::size_t k : ks) names.push_back("recall@" + std::to_string(k));
  return names;
}

metrics::ScoreMatrix score_patients(const CglModel& model, std::span<const EncodedPatient> patients,
                                    std::size_t threads) {
  metrics::ScoreMatrix scores(patients.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, patients.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < patients.size(); ++i) scores[i] = model.predict(patients[i]);
    return scores;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < patients.size(); i += workers) scores[i] = model.predict(patients[i]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scores;
}

metrics::LabelMatrix label_matrix(const CglModel& model, std::span<const EncodedPatient> patients) {
  const std::size_t width = model.config().output_width(model.dims().num_codes);
  metrics::LabelMatrix labels(patients.size(), std::vector<int>(width, 0));
  for (std::size_t i = 0; i < patients.size(); ++i) {
    if (model.config().task == Task::kHeartFailure) {
      labels[i][0] = patients[i].hf_label;
    } else {
      for (std::size_t c : patients[i].label_codes) labels[i].at(c) = 1;
    }
  }
  return labels;
}

void evaluate_split(const CglModel& model, std::span<const EncodedPatient> patients, const std::string& prefix,
                    std::span<const std::size_t> ks, std::size_t threads, metrics::EvalReport& report,
                    bool onset) {
  const Task task = model.config().task;
  const auto names = metric_names(task, ks);
  if (patients.empty()) {
    for (const auto& n : names) report.set(prefix + "_" + n, kNaN);
    return;
  }
  const metrics::ScoreMatrix scores = score_patients(model, patients, threads);
  const metrics::LabelMatrix labels = label_matrix(model, patients);
  if (task == Task::kHeartFailure) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s.push_back(scores[i][0]);
      y.push_back(labels[i][0]);
    }
    report.set(prefix + "_auc", or_nan([&] { return metrics::auc(s, y); }));
    report.set(prefix + "_f1", metrics::binary_f1(s, y));
    return;
  }
  report.set(prefix + "_w_f1", or_nan([&] { return metrics::weighted_f1(scores, labels); }));
  for (std::size_t k : ks) {
    const auto r = metrics::recall_at_k(scores, labels, k);
    report.set(prefix + "_recall@" + std::to_string(k), r.patients ? r.value : kNaN);
  }
  if (!onset) return;
  std::vector<std::set<std::size_t>> history;
  for (const auto& p : patients) history.push_back(p.history);
  for (std::size_t k : ks) {
    const auto o = metrics::onset_split_recall(scores, labels, history, k);
    const std::string suffix = "@" + std::to_string(k);
    report.set(prefix + "_occurred_recall" + suffix, o.occurred_patients ? o.occurred : kNaN);
    report.set(prefix + "_new_onset_recall" + suffix, o.new_onset_patients ? o.new_onset : kNaN);
  }
}

void write_patient_csv(std::ostream& out, const CglModel& model, std::span<const EncodedPatient> patients,
                       const metrics::ScoreMatrix& scores, std::span<const std::size_t> ks) {
  if (model.config().task == Task::kHeartFailure) {
    out << "patient,label,probability\n";
    for (std::size_t i = 0; i < patients.size(); ++i) {
      out << patients[i].id << ',' << patients[i].hf_label << ',' << format_value(scores[i][0]) << '\n';
    }
    return;
  }
  out << "patient,positives";
  for (std::size_t k : ks) out << ",recall@" << k;
  out << '\n';
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const auto& pos = patients[i].label_codes;
    out << patients[i].id << ',' << pos.size();
    for (std::size_t k : ks) {
      const auto top = metrics::top_k(scores[i], k);
      std::size_t hits = 0;
      for (std::size_t c : top) hits += std::count(pos.begin(), pos.end(), c) > 0;
      out << ',' << (pos.empty() ? std::string("nan") : format_value(static_cast<double>(hits) / pos.size()));
    }
    out << '\n';
  }
}

double dataset_loss(CglModel& model, std::span<const EncodedPatient> patients, const GraphTensors& graph) {
  if (patients.empty()) throw ContractError("loss over an empty split");
  ad::Tape tape;
  ad::Var codes = model.code_representations(tape, graph, ad::Mode::kTrain, false, false);
  std::vector<const EncodedPatient*> ptrs;
  for (const auto& p : patients) ptrs.push_back(&p);
  return model.batch_loss(tape, codes, ptrs, false).value()[0];
}

History train(CglModel& model, const PreparedData& data, const GraphTensors& graph, const TrainOptions& options) {
  const ModelConfig& cfg = model.config();
  if (data.train.empty()) throw ContractError("training split is empty");
  if (cfg.epochs == 0) throw ContractError("training needs at least one epoch");
  History history;
  history.columns = {"epoch", "train_loss"};
  for (const auto& n : metric_names(cfg.task, options.ks)) history.columns.push_back("valid_" + n);

  Rng rng(options.seed ^ kShuffleStream);
  Adam adam(cfg.learning_rate);
  const auto params = model.parameters();
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const EncodedPatient*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data.train[order[i]]);

      ad::Tape tape;
      ad::Var codes = model.code_representations(tape, graph, ad::Mode::kTrain, true, true);
      ad::Var loss = model.batch_loss(tape, codes, batch, true);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                              std::to_string(start));
      }
      for (ad::Parameter* p : params) p->zero_grad();
      tape.backward(loss);
      adam.step(params);
      total += value * static_cast<double>(batch.size());
    }
    const double mean_loss = total / static_cast<double>(order.size());

    model.freeze(graph);
    metrics::EvalReport report;
    evaluate_split(model, data.valid, "valid", options.ks, options.threads, report, false);
    std::vector<double> row{static_cast<double>(epoch), mean_loss};
    for (std::size_t i = 2; i < history.columns.size(); ++i) row.push_back(report.get(history.columns[i]));
    history.rows.push_back(std::move(row));
    if (options.on_epoch) options.on_epoch(epoch, mean_loss);
  }
  return history;
}

}  // namespace cgl

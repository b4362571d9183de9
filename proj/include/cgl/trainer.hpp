// SPDX-License-Identifier: Apache-2.0
//
// Training loop, batched scoring against frozen code embeddings and split
// evaluation reports.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cgl/metrics.hpp"
#include "cgl/model.hpp"
#include "cgl/pipeline.hpp"

namespace cgl {

/// Worker count for evaluation: CGL_THREADS when set, else hardware threads.
std::size_t default_threads();

struct History {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(std::ostream& out) const;
};

struct TrainOptions {
  std::vector<std::size_t> ks{20, 40};
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

/// Runs config().epochs epochs of Adam over shuffled mini-batches, freezing
/// H_c after every epoch to score the validation split. Throws
/// DivergenceError on a non-finite batch loss.
History train(CglModel& model, const PreparedData& data, const GraphTensors& graph, const TrainOptions& options);

/// Objective over a whole split with batch statistics from a full graph pass;
/// running statistics are left untouched.
double dataset_loss(CglModel& model, std::span<const EncodedPatient> patients, const GraphTensors& graph);

/// Frozen-path scores, one row per patient, computed on up to `threads` workers.
metrics::ScoreMatrix score_patients(const CglModel& model, std::span<const EncodedPatient> patients,
                                    std::size_t threads);

metrics::LabelMatrix label_matrix(const CglModel& model, std::span<const EncodedPatient> patients);

/// Metric names recorded per split, e.g. "w_f1" and "recall@20".
std::vector<std::string> metric_names(Task task, std::span<const std::size_t> ks);

/// Adds `<prefix>_<metric>` values for one split. Metrics that are undefined
/// on the split (no positives, one class) are reported as NaN.
void evaluate_split(const CglModel& model, std::span<const EncodedPatient> patients, const std::string& prefix,
                    std::span<const std::size_t> ks, std::size_t threads, metrics::EvalReport& report,
                    bool onset = true);

/// Per-patient CSV for a scored split.
void write_patient_csv(std::ostream& out, const CglModel& model, std::span<const EncodedPatient> patients,
                       const metrics::ScoreMatrix& scores, std::span<const std::size_t> ks);

}  // namespace cgl

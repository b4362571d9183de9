// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cgl::metrics {

using ScoreMatrix = std::vector<std::vector<double>>;  // patients x classes
using LabelMatrix = std::vector<std::vector<int>>;     // 0/1, same shape

/// Support-weighted mean of per-class F1 at `threshold` (score >= threshold
/// counts as a positive prediction). Classes without positive labels carry
/// zero weight.
double weighted_f1(const ScoreMatrix& scores, const LabelMatrix& labels, double threshold = 0.5);

/// Top-k classes by descending score, ties to the lower index.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k);

struct RecallResult {
  double value = 0.0;
  std::size_t patients = 0;  // included in the mean
  std::size_t excluded = 0;  // no positive labels
};

/// Per-patient |top-k ∩ positives| / |positives|, averaged over patients
/// with at least one positive.
RecallResult recall_at_k(const ScoreMatrix& scores, const LabelMatrix& labels, std::size_t k);

/// Mann-Whitney AUC with midranks for ties.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

double binary_f1(const std::vector<double>& scores, const std::vector<int>& labels, double threshold = 0.5);

struct OnsetRecall {
  double occurred = 0.0;
  double new_onset = 0.0;
  std::size_t occurred_patients = 0;
  std::size_t new_onset_patients = 0;
};

/// Splits each patient's positives into codes already seen in `history` and
/// new-onset codes. Each group's hits in the top-k are divided by the count of
/// all positives, then averaged over patients whose group is non-empty.
OnsetRecall onset_split_recall(const ScoreMatrix& scores, const LabelMatrix& labels,
                               const std::vector<std::set<std::size_t>>& history, std::size_t k);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};
Summary summarize(const std::vector<double>& values);

/// Ordered `name<TAB>value` report.
struct EvalReport {
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::pair<std::string, std::string>> metadata;

  void set(const std::string& name, double value);
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
  void write(std::ostream& out) const;
};

}  // namespace cgl::metrics

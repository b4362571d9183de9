// SPDX-License-Identifier: Apache-2.0
#include "cgl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "cgl/error.hpp"

namespace cgl::metrics {

namespace {

void check_shapes(const ScoreMatrix& scores, const LabelMatrix& labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores have " + std::to_string(scores.size()) + " rows, labels " +
                         std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != labels[i].size()) {
      throw DimensionError("row " + std::to_string(i) + ": " + std::to_string(scores[i].size()) + " scores vs " +
                           std::to_string(labels[i].size()) + " labels");
    }
  }
}

}  // namespace

double weighted_f1(const ScoreMatrix& scores, const LabelMatrix& labels, double threshold) {
  check_shapes(scores, labels);
  if (scores.empty()) throw DegenerateInputError("weighted F1 of zero samples");
  const std::size_t classes = scores.front().size();
  std::vector<double> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != classes) throw DimensionError("ragged score matrix");
    for (std::size_t c = 0; c < classes; ++c) {
      const bool pred = scores[i][c] >= threshold;
      const bool truth = labels[i][c] != 0;
      tp[c] += pred && truth;
      fp[c] += pred && !truth;
      fn[c] += !pred && truth;
    }
  }
  double support_total = 0.0, weighted = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double support = tp[c] + fn[c];
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    const double f1 = denom > 0 ? 2 * tp[c] / denom : 0.0;
    weighted += support * f1;
    support_total += support;
  }
  if (support_total == 0.0) throw DegenerateInputError("weighted F1 with zero total support");
  return weighted / support_total;
}

std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&scores](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

RecallResult recall_at_k(const ScoreMatrix& scores, const LabelMatrix& labels, std::size_t k) {
  if (k < 1) throw ContractError("recall@k needs k >= 1");
  check_shapes(scores, labels);
  RecallResult r;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto positives = std::count(labels[i].begin(), labels[i].end(), 1);
    if (positives == 0) {
      ++r.excluded;
      continue;
    }
    std::size_t hits = 0;
    for (std::size_t c : top_k(scores[i], k)) hits += labels[i][c] != 0;
    total += static_cast<double>(hits) / static_cast<double>(positives);
    ++r.patients;
  }
  r.value = r.patients ? total / static_cast<double>(r.patients) : 0.0;
  return r;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("AUC scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      ++pos;
      rank_sum += rank[i];
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0) throw DegenerateInputError("AUC needs both classes present");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double binary_f1(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) throw DimensionError("F1 scores and labels differ in length");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    tp += pred && labels[i];
    fp += pred && !labels[i];
    fn += !pred && labels[i];
  }
  const double denom = 2 * tp + fp + fn;
  return denom > 0 ? 2 * tp / denom : 0.0;
}

OnsetRecall onset_split_recall(const ScoreMatrix& scores, const LabelMatrix& labels,
                               const std::vector<std::set<std::size_t>>& history, std::size_t k) {
  if (k < 1) throw ContractError("recall@k needs k >= 1");
  check_shapes(scores, labels);
  if (history.size() != scores.size()) throw DimensionError("history rows differ from score rows");
  OnsetRecall out;
  double occ_total = 0.0, new_total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t positives = 0, occurred = 0;
    for (std::size_t c = 0; c < labels[i].size(); ++c) {
      if (!labels[i][c]) continue;
      ++positives;
      occurred += history[i].count(c);
    }
    if (positives == 0) continue;
    std::size_t occ_hits = 0, new_hits = 0;
    for (std::size_t c : top_k(scores[i], k)) {
      if (!labels[i][c]) continue;
      (history[i].count(c) ? occ_hits : new_hits) += 1;
    }
    const double p = static_cast<double>(positives);
    if (occurred > 0) {
      occ_total += static_cast<double>(occ_hits) / p;
      ++out.occurred_patients;
    }
    if (occurred < positives) {
      new_total += static_cast<double>(new_hits) / p;
      ++out.new_onset_patients;
    }
  }
  if (out.occurred_patients) out.occurred = occ_total / static_cast<double>(out.occurred_patients);
  if (out.new_onset_patients) out.new_onset = new_total / static_cast<double>(out.new_onset_patients);
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

void EvalReport::set(const std::string& name, double value) {
  for (auto& [n, v] : values) {
    if (n == name) {
      v = value;
      return;
    }
  }
  values.emplace_back(name, value);
}

double EvalReport::get(const std::string& name) const {
  for (const auto& [n, v] : values) {
    if (n == name) return v;
  }
  throw ContractError("report has no metric '" + name + "'");
}

bool EvalReport::has(const std::string& name) const {
  return std::any_of(values.begin(), values.end(), [&name](const auto& e) { return e.first == name; });
}

void EvalReport::write(std::ostream& out) const {
  out << std::setprecision(17);
  for (const auto& [k, v] : metadata) out << "# " << k << '\t' << v << '\n';
  for (const auto& [n, v] : values) out << n << '\t' << v << '\n';
}

}  // namespace cgl::metrics

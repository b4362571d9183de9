// SPDX-License-Identifier: Apache-2.0
// Brute-force reference implementations used to cross-check the library.
// They deliberately avoid the library's own helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "cgl/rng.hpp"

namespace cgl::oracle {

using Scores = std::vector<std::vector<double>>;
using Labels = std::vector<std::vector<int>>;

/// Confusion-matrix weighted F1. Returns NaN when no class has support.
inline double weighted_f1(const Scores& s, const Labels& y, double threshold = 0.5) {
  const std::size_t classes = s.empty() ? 0 : s[0].size();
  double weighted = 0.0, support_total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pred = s[i][c] >= threshold, truth = y[i][c] == 1;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const double support = tp + fn;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = support > 0 ? tp / support : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    weighted += support * f1;
    support_total += support;
  }
  return support_total > 0 ? weighted / support_total : std::nan("");
}

/// Top-k by a full stable sort on (score desc, index asc).
inline std::vector<std::size_t> ranking(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

inline double recall_at_k(const Scores& s, const Labels& y, std::size_t k) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto top = ranking(s[i], k);
    double pos = 0, hit = 0;
    for (std::size_t c = 0; c < y[i].size(); ++c) {
      if (y[i][c] != 1) continue;
      ++pos;
      hit += std::find(top.begin(), top.end(), c) != top.end();
    }
    if (pos == 0) continue;
    total += hit / pos;
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::nan("");
}

/// Trapezoidal area under the ROC curve, walking distinct thresholds.
inline double auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds(s.begin(), s.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg) += 1;
  double area = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
    }
    const double tpr = tp / pos, fpr = fp / neg;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

struct Onset {
  double occurred, new_onset;
};

inline Onset onset_recall(const Scores& s, const Labels& y, const std::vector<std::set<std::size_t>>& history,
                          std::size_t k) {
  double occ_total = 0, new_total = 0;
  std::size_t occ_n = 0, new_n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto top = ranking(s[i], k);
    double pos = 0, occ = 0, occ_hit = 0, fresh = 0, fresh_hit = 0;
    for (std::size_t c = 0; c < y[i].size(); ++c) {
      if (y[i][c] != 1) continue;
      ++pos;
      const bool hit = std::find(top.begin(), top.end(), c) != top.end();
      if (history[i].count(c)) {
        ++occ;
        occ_hit += hit;
      } else {
        ++fresh;
        fresh_hit += hit;
      }
    }
    if (occ > 0) {
      occ_total += occ_hit / pos;
      ++occ_n;
    }
    if (fresh > 0) {
      new_total += fresh_hit / pos;
      ++new_n;
    }
  }
  return {occ_n ? occ_total / occ_n : std::nan(""), new_n ? new_total / new_n : std::nan("")};
}

/// Random multi-label instance; `coarse` rounds scores to create ties.
inline void random_instance(Rng& rng, std::size_t patients, std::size_t classes, bool coarse, Scores& s,
                            Labels& y) {
  s.assign(patients, std::vector<double>(classes));
  y.assign(patients, std::vector<int>(classes));
  for (std::size_t i = 0; i < patients; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      double v = rng.uniform();
      if (coarse) v = std::round(v * 4.0) / 4.0;
      s[i][c] = v;
      y[i][c] = rng.bernoulli(0.3) ? 1 : 0;
    }
  }
}

/// Plain-arithmetic TF-IDF targets for one note over a corpus of documents.
inline std::vector<double> tfidf(const std::vector<std::string>& note, const std::vector<std::vector<std::string>>& docs,
                                 double eps) {
  std::vector<double> raw;
  for (const auto& w : note) {
    double count = 0;
    for (const auto& x : note) count += x == w;
    double df = 0;
    for (const auto& d : docs) df += std::find(d.begin(), d.end(), w) != d.end();
    const double idf = df > 0 ? std::log(static_cast<double>(docs.size()) / df) : 0.0;
    raw.push_back(count / static_cast<double>(note.size()) * idf);
  }
  const double mx = raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end());
  for (double& r : raw) r = std::clamp(mx > 0 ? r / mx : 0.0, eps, 1.0 - eps);
  return raw;
}

}  // namespace cgl::oracle

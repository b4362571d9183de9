// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cgl {

inline constexpr std::size_t kMaxNoteTokens = 50000;

/// Lowercases, splits on runs of non-alphanumeric bytes, keeps the first
/// `max_tokens` tokens.
std::vector<std::string> tokenize(std::string_view raw, std::size_t max_tokens = kMaxNoteTokens);

enum class IdfVariant {
  kPlain,   // ln(D / df)
  kSmooth,  // ln((1 + D) / (1 + df)) + 1
};

/// Word index (lexicographic) with per-word document frequency.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Each element of `documents` is one document's token sequence.
  static Vocabulary fit(const std::vector<std::vector<std::string>>& documents);
  static Vocabulary from_entries(std::vector<std::string> words, std::vector<std::size_t> dfs, std::size_t documents);

  std::size_t size() const { return words_.size(); }
  std::size_t documents() const { return documents_; }
  std::optional<std::size_t> index(const std::string& word) const;
  const std::string& word(std::size_t i) const { return words_[i]; }
  /// 0 for words outside the vocabulary.
  std::size_t df(const std::string& word) const;
  std::size_t df(std::size_t index) const { return dfs_[index]; }

  /// `word<TAB>index<TAB>df` per line.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in, std::size_t documents);

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> dfs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t documents_ = 0;
};

inline constexpr double kBetaEpsilon = 1e-6;

/// Per-token TF-IDF targets for one note: tf = count / length, idf from the
/// vocabulary (unseen words get idf 0), divided by the note's maximum score,
/// then clamped to [eps, 1 - eps]. Pass eps = 0 for the unclamped weights.
std::vector<double> tfidf_beta(const std::vector<std::string>& note, const Vocabulary& vocab,
                               double eps = kBetaEpsilon, IdfVariant variant = IdfVariant::kPlain);

}  // namespace cgl

// SPDX-License-Identifier: Apache-2.0
#include "cgl/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cgl/error.hpp"

namespace cgl {

std::vector<std::string> tokenize(std::string_view raw, std::size_t max_tokens) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      if (tokens.size() == max_tokens) return tokens;
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty() && tokens.size() < max_tokens) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary Vocabulary::fit(const std::vector<std::vector<std::string>>& documents) {
  if (documents.empty()) throw DataError("cannot fit a vocabulary on an empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& w : seen) ++df[w];
  }
  std::vector<std::string> words;
  std::vector<std::size_t> dfs;
  for (auto& [w, n] : df) {
    words.push_back(w);
    dfs.push_back(n);
  }
  return from_entries(std::move(words), std::move(dfs), documents.size());
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> words, std::vector<std::size_t> dfs,
                                    std::size_t documents) {
  if (words.size() != dfs.size()) throw ContractError("vocabulary words and frequencies differ in length");
  Vocabulary v;
  v.words_ = std::move(words);
  v.dfs_ = std::move(dfs);
  v.documents_ = documents;
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (v.dfs_[i] > documents) throw DataError("document frequency of '" + v.words_[i] + "' exceeds corpus size");
    if (!v.index_.emplace(v.words_[i], i).second) throw DataError("duplicate vocabulary word '" + v.words_[i] + "'");
  }
  return v;
}

std::optional<std::size_t> Vocabulary::index(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::df(const std::string& word) const {
  auto i = index(word);
  return i ? dfs_[*i] : 0;
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << i << '\t' << dfs_[i] << '\n';
}

Vocabulary Vocabulary::load(std::istream& in, std::size_t documents) {
  std::vector<std::string> words;
  std::vector<std::size_t> dfs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string word, index, df;
    if (!std::getline(ss, word, '\t') || !std::getline(ss, index, '\t') || !std::getline(ss, df, '\t')) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": expected word<TAB>index<TAB>df");
    }
    try {
      if (std::stoull(index) != words.size()) {
        throw ParseError("vocabulary line " + std::to_string(line_no) + ": indices must be dense and ordered");
      }
      dfs.push_back(std::stoull(df));
    } catch (const std::logic_error&) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": bad number");
    }
    words.push_back(word);
  }
  return from_entries(std::move(words), std::move(dfs), documents);
}

std::vector<double> tfidf_beta(const std::vector<std::string>& note, const Vocabulary& vocab, double eps,
                               IdfVariant variant) {
  if (note.empty()) return {};
  std::map<std::string, std::size_t> counts;
  for (const auto& w : note) ++counts[w];
  const double length = static_cast<double>(note.size());
  const double docs = static_cast<double>(vocab.documents());
  std::map<std::string, double> raw;
  double max_raw = 0.0;
  for (const auto& [w, c] : counts) {
    const std::size_t df = vocab.df(w);
    double idf = 0.0;
    if (df > 0) {
      idf = variant == IdfVariant::kPlain ? std::log(docs / static_cast<double>(df))
                                          : std::log((1.0 + docs) / (1.0 + static_cast<double>(df))) + 1.0;
    }
    const double score = static_cast<double>(c) / length * idf;
    raw[w] = score;
    max_raw = std::max(max_raw, score);
  }
  std::vector<double> beta;
  beta.reserve(note.size());
  for (const auto& w : note) {
    const double b = max_raw > 0.0 ? raw[w] / max_raw : 0.0;
    beta.push_back(std::clamp(b, eps, 1.0 - eps));
  }
  return beta;
}

}  // namespace cgl

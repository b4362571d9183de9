// SPDX-License-Identifier: Apache-2.0
#include "cgl/graphs.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <utility>

#include "cgl/error.hpp"

namespace cgl {

int CooMatrix::at(std::size_t r, std::size_t c) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(r, c), [](const Entry& e, const auto& key) {
    return std::make_pair(e.row, e.col) < key;
  });
  return (it != entries.end() && it->row == r && it->col == c) ? it->value : 0;
}

ad::Tensor CooMatrix::dense() const {
  ad::Tensor t(ad::Shape{rows, cols}, 0.0);
  for (const auto& e : entries) t.at(e.row, e.col) = e.value;
  return t;
}

void export_coo(const CooMatrix& m, std::ostream& out) {
  for (const auto& e : m.entries) out << e.row << ' ' << e.col << ' ' << e.value << '\n';
}

ad::Tensor ObservationGraph::dense() const {
  ad::Tensor t(ad::Shape{rows.size(), num_codes}, 0.0);
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (std::size_t c : rows[u]) t.at(u, c) = 1.0;
  return t;
}

CooMatrix ObservationGraph::coo() const {
  CooMatrix m{rows.size(), num_codes, {}};
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (std::size_t c : rows[u]) m.entries.push_back({u, c, 1});
  return m;
}

namespace {

std::vector<std::size_t> resolve(const std::vector<std::string>& codes, const OntologyTree& tree) {
  std::vector<std::size_t> out;
  out.reserve(codes.size());
  for (const auto& c : codes) {
    auto leaf = tree.try_leaf_index(c);
    if (!leaf) throw DataError("code '" + c + "' has no leaf in the ontology index");
    out.push_back(*leaf);
  }
  return out;
}

}  // namespace

ObservationGraph build_observation(const EhrDataset& dataset, const OntologyTree& tree) {
  ObservationGraph g;
  g.num_codes = tree.num_leaves();
  for (const Patient* p : dataset.in_split(Split::kTrain)) {
    std::set<std::size_t> codes;
    for (const Visit& v : p->feature_visits()) {
      for (std::size_t c : resolve(v.codes, tree)) codes.insert(c);
    }
    g.patient_index.emplace(p->id, g.rows.size());
    g.patient_ids.push_back(p->id);
    g.rows.emplace_back(codes.begin(), codes.end());
  }
  return g;
}

CooMatrix build_cooccurrence(const EhrDataset& dataset, const OntologyTree& tree, CooccurrenceScope scope) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  auto add_group = [&pairs](const std::set<std::size_t>& group) {
    for (std::size_t i : group)
      for (std::size_t j : group)
        if (i != j) pairs.emplace(i, j);
  };
  for (const Patient* p : dataset.in_split(Split::kTrain)) {
    std::set<std::size_t> patient_codes;
    for (const Visit& v : p->feature_visits()) {
      const auto codes = resolve(v.codes, tree);
      if (scope == CooccurrenceScope::kVisit) {
        add_group(std::set<std::size_t>(codes.begin(), codes.end()));
      } else {
        patient_codes.insert(codes.begin(), codes.end());
      }
    }
    if (scope == CooccurrenceScope::kPatient) add_group(patient_codes);
  }
  const std::size_t n = tree.num_leaves();
  CooMatrix b{n, n, {}};
  b.entries.reserve(pairs.size());
  for (const auto& [i, j] : pairs) b.entries.push_back({i, j, 1});
  return b;
}

std::size_t OntologyAdjacency::lca_nnz() const {
  return static_cast<std::size_t>(std::count_if(lca.begin(), lca.end(), [](int v) { return v != 0; }));
}

OntologyAdjacency build_ontology_adjacency(const OntologyTree& tree, const CooMatrix& cooccurrence) {
  const std::size_t n = tree.num_leaves();
  if (cooccurrence.rows != n || cooccurrence.cols != n) {
    throw DimensionError("co-occurrence matrix is " + std::to_string(cooccurrence.rows) + "x" +
                         std::to_string(cooccurrence.cols) + ", expected " + std::to_string(n) + "x" + std::to_string(n));
  }
  OntologyAdjacency adj;
  adj.size = n;
  adj.lca.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int k = tree.lca_level(i, j);
      adj.lca[i * n + j] = k;
      adj.lca[j * n + i] = k;
    }
  }
  adj.cooccurrence = cooccurrence;
  adj.masked = CooMatrix{n, n, {}};
  for (const auto& e : cooccurrence.entries) {
    if (e.row == e.col) throw ContractError("co-occurrence matrix must have a zero diagonal");
    if (cooccurrence.at(e.col, e.row) != e.value) throw ContractError("co-occurrence matrix must be symmetric");
    const int k = adj.lca[e.row * n + e.col] * e.value;
    if (k != 0) adj.masked.entries.push_back({e.row, e.col, k});
  }
  return adj;
}

}  // namespace cgl

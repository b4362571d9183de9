// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgl/autodiff.hpp"
#include "cgl/data.hpp"
#include "cgl/ontology.hpp"

namespace cgl {

/// Sparse square matrix in coordinate form, entries sorted by (row, col).
struct CooMatrix {
  struct Entry {
    std::size_t row, col;
    int value;
    bool operator==(const Entry&) const = default;
  };

  std::size_t rows = 0, cols = 0;
  std::vector<Entry> entries;

  std::size_t nnz() const { return entries.size(); }
  int at(std::size_t r, std::size_t c) const;
  ad::Tensor dense() const;
  bool operator==(const CooMatrix&) const = default;
};

/// `row col value` per line.
void export_coo(const CooMatrix& m, std::ostream& out);

/// Binary patient-code adjacency over training patients' feature visits.
struct ObservationGraph {
  std::size_t num_codes = 0;
  std::vector<std::string> patient_ids;
  std::unordered_map<std::string, std::size_t> patient_index;
  std::vector<std::vector<std::size_t>> rows;  // sorted code indices per patient

  std::size_t num_patients() const { return rows.size(); }
  ad::Tensor dense() const;
  CooMatrix coo() const;
};

ObservationGraph build_observation(const EhrDataset& dataset, const OntologyTree& tree);

enum class CooccurrenceScope { kVisit, kPatient };

/// Symmetric zero-diagonal indicator of codes appearing together, from
/// training patients' feature visits.
CooMatrix build_cooccurrence(const EhrDataset& dataset, const OntologyTree& tree,
                             CooccurrenceScope scope = CooccurrenceScope::kVisit);

struct OntologyAdjacency {
  std::size_t size = 0;
  std::vector<int> lca;  // dense |C| x |C| LCA levels, zero diagonal
  CooMatrix cooccurrence;
  CooMatrix masked;  // lca masked by co-occurrence

  int lca_at(std::size_t i, std::size_t j) const { return lca[i * size + j]; }
  std::size_t lca_nnz() const;
};

OntologyAdjacency build_ontology_adjacency(const OntologyTree& tree, const CooMatrix& cooccurrence);

}  // namespace cgl

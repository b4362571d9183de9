// SPDX-License-Identifier: Apache-2.0
//
// Turns a split dataset and a raw ontology into the index-based inputs the
// model consumes: padded tree, both graphs, note vocabulary and encoded
// patients per split.
#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cgl/autodiff.hpp"
#include "cgl/data.hpp"
#include "cgl/graphs.hpp"
#include "cgl/ontology.hpp"
#include "cgl/text.hpp"

namespace cgl {

struct EncodedPatient {
  std::string id;
  /// Feature visits as distinct leaf indices, in recorded order.
  std::vector<std::vector<std::size_t>> visits;
  /// Latest feature-visit note restricted to in-vocabulary tokens.
  std::vector<std::size_t> note_tokens;
  std::vector<std::string> note_words;
  std::vector<double> note_beta;
  /// Positive leaf indices of the label visit (empty for unlabeled input).
  std::vector<std::size_t> label_codes;
  int hf_label = 0;
  /// Every leaf index seen in the feature visits.
  std::set<std::size_t> history;
};

struct PrepareOptions {
  CooccurrenceScope cooccurrence_scope = CooccurrenceScope::kVisit;
  IdfVariant idf = IdfVariant::kPlain;
  double beta_epsilon = kBetaEpsilon;
  std::string hf_prefix = kDefaultHfPrefix;
};

struct PreparedData {
  OntologyTree tree;  // padded with virtual leaves
  ObservationGraph observation;
  OntologyAdjacency ontology;
  Vocabulary vocab;
  std::vector<EncodedPatient> train, valid, test;

  std::size_t num_codes() const { return tree.num_leaves(); }
  const std::vector<EncodedPatient>& split(Split s) const;
};

/// Requires at least one training patient. The vocabulary is fitted on the
/// training patients, one document per patient (all feature-visit notes).
PreparedData prepare(const EhrDataset& dataset, const OntologyTree& ontology, const PrepareOptions& options = {});

/// Encodes a history whose visits are all features (no label visit).
EncodedPatient encode_history(const std::string& id, std::span<const Visit> features, const OntologyTree& tree,
                              const Vocabulary& vocab, double beta_epsilon = kBetaEpsilon,
                              IdfVariant idf = IdfVariant::kPlain);

/// Dense graph inputs for the graph layers.
struct GraphTensors {
  ad::Tensor observation;    // |U| x |C|, zero when the observation graph is disabled
  ad::Tensor observation_t;  // |C| x |U|
  ad::Tensor levels;         // |C| x |C| masked LCA levels
  ad::Tensor support;        // |C| x |C| indicator of levels != 0

  static GraphTensors from(const PreparedData& data, bool use_observation_graph = true);
};

}  // namespace cgl

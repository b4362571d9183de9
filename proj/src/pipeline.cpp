// SPDX-License-Identifier: Apache-2.0
#include "cgl/pipeline.hpp"

#include "cgl/error.hpp"

namespace cgl {

const std::vector<EncodedPatient>& PreparedData::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValid: return valid;
    case Split::kTest: return test;
    default: throw ContractError("no encoded patients for split 'none'");
  }
}

namespace {

std::vector<std::string> document(const Patient& p) {
  std::vector<std::string> doc;
  for (const Visit& v : p.feature_visits()) doc.insert(doc.end(), v.note.begin(), v.note.end());
  return doc;
}

}  // namespace

EncodedPatient encode_history(const std::string& id, std::span<const Visit> features, const OntologyTree& tree,
                              const Vocabulary& vocab, double beta_epsilon, IdfVariant idf) {
  if (features.empty()) throw DataError("patient '" + id + "' has no feature visits");
  EncodedPatient e;
  e.id = id;
  for (const Visit& v : features) {
    std::vector<std::size_t> codes;
    std::set<std::size_t> seen;
    for (const auto& c : v.codes) {
      const std::size_t leaf = tree.leaf_index(c);
      if (seen.insert(leaf).second) codes.push_back(leaf);
    }
    if (codes.empty()) throw DegenerateInputError("patient '" + id + "' has a visit without codes");
    e.history.insert(codes.begin(), codes.end());
    e.visits.push_back(std::move(codes));
  }
  const auto& note = features.back().note;
  const std::vector<double> beta = tfidf_beta(note, vocab, beta_epsilon, idf);
  for (std::size_t i = 0; i < note.size(); ++i) {
    if (auto idx = vocab.index(note[i])) {
      e.note_tokens.push_back(*idx);
      e.note_words.push_back(note[i]);
      e.note_beta.push_back(beta[i]);
    }
  }
  return e;
}

PreparedData prepare(const EhrDataset& dataset, const OntologyTree& ontology, const PrepareOptions& options) {
  std::set<std::string> diagnosed;
  for (const auto& p : dataset.patients) {
    for (const auto& v : p.visits) diagnosed.insert(v.codes.begin(), v.codes.end());
  }
  PreparedData out;
  out.tree = ontology.pad_virtual_leaves(diagnosed);

  const auto train = dataset.in_split(Split::kTrain);
  if (train.empty()) throw DataError("no training patients");
  std::vector<std::vector<std::string>> docs;
  docs.reserve(train.size());
  for (const Patient* p : train) docs.push_back(document(*p));
  out.vocab = Vocabulary::fit(docs);

  out.observation = build_observation(dataset, out.tree);
  out.ontology = build_ontology_adjacency(out.tree, build_cooccurrence(dataset, out.tree, options.cooccurrence_scope));

  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto patients = dataset.in_split(s);
    const LabelSet labels = make_labels(patients, out.tree, options.hf_prefix);
    auto& dst = s == Split::kTrain ? out.train : s == Split::kValid ? out.valid : out.test;
    for (std::size_t i = 0; i < patients.size(); ++i) {
      EncodedPatient e = encode_history(patients[i]->id, patients[i]->feature_visits(), out.tree, out.vocab,
                                        options.beta_epsilon, options.idf);
      e.label_codes = labels.diagnosis[i];
      e.hf_label = labels.heart_failure[i];
      dst.push_back(std::move(e));
    }
  }
  return out;
}

GraphTensors GraphTensors::from(const PreparedData& data, bool use_observation_graph) {
  GraphTensors g;
  g.observation = data.observation.dense();
  if (!use_observation_graph) g.observation.fill(0.0);
  const std::size_t u = g.observation.rows(), c = g.observation.cols();
  g.observation_t = ad::Tensor(ad::Shape{c, u});
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = 0; j < c; ++j) g.observation_t.at(j, i) = g.observation.at(i, j);
  g.levels = data.ontology.masked.dense();
  g.support = ad::Tensor(g.levels.shape());
  for (std::size_t i = 0; i < g.levels.size(); ++i) g.support[i] = g.levels[i] != 0.0 ? 1.0 : 0.0;
  return g;
}

}  // namespace cgl

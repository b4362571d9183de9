// SPDX-License-Identifier: Apache-2.0
//
// Collaborative graph model: hierarchical code embeddings, patient/code graph
// layers over the observation and ontology graphs, visit pooling, GRU with
// location attention, TF-IDF-rectified note attention and a sigmoid head.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cgl/autodiff.hpp"
#include "cgl/data.hpp"
#include "cgl/graphs.hpp"
#include "cgl/pipeline.hpp"
#include "cgl/text.hpp"

namespace cgl {

struct ModelConfig {
  Task task = Task::kDiagnosis;
  std::size_t code_dim = 32;     // per-level code embedding width
  std::size_t patient_dim = 16;
  std::size_t word_dim = 16;
  std::vector<std::size_t> patient_hidden{32};   // widths after layers 1..L-1
  std::vector<std::size_t> code_hidden{64, 128};  // widths after layers 1..L
  std::size_t rnn_hidden = 200;
  double lambda = 0.3;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;

  bool use_hierarchical_embedding = true;
  bool use_notes = true;
  bool use_ontology_weights = true;
  bool use_observation_graph = true;
  /// Ontology weight parameters indexed by the aggregated (column) code;
  /// false indexes them by the receiving (row) code.
  bool ontology_weights_by_source = true;

  CooccurrenceScope cooccurrence_scope = CooccurrenceScope::kVisit;
  IdfVariant idf = IdfVariant::kPlain;
  double clamp_epsilon = 1e-6;
  std::string hf_prefix = kDefaultHfPrefix;

  std::size_t layers() const { return code_hidden.size(); }
  std::size_t output_width(std::size_t num_codes) const { return task == Task::kDiagnosis ? num_codes : 1; }
  void validate() const;
  PrepareOptions prepare_options() const;

  static double default_lambda(Task task) { return task == Task::kDiagnosis ? 0.3 : 0.1; }

  /// Flat key/value form used by config files and checkpoint manifests.
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  /// Returns false for keys that are not model settings.
  bool set(const std::string& key, const std::string& value);
};

/// Sizes the model needs that come from data rather than configuration.
struct ModelDims {
  std::size_t num_codes = 0;
  std::size_t num_patients = 0;
  std::size_t vocab_size = 0;
  std::vector<std::size_t> level_sizes;
  /// ancestor_rows[k][i]: row of leaf i's level-(k+1) ancestor in that level's table.
  std::vector<std::vector<std::size_t>> ancestor_rows;

  static ModelDims from(const OntologyTree& tree, std::size_t num_patients, std::size_t vocab_size);
};

struct PatientForward {
  ad::Var probability;       // |C| (diagnosis) or 1 (heart failure)
  ad::Var penalty;           // rectified note-attention penalty; valid iff has_penalty
  bool has_penalty = false;
  ad::Var visit_attention;   // T
  ad::Var note_attention;    // note length; valid iff has_note
  bool has_note = false;
  ad::Var visit_summary;     // o_v
  ad::Var note_summary;      // o_n
  ad::Var hidden_states;     // R, T x h
};

struct GraphLayerOutput {
  std::optional<ad::Var> patients;    // H_p^(l+1); absent at the last layer
  ad::Var codes;                      // H_c^(l+1)
  std::optional<ad::Var> patient_aggregate;  // Z_p^(l)
  ad::Var code_aggregate;                    // Z_c^(l)
};

/// -sum(a_i log b_i + (1 - a_i) log(1 - b_i)); zero for an empty note.
/// `beta` must already be clamped away from 0 and 1.
ad::Var rectified_penalty(ad::Tape& tape, const ad::Var& attention, std::span<const double> beta);

class CglModel {
 public:
  CglModel(ModelConfig config, ModelDims dims, std::uint64_t seed);

  CglModel(const CglModel&) = delete;
  CglModel& operator=(const CglModel&) = delete;
  CglModel(CglModel&&) = default;

  const ModelConfig& config() const { return config_; }
  const ModelDims& dims() const { return dims_; }

  std::vector<ad::Parameter*> parameters();
  ad::Parameter& parameter(const std::string& name);
  const ad::Parameter& parameter(const std::string& name) const;
  bool has_parameter(const std::string& name) const { return index_.count(name) > 0; }

  /// Every array persisted in a checkpoint: parameters, batch-norm running
  /// statistics and (when present) the frozen code embeddings.
  std::vector<std::pair<std::string, ad::Tensor*>> state_arrays();
  std::vector<std::pair<std::string, ad::BatchNormState*>> batchnorm_states();

  // ---- forward pieces ----------------------------------------------------

  /// Tracked parameters when `track`, constants otherwise.
  ad::Var use(ad::Tape& tape, const std::string& name, bool track = true);

  /// |C| x (K * code_dim) initial code features.
  ad::Var embed_codes(ad::Tape& tape, bool track = true);
  /// Ontology weight matrix masked to the support of the ontology graph.
  ad::Var ontology_weights(ad::Tape& tape, const GraphTensors& graph, bool track = true);
  GraphLayerOutput graph_layer(ad::Tape& tape, std::size_t layer, const std::optional<ad::Var>& patients,
                               const ad::Var& codes, const ad::Var& phi, const GraphTensors& graph, ad::Mode mode,
                               bool update_stats, bool track = true);
  /// Final code embeddings H_c from a full pass over both graphs.
  ad::Var code_representations(ad::Tape& tape, const GraphTensors& graph, ad::Mode mode, bool update_stats,
                               bool track = true);

  /// Temporal and note path for one patient on top of code embeddings.
  PatientForward patient_forward(ad::Tape& tape, const ad::Var& codes, const EncodedPatient& patient,
                                 bool track = true) const;
  /// Classification loss of one patient (mean binary cross-entropy).
  ad::Var classification_loss(ad::Tape& tape, const PatientForward& forward, const EncodedPatient& patient) const;
  /// Mean classification loss plus lambda times mean note penalty.
  ad::Var batch_loss(ad::Tape& tape, const ad::Var& codes, std::span<const EncodedPatient* const> batch,
                     bool track = true) const;

  // ---- inference ---------------------------------------------------------

  /// Caches H_c from an infer-mode graph pass.
  void freeze(const GraphTensors& graph);
  bool frozen() const { return frozen_codes_.has_value(); }
  const ad::Tensor& frozen_codes() const;
  void set_frozen_codes(ad::Tensor codes);

  /// Predicted probabilities from the frozen code embeddings; the patient
  /// embedding table is never read.
  std::vector<double> predict(const EncodedPatient& patient) const;

  struct Explanation {
    std::vector<double> probability;
    std::vector<double> visit_attention;
    std::vector<double> note_attention;
  };
  Explanation explain(const EncodedPatient& patient) const;

 private:
  ad::Parameter& add(const std::string& name, ad::Tensor value);
  ad::Var use_const(ad::Tape& tape, const std::string& name) const;

  ModelConfig config_;
  ModelDims dims_;
  std::vector<std::unique_ptr<ad::Parameter>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<ad::BatchNormState> bn_patients_;
  std::vector<ad::BatchNormState> bn_codes_;
  std::optional<ad::Tensor> frozen_codes_;
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(std::span<ad::Parameter* const> params);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<const ad::Parameter*, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace cgl

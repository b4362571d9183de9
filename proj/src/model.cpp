// SPDX-License-Identifier: Apache-2.0
#include "cgl/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

namespace cgl {

using ad::Mode;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

// ---- configuration --------------------------------------------------------

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw ContractError("setting '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error&) {
    throw ContractError("setting '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ContractError("setting '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_size(key, item));
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (code_dim == 0 || patient_dim == 0 || word_dim == 0 || rnn_hidden == 0) {
    throw ContractError("model dimensions must be positive");
  }
  if (code_hidden.empty()) throw ContractError("need at least one graph layer");
  if (patient_hidden.size() + 1 != code_hidden.size()) {
    throw ContractError("patient_hidden must list one width per graph layer except the last (" +
                        std::to_string(code_hidden.size() - 1) + " expected, got " +
                        std::to_string(patient_hidden.size()) + ")");
  }
  for (std::size_t w : code_hidden)
    if (w == 0) throw ContractError("graph layer widths must be positive");
  for (std::size_t w : patient_hidden)
    if (w == 0) throw ContractError("graph layer widths must be positive");
  if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  if (batch_size == 0) throw ContractError("batch size must be positive");
  if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5)) throw ContractError("clamp epsilon must lie in (0, 0.5)");
}

PrepareOptions ModelConfig::prepare_options() const {
  PrepareOptions o;
  o.cooccurrence_scope = cooccurrence_scope;
  o.idf = idf;
  o.hf_prefix = hf_prefix;
  return o;
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_key_values() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"task", to_string(task)},
      {"code_dim", std::to_string(code_dim)},
      {"patient_dim", std::to_string(patient_dim)},
      {"word_dim", std::to_string(word_dim)},
      {"patient_hidden", join(patient_hidden)},
      {"code_hidden", join(code_hidden)},
      {"rnn_hidden", std::to_string(rnn_hidden)},
      {"lambda", format_double(lambda)},
      {"learning_rate", format_double(learning_rate)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"use_hierarchical_embedding", b(use_hierarchical_embedding)},
      {"use_notes", b(use_notes)},
      {"use_ontology_weights", b(use_ontology_weights)},
      {"use_observation_graph", b(use_observation_graph)},
      {"ontology_weights_by_source", b(ontology_weights_by_source)},
      {"cooccurrence_scope", cooccurrence_scope == CooccurrenceScope::kVisit ? "visit" : "patient"},
      {"idf", idf == IdfVariant::kPlain ? "plain" : "smooth"},
      {"clamp_epsilon", format_double(clamp_epsilon)},
      {"hf_prefix", hf_prefix},
  };
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "task") {
    task = parse_task(value);
  } else if (key == "code_dim") {
    code_dim = parse_size(key, value);
  } else if (key == "patient_dim") {
    patient_dim = parse_size(key, value);
  } else if (key == "word_dim") {
    word_dim = parse_size(key, value);
  } else if (key == "patient_hidden") {
    patient_hidden = parse_sizes(key, value);
  } else if (key == "code_hidden") {
    code_hidden = parse_sizes(key, value);
  } else if (key == "rnn_hidden") {
    rnn_hidden = parse_size(key, value);
  } else if (key == "lambda") {
    lambda = parse_double(key, value);
  } else if (key == "learning_rate") {
    learning_rate = parse_double(key, value);
  } else if (key == "epochs") {
    epochs = parse_size(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_size(key, value);
  } else if (key == "use_hierarchical_embedding") {
    use_hierarchical_embedding = parse_bool(key, value);
  } else if (key == "use_notes") {
    use_notes = parse_bool(key, value);
  } else if (key == "use_ontology_weights") {
    use_ontology_weights = parse_bool(key, value);
  } else if (key == "use_observation_graph") {
    use_observation_graph = parse_bool(key, value);
  } else if (key == "ontology_weights_by_source") {
    ontology_weights_by_source = parse_bool(key, value);
  } else if (key == "cooccurrence_scope") {
    if (value == "visit") {
      cooccurrence_scope = CooccurrenceScope::kVisit;
    } else if (value == "patient") {
      cooccurrence_scope = CooccurrenceScope::kPatient;
    } else {
      throw ContractError("cooccurrence_scope must be visit or patient");
    }
  } else if (key == "idf") {
    if (value == "plain") {
      idf = IdfVariant::kPlain;
    } else if (value == "smooth") {
      idf = IdfVariant::kSmooth;
    } else {
      throw ContractError("idf must be plain or smooth");
    }
  } else if (key == "clamp_epsilon") {
    clamp_epsilon = parse_double(key, value);
  } else if (key == "hf_prefix") {
    hf_prefix = value;
  } else {
    return false;
  }
  return true;
}

ModelDims ModelDims::from(const OntologyTree& tree, std::size_t num_patients, std::size_t vocab_size) {
  ModelDims d;
  d.num_codes = tree.num_leaves();
  d.num_patients = num_patients;
  d.vocab_size = vocab_size;
  d.level_sizes = tree.level_sizes();
  d.ancestor_rows.assign(d.level_sizes.size(), std::vector<std::size_t>(d.num_codes));
  for (std::size_t i = 0; i < d.num_codes; ++i) {
    const AncestorPath path = tree.ancestor_path(i);
    for (std::size_t k = 0; k < path.level_rows.size(); ++k) d.ancestor_rows[k][i] = path.level_rows[k];
  }
  return d;
}

// ---- construction ---------------------------------------------------------

namespace {

Tensor glorot(Rng& rng, Shape shape) {
  const std::size_t fan_in = shape.at(0);
  const std::size_t fan_out = shape.size() > 1 ? shape[1] : 1;
  const double a = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(1, fan_in + fan_out)));
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-a, a);
  return t;
}

}  // namespace

CglModel::CglModel(ModelConfig config, ModelDims dims, std::uint64_t seed)
    : config_(std::move(config)), dims_(std::move(dims)) {
  config_.validate();
  const std::size_t levels = dims_.level_sizes.size();
  if (levels == 0 || dims_.ancestor_rows.size() != levels) throw ContractError("model dims need ancestor rows per level");
  Rng rng(seed);
  const std::size_t c = dims_.num_codes;
  const std::size_t base_width = levels * config_.code_dim;

  if (config_.use_hierarchical_embedding) {
    for (std::size_t k = 0; k < levels; ++k) {
      add("E_" + std::to_string(k + 1), glorot(rng, {dims_.level_sizes[k], config_.code_dim}));
    }
  } else {
    add("E_free", glorot(rng, {c, base_width}));
  }
  add("P", glorot(rng, {std::max<std::size_t>(dims_.num_patients, 1), config_.patient_dim}));
  if (config_.use_ontology_weights) {
    add("M", Tensor(Shape{c}, 0.0));
    add("Theta", Tensor(Shape{c}, 0.0));
  }

  std::vector<std::size_t> dp{config_.patient_dim};
  dp.insert(dp.end(), config_.patient_hidden.begin(), config_.patient_hidden.end());
  std::vector<std::size_t> dc{base_width};
  dc.insert(dc.end(), config_.code_hidden.begin(), config_.code_hidden.end());
  const std::size_t layers = config_.layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string s = std::to_string(l);
    const bool last = l + 1 == layers;
    if (!last) add("W_CU_" + s, glorot(rng, {dc[l], dp[l]}));
    add("W_UC_" + s, glorot(rng, {dp[l], dc[l]}));
    if (!last) {
      add("W_p_" + s, glorot(rng, {dp[l], dp[l + 1]}));
      add("bn_p_gamma_" + s, Tensor(Shape{dp[l + 1]}, 1.0));
      add("bn_p_beta_" + s, Tensor(Shape{dp[l + 1]}, 0.0));
      bn_patients_.emplace_back(dp[l + 1]);
    }
    add("W_c_" + s, glorot(rng, {dc[l], dc[l + 1]}));
    add("bn_c_gamma_" + s, Tensor(Shape{dc[l + 1]}, 1.0));
    add("bn_c_beta_" + s, Tensor(Shape{dc[l + 1]}, 0.0));
    bn_codes_.emplace_back(dc[l + 1]);
  }

  const std::size_t in = dc.back(), h = config_.rnn_hidden;
  for (const char* gate : {"z", "r", "h"}) {
    add(std::string("gru_W_") + gate, glorot(rng, {in, h}));
    add(std::string("gru_U_") + gate, glorot(rng, {h, h}));
    add(std::string("gru_b_") + gate, Tensor(Shape{h}, 0.0));
  }
  add("w_alpha", glorot(rng, {h}));
  if (config_.use_notes) {
    add("Q", glorot(rng, {std::max<std::size_t>(dims_.vocab_size, 1), config_.word_dim}));
    add("W_q", glorot(rng, {config_.word_dim, h}));
  }
  const std::size_t out = config_.output_width(c);
  add("W_out", glorot(rng, {2 * h, out}));
  add("b_out", Tensor(Shape{out}, 0.0));
}

ad::Parameter& CglModel::add(const std::string& name, Tensor value) {
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<ad::Parameter>(name, std::move(value)));
  return *params_.back();
}

std::vector<ad::Parameter*> CglModel::parameters() {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

ad::Parameter& CglModel::parameter(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("model has no parameter '" + name + "'");
  return *params_[it->second];
}

const ad::Parameter& CglModel::parameter(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("model has no parameter '" + name + "'");
  return *params_[it->second];
}

std::vector<std::pair<std::string, ad::BatchNormState*>> CglModel::batchnorm_states() {
  std::vector<std::pair<std::string, ad::BatchNormState*>> out;
  for (std::size_t l = 0; l < bn_patients_.size(); ++l) out.emplace_back("bn_p_" + std::to_string(l), &bn_patients_[l]);
  for (std::size_t l = 0; l < bn_codes_.size(); ++l) out.emplace_back("bn_c_" + std::to_string(l), &bn_codes_[l]);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> CglModel::state_arrays() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& p : params_) out.emplace_back(p->name, &p->value);
  for (auto& [name, state] : batchnorm_states()) {
    out.emplace_back(name + ".running_mean", &state->running_mean);
    out.emplace_back(name + ".running_var", &state->running_var);
  }
  if (frozen_codes_) out.emplace_back("H_c", &*frozen_codes_);
  return out;
}

// ---- forward --------------------------------------------------------------

Var CglModel::use(Tape& tape, const std::string& name, bool track) {
  return track ? tape.leaf(parameter(name)) : tape.constant(parameter(name).value);
}

Var CglModel::use_const(Tape& tape, const std::string& name) const { return tape.constant(parameter(name).value); }

Var CglModel::embed_codes(Tape& tape, bool track) {
  if (!config_.use_hierarchical_embedding) return use(tape, "E_free", track);
  std::vector<Var> parts;
  for (std::size_t k = 0; k < dims_.level_sizes.size(); ++k) {
    parts.push_back(ad::gather_rows(use(tape, "E_" + std::to_string(k + 1), track), dims_.ancestor_rows[k]));
  }
  return ad::concat(parts, 1);
}

Var CglModel::ontology_weights(Tape& tape, const GraphTensors& graph, bool track) {
  Var support = tape.constant(graph.support);
  if (!config_.use_ontology_weights) return support;
  Var m = use(tape, "M", track);
  Var theta = use(tape, "Theta", track);
  // Trailing-axis broadcast indexes M and Theta by column.
  if (config_.ontology_weights_by_source) {
    Var phi = ad::sigmoid(ad::add(ad::mul(tape.constant(graph.levels), m), theta));
    return ad::mul(phi, support);
  }
  Var levels_t = ad::transpose(tape.constant(graph.levels));
  Var phi_t = ad::sigmoid(ad::add(ad::mul(levels_t, m), theta));
  return ad::mul(ad::transpose(phi_t), support);
}

GraphLayerOutput CglModel::graph_layer(Tape& tape, std::size_t layer, const std::optional<Var>& patients,
                                       const Var& codes, const Var& phi, const GraphTensors& graph, Mode mode,
                                       bool update_stats, bool track) {
  const std::string s = std::to_string(layer);
  const bool last = layer + 1 == config_.layers();
  if (!patients) throw ContractError("graph layer needs patient features");
  GraphLayerOutput out;

  // Z_c = H_c + A_UC^T H_p W_UC + Phi H_c
  Var from_patients = ad::matmul(tape.constant(graph.observation_t), ad::matmul(*patients, use(tape, "W_UC_" + s, track)));
  out.code_aggregate = ad::add(ad::add(codes, from_patients), ad::matmul(phi, codes));
  Var zc = ad::matmul(out.code_aggregate, use(tape, "W_c_" + s, track));
  out.codes = ad::relu(ad::batchnorm(zc, use(tape, "bn_c_gamma_" + s, track), use(tape, "bn_c_beta_" + s, track),
                                     bn_codes_[layer], mode, update_stats));
  if (!last) {
    // Z_p = H_p + A_UC H_c W_CU
    Var from_codes = ad::matmul(tape.constant(graph.observation), ad::matmul(codes, use(tape, "W_CU_" + s, track)));
    out.patient_aggregate = ad::add(*patients, from_codes);
    Var zp = ad::matmul(*out.patient_aggregate, use(tape, "W_p_" + s, track));
    out.patients = ad::relu(ad::batchnorm(zp, use(tape, "bn_p_gamma_" + s, track),
                                          use(tape, "bn_p_beta_" + s, track), bn_patients_[layer], mode,
                                          update_stats));
  }
  return out;
}

Var CglModel::code_representations(Tape& tape, const GraphTensors& graph, Mode mode, bool update_stats, bool track) {
  if (graph.observation.rows() != dims_.num_patients || graph.observation.cols() != dims_.num_codes) {
    throw DimensionError("observation graph is " + ad::shape_str(graph.observation.shape()) + ", model expects (" +
                         std::to_string(dims_.num_patients) + "," + std::to_string(dims_.num_codes) + ")");
  }
  Var phi = ontology_weights(tape, graph, track);
  std::optional<Var> patients = use(tape, "P", track);
  Var codes = embed_codes(tape, track);
  for (std::size_t l = 0; l < config_.layers(); ++l) {
    GraphLayerOutput out = graph_layer(tape, l, patients, codes, phi, graph, mode, update_stats, track);
    patients = out.patients;
    codes = out.codes;
  }
  return codes;
}

PatientForward CglModel::patient_forward(Tape& tape, const Var& codes, const EncodedPatient& patient,
                                         bool track) const {
  if (patient.visits.empty()) throw ContractError("patient '" + patient.id + "' has no feature visits");
  auto p = [&](const std::string& name) {
    return track ? tape.leaf(const_cast<ad::Parameter&>(parameter(name))) : use_const(tape, name);
  };
  const std::size_t h = config_.rnn_hidden;
  PatientForward f;

  Var wz = p("gru_W_z"), uz = p("gru_U_z"), bz = p("gru_b_z");
  Var wr = p("gru_W_r"), ur = p("gru_U_r"), br = p("gru_b_r");
  Var wh = p("gru_W_h"), uh = p("gru_U_h"), bh = p("gru_b_h");
  Var one = tape.constant(Tensor::scalar(1.0));
  Var state = tape.constant(Tensor(Shape{h}, 0.0));
  std::vector<Var> states;
  for (const auto& visit : patient.visits) {
    if (visit.empty()) throw DegenerateInputError("visit without codes for patient '" + patient.id + "'");
    Var v = ad::reduce(ad::Reduce::kMean, ad::gather_rows(codes, visit), 0);
    Var z = ad::sigmoid(ad::add(ad::add(ad::matmul(v, wz), ad::matmul(state, uz)), bz));
    Var r = ad::sigmoid(ad::add(ad::add(ad::matmul(v, wr), ad::matmul(state, ur)), br));
    Var cand = ad::tanh(ad::add(ad::add(ad::matmul(v, wh), ad::matmul(ad::mul(r, state), uh)), bh));
    state = ad::add(ad::mul(ad::sub(one, z), state), ad::mul(z, cand));
    states.push_back(state);
  }
  f.hidden_states = ad::stack_rows(states);
  f.visit_attention = ad::softmax(ad::matmul(f.hidden_states, p("w_alpha")), 0);
  f.visit_summary = ad::matmul(f.visit_attention, f.hidden_states);

  f.note_summary = tape.constant(Tensor(Shape{h}, 0.0));
  if (config_.use_notes && !patient.note_tokens.empty()) {
    Var projected = ad::matmul(ad::gather_rows(p("Q"), patient.note_tokens), p("W_q"));
    f.note_attention = ad::softmax(ad::matmul(projected, f.visit_summary), 0);
    f.has_note = true;
    f.note_summary = ad::matmul(f.note_attention, projected);
    f.penalty = rectified_penalty(tape, f.note_attention, patient.note_beta);
    f.has_penalty = true;
  } else if (config_.use_notes) {
    f.penalty = tape.constant(Tensor::scalar(0.0));
    f.has_penalty = true;
  }

  Var summary = ad::concat({f.visit_summary, f.note_summary}, 0);
  f.probability = ad::sigmoid(ad::add(ad::matmul(summary, p("W_out")), p("b_out")));
  return f;
}

Var CglModel::classification_loss(Tape& tape, const PatientForward& forward, const EncodedPatient& patient) const {
  const std::size_t width = forward.probability.value().size();
  Tensor y(Shape{width}, 0.0);
  if (config_.task == Task::kDiagnosis) {
    if (width != dims_.num_codes) throw ContractError("label width differs from prediction width");
    for (std::size_t c : patient.label_codes) {
      if (c >= width) throw ContractError("label code index " + std::to_string(c) + " outside prediction width");
      y[c] = 1.0;
    }
  } else {
    y[0] = patient.hf_label ? 1.0 : 0.0;
  }
  Tensor y_neg(Shape{width});
  for (std::size_t i = 0; i < width; ++i) y_neg[i] = 1.0 - y[i];
  const double eps = config_.clamp_epsilon;
  Var prob = ad::clamp(forward.probability, eps, 1.0 - eps);
  Var one = tape.constant(Tensor::scalar(1.0));
  Var ll = ad::add(ad::mul(tape.constant(std::move(y)), ad::log(prob)),
                   ad::mul(tape.constant(std::move(y_neg)), ad::log(ad::sub(one, prob))));
  return ad::scale(ad::mean(ll), -1.0);
}

Var CglModel::batch_loss(Tape& tape, const Var& codes, std::span<const EncodedPatient* const> batch, bool track) const {
  if (batch.empty()) throw ContractError("empty batch");
  std::vector<Var> ce, penalties;
  for (const EncodedPatient* patient : batch) {
    PatientForward f = patient_forward(tape, codes, *patient, track);
    ce.push_back(ad::reshape(classification_loss(tape, f, *patient), Shape{1}));
    if (f.has_penalty) penalties.push_back(ad::reshape(f.penalty, Shape{1}));
  }
  Var loss = ad::mean(ad::concat(ce, 0));
  if (config_.use_notes && !penalties.empty() && config_.lambda != 0.0) {
    loss = ad::add(loss, ad::scale(ad::mean(ad::concat(penalties, 0)), config_.lambda));
  }
  return loss;
}

Var rectified_penalty(Tape& tape, const Var& attention, std::span<const double> beta) {
  const Tensor& a = attention.value();
  if (a.rank() != 1 || a.size() != beta.size()) {
    throw ContractError("note attention has shape " + ad::shape_str(a.shape()) + " but " +
                        std::to_string(beta.size()) + " targets were given");
  }
  if (beta.empty()) return tape.constant(Tensor::scalar(0.0));
  Tensor log_beta(Shape{beta.size()}), log_rest(Shape{beta.size()});
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!(beta[i] > 0.0 && beta[i] < 1.0)) throw NumericDomainError("note target outside (0, 1)");
    log_beta[i] = std::log(beta[i]);
    log_rest[i] = std::log1p(-beta[i]);
  }
  Var one = tape.constant(Tensor::scalar(1.0));
  Var terms = ad::add(ad::mul(attention, tape.constant(std::move(log_beta))),
                      ad::mul(ad::sub(one, attention), tape.constant(std::move(log_rest))));
  return ad::scale(ad::sum(terms), -1.0);
}

// ---- inference ------------------------------------------------------------

void CglModel::freeze(const GraphTensors& graph) {
  Tape tape;
  Var codes = code_representations(tape, graph, Mode::kInfer, false, false);
  frozen_codes_ = codes.value();
}

const Tensor& CglModel::frozen_codes() const {
  if (!frozen_codes_) throw StateError("code embeddings are not frozen; train or load a checkpoint first");
  return *frozen_codes_;
}

void CglModel::set_frozen_codes(Tensor codes) {
  if (codes.rank() != 2 || codes.rows() != dims_.num_codes || codes.cols() != config_.code_hidden.back()) {
    throw DimensionError("frozen code embeddings have shape " + ad::shape_str(codes.shape()));
  }
  frozen_codes_ = std::move(codes);
}

std::vector<double> CglModel::predict(const EncodedPatient& patient) const { return explain(patient).probability; }

CglModel::Explanation CglModel::explain(const EncodedPatient& patient) const {
  Tape tape;
  Var codes = tape.constant(frozen_codes());
  PatientForward f = patient_forward(tape, codes, patient, false);
  Explanation e;
  e.probability = f.probability.value().data();
  e.visit_attention = f.visit_attention.value().data();
  if (f.has_note) e.note_attention = f.note_attention.value().data();
  return e;
}

// ---- optimizer ------------------------------------------------------------

void Adam::step(std::span<ad::Parameter* const> params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (ad::Parameter* p : params) {
    auto& [m, v] = moments_[p];
    if (m.size() != p->value.size()) {
      m.assign(p->value.size(), 0.0);
      v.assign(p->value.size(), 0.0);
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p->grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p->value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace cgl

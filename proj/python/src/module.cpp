// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cgl/checkpoint.hpp"
#include "cgl/commands.hpp"
#include "cgl/error.hpp"
#include "cgl/metrics.hpp"
#include "cgl/ontology.hpp"
#include "cgl/text.hpp"
#include "cgl/trainer.hpp"

namespace py = pybind11;
using namespace cgl;

namespace {

using Settings = std::vector<std::pair<std::string, std::string>>;

RunConfig make_config(const Settings& settings) {
  RunConfig cfg;
  for (const auto& [k, v] : settings) cfg.set(k, v);
  return cfg;
}

using Command = int (*)(const RunConfig&, std::ostream&, std::ostream&);

// Runs a subcommand and returns what it wrote to its output stream. A non-zero
// exit raises CglError(message, exit_code).
std::string run(Command command, const Settings& settings, const py::object& error_type) {
  const RunConfig cfg = make_config(settings);
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = command(cfg, out, err);
  }
  if (code != kExitOk) {
    py::object e = error_type(err.str(), code);
    PyErr_SetObject(error_type.ptr(), e.ptr());
    throw py::error_already_set();
  }
  return out.str();
}

std::vector<Visit> visits_from_json(const std::string& json) {
  std::istringstream in(json);
  return parse_history(in);
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

class LoadedModel {
 public:
  explicit LoadedModel(const std::string& dir) : ck_(load_checkpoint(dir)) {}

  std::string task() const { return to_string(ck_.model.config().task); }
  std::vector<std::string> codes() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ck_.tree.num_leaves(); ++i) out.push_back(ck_.tree.leaf_id(i));
    return out;
  }
  py::array_t<double> code_embeddings() const {
    const ad::Tensor& h = ck_.model.frozen_codes();
    py::array_t<double> out({h.rows(), h.cols()});
    std::copy(h.data().begin(), h.data().end(), out.mutable_data());
    return out;
  }
  py::array_t<double> predict(const std::string& history_json) const {
    return to_array(ck_.model.predict(encode(history_json)));
  }
  py::dict explain(const std::string& history_json) const {
    const EncodedPatient p = encode(history_json);
    const auto e = ck_.model.explain(p);
    py::dict d;
    d["probability"] = to_array(e.probability);
    d["visit_attention"] = to_array(e.visit_attention);
    d["note_attention"] = to_array(e.note_attention);
    d["note_tokens"] = p.note_words;
    d["note_beta"] = to_array(p.note_beta);
    return d;
  }

 private:
  EncodedPatient encode(const std::string& history_json) const {
    const auto visits = visits_from_json(history_json);
    return encode_history("history", visits, ck_.tree, ck_.vocab, kBetaEpsilon, ck_.model.config().idf);
  }

  Checkpoint ck_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collaborative graph learning for diagnosis prediction";

  py::register_exception<Error>(m, "CglError");

  py::class_<OntologyTree>(m, "OntologyTree")
      .def_static("load", [](const std::string& path) { return OntologyTree::load(path); })
      .def_static("parse",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return OntologyTree::parse(in);
                  })
      .def_property_readonly("depth", &OntologyTree::depth)
      .def_property_readonly("num_leaves", &OntologyTree::num_leaves)
      .def("leaf_id", &OntologyTree::leaf_id)
      .def("leaf_index", &OntologyTree::leaf_index)
      .def("lca_level", &OntologyTree::lca_level);

  m.def("tokenize", [](const std::string& raw) { return tokenize(raw); });
  m.def(
      "tfidf_beta",
      [](const std::vector<std::string>& note, const std::vector<std::vector<std::string>>& documents, double eps) {
        return tfidf_beta(note, Vocabulary::fit(documents), eps);
      },
      py::arg("note"), py::arg("documents"), py::arg("eps") = kBetaEpsilon);

  m.def("weighted_f1", &metrics::weighted_f1, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def(
      "recall_at_k",
      [](const metrics::ScoreMatrix& s, const metrics::LabelMatrix& y, std::size_t k) {
        return metrics::recall_at_k(s, y, k).value;
      },
      py::arg("scores"), py::arg("labels"), py::arg("k"));
  m.def("auc", &metrics::auc, py::arg("scores"), py::arg("labels"));
  m.def(
      "onset_split_recall",
      [](const metrics::ScoreMatrix& s, const metrics::LabelMatrix& y,
         const std::vector<std::set<std::size_t>>& history, std::size_t k) {
        const auto r = metrics::onset_split_recall(s, y, history, k);
        return py::make_tuple(r.occurred, r.new_onset);
      },
      py::arg("scores"), py::arg("labels"), py::arg("history"), py::arg("k"));

  py::object command_error = m.attr("CglError");
  m.def("_generate", [command_error](const Settings& s) { return run(&cmd_generate, s, command_error); });
  m.def("_train", [command_error](const Settings& s) { return run(&cmd_train, s, command_error); });
  m.def("_evaluate", [command_error](const Settings& s) { return run(&cmd_evaluate, s, command_error); });
  m.def("_predict", [command_error](const Settings& s) { return run(&cmd_predict, s, command_error); });
  m.def("_export", [command_error](const Settings& s) { return run(&cmd_export, s, command_error); });

  py::class_<LoadedModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("task", &LoadedModel::task)
      .def_property_readonly("codes", &LoadedModel::codes)
      .def("code_embeddings", &LoadedModel::code_embeddings)
      .def("_predict", &LoadedModel::predict)
      .def("_explain", &LoadedModel::explain);
}

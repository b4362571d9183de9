// SPDX-License-Identifier: Apache-2.0
#include "cgl/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "cgl/error.hpp"
#include "cgl/rng.hpp"
#include "cgl/text.hpp"

namespace cgl {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
    default: return "none";
  }
}

std::string to_string(Task task) { return task == Task::kDiagnosis ? "diagnosis" : "hf"; }

Task parse_task(const std::string& name) {
  if (name == "diagnosis") return Task::kDiagnosis;
  if (name == "hf" || name == "heart-failure") return Task::kHeartFailure;
  throw ContractError("unknown task '" + name + "' (expected diagnosis or hf)");
}

std::vector<const Patient*> EhrDataset::in_split(Split split) const {
  std::vector<const Patient*> out;
  for (const auto& p : patients) {
    if (p.split == split) out.push_back(&p);
  }
  return out;
}

namespace {

std::vector<std::string> read_strings(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_string()) throw ParseError(what + " must contain strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Visit read_visit(const json& jv) {
  if (!jv.is_object()) throw ParseError("visit must be an object");
  Visit v;
  if (!jv.contains("codes")) throw ParseError("visit without 'codes'");
  v.codes = read_strings(jv.at("codes"), "'codes'");
  if (jv.contains("note")) {
    const json& note = jv.at("note");
    if (note.is_string()) {
      v.note = tokenize(note.get<std::string>());
    } else {
      v.note = read_strings(note, "'note'");
      if (v.note.size() > kMaxNoteTokens) v.note.resize(kMaxNoteTokens);
    }
  }
  return v;
}

json write_visit(const Visit& v) { return json{{"codes", v.codes}, {"note", v.note}}; }

}  // namespace

EhrDataset parse_dataset(std::istream& in, const OntologyTree* tree) {
  EhrDataset ds;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++ds.report.lines;
    Patient p;
    try {
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("id") || !j.at("id").is_string() || !j.contains("visits") ||
          !j.at("visits").is_array()) {
        throw ParseError("expected an object with string 'id' and array 'visits'");
      }
      p.id = j.at("id").get<std::string>();
      if (j.contains("split")) {
        const std::string tag = j.at("split").get<std::string>();
        if (tag == "train") {
          p.split = Split::kTrain;
        } else if (tag == "valid") {
          p.split = Split::kValid;
        } else if (tag == "test") {
          p.split = Split::kTest;
        } else if (tag != "none") {
          throw ParseError("unknown split tag '" + tag + "'");
        }
      }
      for (const auto& jv : j.at("visits")) {
        Visit v = read_visit(jv);
        if (v.codes.empty()) {
          ++ds.report.dropped_empty_visits;
          continue;
        }
        p.visits.push_back(std::move(v));
      }
    } catch (const json::exception& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(p.id).second) throw DataError("dataset line " + std::to_string(line_no) + ": duplicate patient id '" + p.id + "'");
    if (tree != nullptr) {
      for (const auto& v : p.visits) {
        for (const auto& c : v.codes) {
          if (!tree->find(c)) throw DataError("dataset line " + std::to_string(line_no) + ": unknown code '" + c + "'");
        }
      }
    }
    if (p.visits.size() < 2) {
      ++ds.report.rejected_short;
      continue;
    }
    ds.patients.push_back(std::move(p));
  }
  ds.report.loaded = ds.patients.size();
  return ds;
}

EhrDataset load_dataset(const std::filesystem::path& path, const OntologyTree* tree) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  return parse_dataset(in, tree);
}

void save_dataset(const EhrDataset& dataset, std::ostream& out) {
  for (const auto& p : dataset.patients) {
    json visits = json::array();
    for (const auto& v : p.visits) visits.push_back(write_visit(v));
    json record{{"id", p.id}, {"visits", visits}};
    if (p.split != Split::kNone) record["split"] = to_string(p.split);
    out << record.dump() << '\n';
  }
}

void save_dataset(const EhrDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  save_dataset(dataset, out);
}

std::vector<Visit> parse_history(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError("empty patient history");
  std::vector<Visit> visits;
  try {
    const json j = json::parse(text);
    const json& jv = j.is_object() && j.contains("visits") ? j.at("visits") : j;
    if (!jv.is_array()) throw ParseError("history must be a record with 'visits' or an array of visits");
    for (const auto& v : jv) {
      Visit visit = read_visit(v);
      if (!visit.codes.empty()) visits.push_back(std::move(visit));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("patient history: ") + e.what());
  }
  if (visits.empty()) throw DataError("patient history has no visits with codes");
  return visits;
}

void split_dataset(EhrDataset& dataset, const SplitCounts& counts, std::uint64_t seed) {
  const std::size_t n = dataset.patients.size();
  if (counts.train + counts.valid + counts.test > n) {
    throw ContractError("split counts " + std::to_string(counts.train) + "/" + std::to_string(counts.valid) + "/" +
                        std::to_string(counts.test) + " exceed " + std::to_string(n) + " patients");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  for (auto& p : dataset.patients) p.split = Split::kNone;
  for (std::size_t i = 0; i < n; ++i) {
    Split s = Split::kNone;
    if (i < counts.train) {
      s = Split::kTrain;
    } else if (i < counts.train + counts.valid) {
      s = Split::kValid;
    } else if (i < counts.train + counts.valid + counts.test) {
      s = Split::kTest;
    }
    dataset.patients[order[i]].split = s;
  }
}

LabelSet make_labels(std::span<const Patient* const> patients, const OntologyTree& tree, const std::string& hf_prefix) {
  LabelSet labels;
  for (const Patient* p : patients) {
    std::set<std::size_t> pos;
    int hf = 0;
    for (const auto& c : p->label_visit().codes) {
      pos.insert(tree.leaf_index(c));
      if (!hf_prefix.empty() && c.rfind(hf_prefix, 0) == 0) hf = 1;
    }
    labels.diagnosis.emplace_back(pos.begin(), pos.end());
    labels.heart_failure.push_back(hf);
  }
  return labels;
}

}  // namespace cgl

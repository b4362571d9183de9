// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cgl/ontology.hpp"

namespace cgl {

struct Visit {
  std::vector<std::string> codes;
  std::vector<std::string> note;

  bool operator==(const Visit&) const = default;
};

enum class Split { kNone, kTrain, kValid, kTest };

std::string to_string(Split split);

struct Patient {
  std::string id;
  std::vector<Visit> visits;
  Split split = Split::kNone;

  /// Every visit except the last one.
  std::span<const Visit> feature_visits() const { return {visits.data(), visits.size() - 1}; }
  const Visit& label_visit() const { return visits.back(); }
  /// Note of the most recent feature visit; this is the only note the model reads.
  const std::vector<std::string>& latest_note() const { return visits[visits.size() - 2].note; }
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t loaded = 0;
  std::size_t rejected_short = 0;      // fewer than 2 non-empty visits
  std::size_t dropped_empty_visits = 0;
};

struct EhrDataset {
  std::vector<Patient> patients;
  LoadReport report;

  std::vector<const Patient*> in_split(Split split) const;
};

/// One JSON object per line:
///   {"id": "...", "visits": [{"codes": [...], "note": [...] or "raw text"}, ...],
///    "split": "train" | "valid" | "test" (optional)}
/// Visits without codes are dropped and patients left with fewer than two
/// visits are rejected (both counted in the report). When `tree` is given,
/// every code must resolve in it.
EhrDataset parse_dataset(std::istream& in, const OntologyTree* tree = nullptr);
EhrDataset load_dataset(const std::filesystem::path& path, const OntologyTree* tree = nullptr);
void save_dataset(const EhrDataset& dataset, std::ostream& out);
void save_dataset(const EhrDataset& dataset, const std::filesystem::path& path);

/// A single patient's history (all visits are features, no label visit),
/// in the dataset record format. Used for prediction on new patients.
std::vector<Visit> parse_history(std::istream& in);

struct SplitCounts {
  std::size_t train = 0, valid = 0, test = 0;
};

/// Seeded, disjoint, patient-level assignment. Patients beyond the requested
/// counts keep Split::kNone.
void split_dataset(EhrDataset& dataset, const SplitCounts& counts, std::uint64_t seed);

enum class Task { kDiagnosis, kHeartFailure };
std::string to_string(Task task);
Task parse_task(const std::string& name);

inline const std::string kDefaultHfPrefix = "D0.0";

/// Diagnosis labels are multi-hot over the tree's leaves; heart-failure
/// labels are 1 iff the label visit has a code starting with `hf_prefix`.
struct LabelSet {
  std::vector<std::vector<std::size_t>> diagnosis;  // positive leaf indices per patient
  std::vector<int> heart_failure;
};

LabelSet make_labels(std::span<const Patient* const> patients, const OntologyTree& tree,
                     const std::string& hf_prefix = kDefaultHfPrefix);

// ---- synthetic generator --------------------------------------------------

struct GeneratorSpec {
  int levels = 5;
  int roots = 3;
  int branching = 3;
  std::size_t patients = 300;
  int min_visits = 2, max_visits = 5;
  int min_codes = 3, max_codes = 8;
  std::size_t clusters = 12;
  std::size_t cluster_size = 10;
  int max_clusters_per_patient = 2;
  double p_persist = 0.5;
  double p_noise = 0.05;
  double p_internal = 0.03;
  std::size_t vocab_size = 400;
  int min_words = 20, max_words = 60;
  double p_background = 0.5;
  std::string hf_prefix = kDefaultHfPrefix;
};

struct GeneratorStats {
  double avg_visits = 0.0;
  double avg_codes_per_visit = 0.0;
  double avg_words_per_note = 0.0;
  std::size_t distinct_codes = 0;
  std::size_t heart_failure_patients = 0;
  /// Mean over label codes of I(dominant cluster; code in label visit), in nats.
  double cluster_label_mutual_information = 0.0;
};

struct SyntheticData {
  std::vector<OntologyEdge> ontology;
  EhrDataset dataset;
  GeneratorStats stats;
  /// Dominant latent cluster per patient (ground truth, for diagnostics).
  std::vector<std::size_t> dominant_cluster;
};

/// Reference average codes per visit of the original clinical corpus, printed
/// next to the synthetic statistic for context.
inline constexpr double kReferenceCodesPerVisit = 13.27;

SyntheticData generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

/// Writes `ontology.tsv`, `dataset.jsonl` and `dataset.manifest` into `dir`.
void write_synthetic(const SyntheticData& data, const GeneratorSpec& spec, std::uint64_t seed,
                     const std::filesystem::path& dir);

}  // namespace cgl

// SPDX-License-Identifier: Apache-2.0
//
// Synthetic EHR data with planted structure: latent comorbidity clusters made
// of sibling leaves plus leaves from a second, unrelated subtree; patients mix
// one or more clusters; later visits keep earlier codes with probability
// p_persist and otherwise draw new codes from the same clusters; notes mix a
// shared background vocabulary with cluster-specific words.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>

#include "cgl/data.hpp"
#include "cgl/error.hpp"
#include "cgl/rng.hpp"

namespace cgl {

namespace {

struct Hierarchy {
  std::vector<OntologyEdge> edges;
  // Node ids per level (index 0 = level 1).
  std::vector<std::vector<std::string>> levels;
  std::map<std::string, std::vector<std::string>> leaves_under;
  std::map<std::string, std::string> parent;
};

Hierarchy build_hierarchy(const GeneratorSpec& spec) {
  Hierarchy h;
  h.levels.resize(static_cast<std::size_t>(spec.levels));
  for (int r = 0; r < spec.roots; ++r) {
    const std::string id = "D" + std::to_string(r);
    h.levels[0].push_back(id);
    h.edges.push_back({id, "", false});
  }
  for (std::size_t k = 1; k < h.levels.size(); ++k) {
    for (const auto& p : h.levels[k - 1]) {
      for (int b = 0; b < spec.branching; ++b) {
        const std::string id = p + "." + std::to_string(b);
        h.levels[k].push_back(id);
        h.edges.push_back({id, p, false});
        h.parent[id] = p;
      }
    }
  }
  for (const auto& leaf : h.levels.back()) {
    std::string cur = leaf;
    h.leaves_under[cur].push_back(leaf);
    while (h.parent.count(cur)) {
      cur = h.parent.at(cur);
      h.leaves_under[cur].push_back(leaf);
    }
  }
  return h;
}

void validate(const GeneratorSpec& s) {
  auto fail = [](const std::string& msg) { throw ContractError("infeasible generator spec: " + msg); };
  if (s.levels < 2) fail("need at least 2 levels");
  if (s.roots < 1 || s.branching < 1) fail("roots and branching must be positive");
  if (s.patients == 0) fail("need at least one patient");
  if (s.min_visits < 2 || s.max_visits < s.min_visits) fail("visit range must satisfy 2 <= min <= max");
  if (s.min_codes < 1 || s.max_codes < s.min_codes) fail("codes-per-visit range must satisfy 1 <= min <= max");
  if (s.clusters == 0 || s.cluster_size == 0) fail("need at least one non-empty cluster");
  if (s.max_clusters_per_patient < 1) fail("patients need at least one cluster");
  if (s.min_words < 0 || s.max_words < s.min_words) fail("words-per-note range must satisfy 0 <= min <= max");
  if (s.vocab_size < s.clusters + 1) fail("vocabulary must hold a background word plus one word per cluster");
  const double leaves = s.roots * std::pow(static_cast<double>(s.branching), s.levels - 1);
  if (static_cast<double>(s.max_codes) > leaves) fail("more codes per visit than leaves in the tree");
  if (leaves > 1e6) fail("tree too large");
  for (double p : {s.p_persist, s.p_noise, s.p_internal, s.p_background}) {
    if (p < 0.0 || p > 1.0) fail("probabilities must lie in [0, 1]");
  }
}

}  // namespace

SyntheticData generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  Hierarchy h = build_hierarchy(spec);
  const auto& leaves = h.levels.back();
  const std::size_t anchor_level = spec.levels >= 3 ? static_cast<std::size_t>(spec.levels - 3) : 0;
  const auto& anchors = h.levels[anchor_level];

  auto pick_from = [&](const std::vector<std::string>& pool, std::size_t n, std::set<std::string>& into) {
    std::vector<std::string> shuffled = pool;
    rng.shuffle(shuffled);
    for (std::size_t i = 0; i < shuffled.size() && i < n; ++i) into.insert(shuffled[i]);
  };

  // Clusters: a block of siblings/cousins plus a block from another subtree.
  std::vector<std::vector<std::string>> clusters(spec.clusters);
  for (std::size_t c = 0; c < spec.clusters; ++c) {
    std::string anchor = anchors[rng.below(anchors.size())];
    if (c == 0 && h.leaves_under.count(spec.hf_prefix)) anchor = spec.hf_prefix;
    const std::string other = anchors[rng.below(anchors.size())];
    std::set<std::string> members;
    const std::size_t own = (spec.cluster_size + 1) / 2;
    pick_from(h.leaves_under.at(anchor), own, members);
    pick_from(h.leaves_under.at(other), spec.cluster_size - members.size(), members);
    clusters[c].assign(members.begin(), members.end());
  }

  // Vocabulary: background words then a block of words per cluster.
  const std::size_t per_cluster = std::max<std::size_t>(1, spec.vocab_size / (2 * spec.clusters));
  const std::size_t background = spec.vocab_size - per_cluster * spec.clusters;
  std::vector<double> background_weights(background);
  for (std::size_t i = 0; i < background; ++i) background_weights[i] = 1.0 / static_cast<double>(i + 1);

  SyntheticData out;
  out.ontology = h.edges;
  std::size_t total_visits = 0, total_codes = 0, total_words = 0, notes = 0;
  std::set<std::string> distinct;

  for (std::size_t u = 0; u < spec.patients; ++u) {
    const std::size_t m = std::min<std::size_t>(
        spec.clusters, static_cast<std::size_t>(rng.between(1, spec.max_clusters_per_patient)));
    std::vector<std::size_t> all(spec.clusters);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rng.shuffle(all);
    std::vector<std::size_t> mine(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
    std::vector<double> weights(m);
    for (double& w : weights) w = rng.uniform(0.5, 1.5);
    const std::size_t dominant =
        mine[static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin())];
    out.dominant_cluster.push_back(dominant);

    auto draw_code = [&](const std::set<std::string>& present) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        std::string leaf;
        if (rng.bernoulli(spec.p_noise)) {
          leaf = leaves[rng.below(leaves.size())];
        } else {
          const auto& cl = clusters[mine[rng.categorical(weights)]];
          leaf = cl[rng.below(cl.size())];
        }
        std::string code = leaf;
        if (rng.bernoulli(spec.p_internal)) code = h.parent.at(leaf);
        if (!present.count(code)) return code;
      }
      for (const auto& leaf : leaves) {
        if (!present.count(leaf)) return leaf;
      }
      return leaves.front();
    };

    auto draw_note = [&]() {
      std::vector<std::string> note;
      const int n = rng.between(spec.min_words, spec.max_words);
      for (int i = 0; i < n; ++i) {
        if (rng.bernoulli(spec.p_background)) {
          note.push_back("w" + std::to_string(rng.categorical(background_weights)));
        } else {
          const std::size_t c = mine[rng.categorical(weights)];
          note.push_back("c" + std::to_string(c) + "w" + std::to_string(rng.below(per_cluster)));
        }
      }
      return note;
    };

    Patient p;
    p.id = "P" + std::string(5 - std::min<std::size_t>(5, std::to_string(u).size()), '0') + std::to_string(u);
    const int visits = rng.between(spec.min_visits, spec.max_visits);
    std::vector<std::string> previous;
    for (int t = 0; t < visits; ++t) {
      std::vector<std::string> codes;
      std::set<std::string> present;
      if (t == 0) {
        const int n = rng.between(spec.min_codes, spec.max_codes);
        while (codes.size() < static_cast<std::size_t>(n)) {
          std::string c = draw_code(present);
          present.insert(c);
          codes.push_back(std::move(c));
        }
      } else {
        // Kept codes are decided first so replacements never collide with them.
        std::vector<bool> keep(previous.size());
        for (std::size_t i = 0; i < previous.size(); ++i) {
          keep[i] = rng.bernoulli(spec.p_persist);
          if (keep[i]) present.insert(previous[i]);
        }
        for (std::size_t i = 0; i < previous.size(); ++i) {
          if (keep[i]) {
            codes.push_back(previous[i]);
          } else {
            std::string c = draw_code(present);
            present.insert(c);
            codes.push_back(std::move(c));
          }
        }
      }
      Visit v;
      v.codes = codes;
      v.note = draw_note();
      total_codes += v.codes.size();
      total_words += v.note.size();
      ++notes;
      distinct.insert(v.codes.begin(), v.codes.end());
      p.visits.push_back(std::move(v));
      previous = std::move(codes);
    }
    total_visits += p.visits.size();
    for (const auto& c : p.visits.back().codes) {
      if (c.rfind(spec.hf_prefix, 0) == 0) {
        ++out.stats.heart_failure_patients;
        break;
      }
    }
    out.dataset.patients.push_back(std::move(p));
  }
  out.dataset.report.lines = out.dataset.report.loaded = out.dataset.patients.size();

  out.stats.avg_visits = static_cast<double>(total_visits) / static_cast<double>(spec.patients);
  out.stats.avg_codes_per_visit = static_cast<double>(total_codes) / static_cast<double>(total_visits);
  out.stats.avg_words_per_note = notes ? static_cast<double>(total_words) / static_cast<double>(notes) : 0.0;
  out.stats.distinct_codes = distinct.size();

  // Plug-in mutual information between dominant cluster and each label code.
  std::map<std::string, std::vector<std::size_t>> code_patients;
  for (std::size_t u = 0; u < out.dataset.patients.size(); ++u) {
    for (const auto& c : out.dataset.patients[u].label_visit().codes) code_patients[c].push_back(u);
  }
  const double n = static_cast<double>(spec.patients);
  std::vector<double> cluster_count(spec.clusters, 0.0);
  for (std::size_t c : out.dominant_cluster) cluster_count[c] += 1.0;
  double mi_total = 0.0;
  for (const auto& [code, pats] : code_patients) {
    std::vector<double> joint(spec.clusters, 0.0);
    for (std::size_t u : pats) joint[out.dominant_cluster[u]] += 1.0;
    const double py1 = static_cast<double>(pats.size()) / n;
    double mi = 0.0;
    for (std::size_t c = 0; c < spec.clusters; ++c) {
      const double pc = cluster_count[c] / n;
      const double p11 = joint[c] / n;
      const double p10 = pc - p11;
      if (p11 > 0) mi += p11 * std::log(p11 / (pc * py1));
      if (p10 > 0 && py1 < 1.0) mi += p10 * std::log(p10 / (pc * (1.0 - py1)));
    }
    mi_total += mi;
  }
  out.stats.cluster_label_mutual_information = code_patients.empty() ? 0.0 : mi_total / static_cast<double>(code_patients.size());
  return out;
}

void write_synthetic(const SyntheticData& data, const GeneratorSpec& spec, std::uint64_t seed,
                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  OntologyTree::from_edges(data.ontology).save(dir / "ontology.tsv");
  save_dataset(data.dataset, dir / "dataset.jsonl");
  std::ofstream m(dir / "dataset.manifest");
  if (!m) throw IoError("cannot write " + (dir / "dataset.manifest").string());
  m << std::setprecision(17);
  m << "seed=" << seed << '\n'
    << "levels=" << spec.levels << '\n'
    << "roots=" << spec.roots << '\n'
    << "branching=" << spec.branching << '\n'
    << "patients=" << spec.patients << '\n'
    << "min_visits=" << spec.min_visits << '\n'
    << "max_visits=" << spec.max_visits << '\n'
    << "min_codes=" << spec.min_codes << '\n'
    << "max_codes=" << spec.max_codes << '\n'
    << "clusters=" << spec.clusters << '\n'
    << "cluster_size=" << spec.cluster_size << '\n'
    << "max_clusters_per_patient=" << spec.max_clusters_per_patient << '\n'
    << "p_persist=" << spec.p_persist << '\n'
    << "p_noise=" << spec.p_noise << '\n'
    << "p_internal=" << spec.p_internal << '\n'
    << "vocab_size=" << spec.vocab_size << '\n'
    << "min_words=" << spec.min_words << '\n'
    << "max_words=" << spec.max_words << '\n'
    << "p_background=" << spec.p_background << '\n'
    << "hf_prefix=" << spec.hf_prefix << '\n'
    << "stat.avg_visits=" << data.stats.avg_visits << '\n'
    << "stat.avg_codes_per_visit=" << data.stats.avg_codes_per_visit << '\n'
    << "stat.reference_codes_per_visit=" << kReferenceCodesPerVisit << '\n'
    << "stat.avg_words_per_note=" << data.stats.avg_words_per_note << '\n'
    << "stat.distinct_codes=" << data.stats.distinct_codes << '\n'
    << "stat.heart_failure_patients=" << data.stats.heart_failure_patients << '\n'
    << "stat.cluster_label_mutual_information=" << data.stats.cluster_label_mutual_information << '\n';
  if (!m) throw IoError("failed writing " + (dir / "dataset.manifest").string());
}

}  // namespace cgl

// SPDX-License-Identifier: Apache-2.0
// Small hand-made inputs shared by the unit tests.
#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "cgl/data.hpp"
#include "cgl/ontology.hpp"
#include "cgl/rng.hpp"

namespace cgl::testing {

inline OntologyTree tree_from_text(const std::string& text) {
  std::istringstream in(text);
  return OntologyTree::parse(in);
}

/// Full tree with `roots` roots, `branching` children per node, `levels` levels.
/// Node ids: "R<r>" then ".<b>" per level.
inline std::vector<OntologyEdge> full_tree_edges(int roots, int branching, int levels) {
  std::vector<OntologyEdge> edges;
  std::vector<std::string> frontier;
  for (int r = 0; r < roots; ++r) {
    frontier.push_back("R" + std::to_string(r));
    edges.push_back({frontier.back(), "", false});
  }
  for (int k = 1; k < levels; ++k) {
    std::vector<std::string> next;
    for (const auto& p : frontier) {
      for (int b = 0; b < branching; ++b) {
        next.push_back(p + "." + std::to_string(b));
        edges.push_back({next.back(), p, false});
      }
    }
    frontier = std::move(next);
  }
  return edges;
}

/// Random tree of depth `levels` where every internal node has 1..max_children
/// children; grows until at least `min_leaves` level-K nodes exist.
inline std::vector<OntologyEdge> random_tree_edges(Rng& rng, int levels, std::size_t min_leaves, int max_children) {
  std::vector<OntologyEdge> edges;
  std::size_t counter = 0;
  auto fresh = [&] { return "n" + std::to_string(counter++); };
  std::size_t leaves = 0;
  while (leaves < min_leaves) {
    std::vector<std::string> frontier{fresh()};
    edges.push_back({frontier[0], "", false});
    for (int k = 1; k < levels; ++k) {
      std::vector<std::string> next;
      for (const auto& p : frontier) {
        const int kids = static_cast<int>(rng.between(1, max_children));
        for (int b = 0; b < kids; ++b) {
          next.push_back(fresh());
          edges.push_back({next.back(), p, false});
        }
      }
      frontier = std::move(next);
    }
    leaves += frontier.size();
  }
  return edges;
}

inline Visit visit(std::vector<std::string> codes, std::vector<std::string> note = {}) {
  return Visit{std::move(codes), std::move(note)};
}

inline Patient patient(std::string id, std::vector<Visit> visits, Split split = Split::kTrain) {
  Patient p;
  p.id = std::move(id);
  p.visits = std::move(visits);
  p.split = split;
  return p;
}

}  // namespace cgl::testing

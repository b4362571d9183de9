// SPDX-License-Identifier: Apache-2.0
#include "cgl/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cgl/error.hpp"

namespace cgl {

OntologyTree OntologyTree::from_edges(const std::vector<OntologyEdge>& edges) {
  OntologyTree tree;
  auto intern = [&tree](const std::string& id) {
    auto [it, inserted] = tree.by_id_.try_emplace(id, tree.nodes_.size());
    if (inserted) {
      Node n;
      n.id = id;
      tree.nodes_.push_back(std::move(n));
    }
    return it->second;
  };

  std::vector<bool> declared;
  for (const auto& e : edges) {
    if (e.child.empty()) throw StructuralError("edge with an empty child identifier");
    const std::size_t c = intern(e.child);
    if (declared.size() < tree.nodes_.size()) declared.resize(tree.nodes_.size(), false);
    std::optional<std::size_t> p;
    if (!e.parent.empty()) {
      if (e.parent == e.child) throw StructuralError("cycle: node '" + e.child + "' is its own parent");
      p = intern(e.parent);
      if (declared.size() < tree.nodes_.size()) declared.resize(tree.nodes_.size(), false);
    }
    Node& node = tree.nodes_[c];
    if (declared[c] && node.parent != p) {
      throw StructuralError("node '" + e.child + "' has two parents");
    }
    declared[c] = true;
    node.parent = p;
    node.is_virtual = e.is_virtual;
  }

  // Levels by walking to the root; a revisit on the walk means a cycle.
  const std::size_t n = tree.nodes_.size();
  std::vector<int> level(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> walk;
    std::size_t cur = i;
    std::vector<bool> on_walk(n, false);
    while (level[cur] == 0) {
      if (on_walk[cur]) throw StructuralError("cycle through node '" + tree.nodes_[cur].id + "'");
      on_walk[cur] = true;
      walk.push_back(cur);
      if (!tree.nodes_[cur].parent) break;
      cur = *tree.nodes_[cur].parent;
    }
    int base = level[cur] == 0 ? 0 : level[cur];
    for (std::size_t w = walk.size(); w-- > 0;) level[walk[w]] = ++base;
  }
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes_[i].level = level[i];
    if (tree.nodes_[i].parent) tree.nodes_[*tree.nodes_[i].parent].children.push_back(i);
  }
  tree.finalize();
  return tree;
}

void OntologyTree::finalize() {
  depth_ = 0;
  for (const Node& n : nodes_) depth_ = std::max(depth_, n.level);
  level_counts_.assign(static_cast<std::size_t>(depth_), 0);

  std::vector<std::size_t> order(nodes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) { return nodes_[a].id < nodes_[b].id; });
  leaves_.clear();
  leaf_by_id_.clear();
  for (std::size_t i : order) {
    Node& node = nodes_[i];
    node.level_row = level_counts_[static_cast<std::size_t>(node.level - 1)]++;
    if (node.level == depth_) {
      leaf_by_id_.emplace(node.id, leaves_.size());
      leaves_.push_back(i);
    }
  }
  for (Node& node : nodes_) {
    std::sort(node.children.begin(), node.children.end(),
              [this](std::size_t a, std::size_t b) { return nodes_[a].id < nodes_[b].id; });
  }
  paths_.assign(leaves_.size(), std::vector<std::size_t>(static_cast<std::size_t>(depth_)));
  for (std::size_t leaf = 0; leaf < leaves_.size(); ++leaf) {
    std::size_t cur = leaves_[leaf];
    for (int k = depth_; k >= 1; --k) {
      paths_[leaf][static_cast<std::size_t>(k - 1)] = cur;
      if (nodes_[cur].parent) cur = *nodes_[cur].parent;
    }
  }
}

OntologyTree OntologyTree::parse(std::istream& in) {
  std::vector<OntologyEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("ontology line " + std::to_string(line_no) + ": expected 'child<TAB>parent'");
    }
    OntologyEdge e;
    e.child = fields[0];
    e.parent = fields[1] == "-" ? "" : fields[1];
    if (fields.size() == 3) {
      if (fields[2] != "virtual") {
        throw ParseError("ontology line " + std::to_string(line_no) + ": unknown flag '" + fields[2] + "'");
      }
      e.is_virtual = true;
    }
    edges.push_back(std::move(e));
  }
  return from_edges(edges);
}

OntologyTree OntologyTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ontology file " + path.string());
  return parse(in);
}

void OntologyTree::save(std::ostream& out) const {
  // Parents before children so the file reads top-down.
  std::vector<std::size_t> order(nodes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    if (nodes_[a].level != nodes_[b].level) return nodes_[a].level < nodes_[b].level;
    return nodes_[a].id < nodes_[b].id;
  });
  for (std::size_t i : order) {
    const Node& n = nodes_[i];
    out << n.id << '\t' << (n.parent ? nodes_[*n.parent].id : std::string("-"));
    if (n.is_virtual) out << "\tvirtual";
    out << '\n';
  }
}

void OntologyTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ontology file " + path.string());
  save(out);
}

std::string OntologyTree::virtual_id(const std::string& origin, int level) {
  return origin + "~v" + std::to_string(level);
}

OntologyTree OntologyTree::pad_virtual_leaves(const std::set<std::string>& diagnosed) const {
  std::vector<OntologyEdge> edges;
  edges.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    edges.push_back({n.id, n.parent ? nodes_[*n.parent].id : std::string(), n.is_virtual});
  }
  bool changed = false;
  for (const std::string& code : diagnosed) {
    auto idx = find(code);
    if (!idx) throw DataError("diagnosed code '" + code + "' is not in the ontology");
    const Node& n = nodes_[*idx];
    if (n.level == depth_) continue;
    std::string parent = n.id;
    for (int k = n.level + 1; k <= depth_; ++k) {
      std::string vid = virtual_id(n.id, k);
      if (by_id_.count(vid)) break;  // already padded
      edges.push_back({vid, parent, true});
      parent = std::move(vid);
      changed = true;
    }
  }
  if (!changed) return *this;
  return from_edges(edges);
}

std::size_t OntologyTree::level_size(int level) const {
  if (level < 1 || level > depth_) throw IndexError("level " + std::to_string(level) + " outside [1, K]");
  return level_counts_[static_cast<std::size_t>(level - 1)];
}

std::vector<std::size_t> OntologyTree::level_sizes() const { return level_counts_; }

std::size_t OntologyTree::virtual_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_virtual; }));
}

std::optional<std::size_t> OntologyTree::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> OntologyTree::try_leaf_index(const std::string& code) const {
  if (auto it = leaf_by_id_.find(code); it != leaf_by_id_.end()) return it->second;
  if (auto it = leaf_by_id_.find(virtual_id(code, depth_)); it != leaf_by_id_.end()) return it->second;
  return std::nullopt;
}

std::size_t OntologyTree::leaf_index(const std::string& code) const {
  if (auto leaf = try_leaf_index(code)) return *leaf;
  if (find(code)) throw DataError("code '" + code + "' is not a leaf and has no virtual leaf");
  throw DataError("unknown code '" + code + "'");
}

int OntologyTree::lca_level(std::size_t ci, std::size_t cj) const {
  if (ci >= leaves_.size() || cj >= leaves_.size()) throw IndexError("leaf index out of range");
  if (ci == cj) throw ContractError("lca_level needs two distinct leaves");
  const auto& a = paths_[ci];
  const auto& b = paths_[cj];
  for (int k = depth_ - 1; k >= 1; --k) {
    if (a[static_cast<std::size_t>(k - 1)] == b[static_cast<std::size_t>(k - 1)]) return k;
  }
  return 0;
}

AncestorPath OntologyTree::ancestor_path(std::size_t ci) const {
  if (ci >= leaves_.size()) throw ContractError("ancestor_path needs a leaf index, got " + std::to_string(ci));
  AncestorPath path;
  path.code = ci;
  for (std::size_t node : paths_[ci]) {
    path.ancestors.push_back(nodes_[node].id);
    path.level_rows.push_back(nodes_[node].level_row);
  }
  return path;
}

}  // namespace cgl

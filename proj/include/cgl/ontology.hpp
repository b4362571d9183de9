// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cgl {

/// One ancestor per level 1..K for a leaf code. `level_rows[k-1]` is the
/// row of that ancestor inside the level-k embedding table.
struct AncestorPath {
  std::size_t code = 0;
  std::vector<std::string> ancestors;
  std::vector<std::size_t> level_rows;
};

struct OntologyEdge {
  std::string child;
  std::string parent;  // empty for a root
  bool is_virtual = false;
};

/// K-level disease hierarchy. Levels are 1-based; roots sit at level 1.
/// Leaves are the nodes at level K, indexed lexicographically by identifier.
class OntologyTree {
 public:
  struct Node {
    std::string id;
    int level = 0;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
    bool is_virtual = false;
    std::size_t level_row = 0;
  };

  OntologyTree() = default;

  /// Validates the edge list (single parent per node, no cycles) and computes
  /// levels. Parents never listed as children become roots.
  static OntologyTree from_edges(const std::vector<OntologyEdge>& edges);
  /// `child<TAB>parent` lines, `-` for roots, `#` comments. An optional third
  /// column `virtual` marks synthesized nodes.
  static OntologyTree parse(std::istream& in);
  static OntologyTree load(const std::filesystem::path& path);
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  /// Gives every diagnosed node above level K a chain of virtual descendants
  /// down to level K; the level-K end of the chain stands for the node's own
  /// diagnoses. Virtual ids are `<id>~v<level>`.
  OntologyTree pad_virtual_leaves(const std::set<std::string>& diagnosed) const;

  int depth() const { return depth_; }
  std::size_t level_size(int level) const;
  std::vector<std::size_t> level_sizes() const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t virtual_count() const;
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::optional<std::size_t> find(const std::string& id) const;

  std::size_t num_leaves() const { return leaves_.size(); }
  const std::string& leaf_id(std::size_t leaf) const { return nodes_[leaves_.at(leaf)].id; }
  /// Leaf index standing for `code`: the node itself at level K, otherwise
  /// its virtual leaf. Throws DataError when the code has neither.
  std::size_t leaf_index(const std::string& code) const;
  std::optional<std::size_t> try_leaf_index(const std::string& code) const;

  /// Level of the deepest common ancestor of two distinct leaves; 0 when
  /// they sit under different roots.
  int lca_level(std::size_t ci, std::size_t cj) const;
  AncestorPath ancestor_path(std::size_t ci) const;

  static std::string virtual_id(const std::string& origin, int level);

 private:
  void finalize();

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::size_t> leaves_;
  std::unordered_map<std::string, std::size_t> leaf_by_id_;
  // Node index per level, per leaf: paths_[leaf][k-1].
  std::vector<std::vector<std::size_t>> paths_;
  std::vector<std::size_t> level_counts_;
  int depth_ = 0;
};

}  // namespace cgl

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "cgl/error.hpp"
#include "cgl/graphs.hpp"
#include "fixtures.hpp"

using namespace cgl;
using cgl::testing::patient;
using cgl::testing::visit;

namespace {

// Two roots, two children each, five leaves under every child: 20 leaves.
OntologyTree twenty_code_tree() {
  std::vector<OntologyEdge> edges;
  for (int r = 0; r < 2; ++r) {
    const std::string root = "R" + std::to_string(r);
    edges.push_back({root, "", false});
    for (int c = 0; c < 2; ++c) {
      const std::string mid = root + "." + std::to_string(c);
      edges.push_back({mid, root, false});
      for (int l = 0; l < 5; ++l) edges.push_back({mid + "." + std::to_string(l), mid, false});
    }
  }
  return OntologyTree::from_edges(edges);
}

EhrDataset random_dataset(const OntologyTree& tree, Rng& rng, std::size_t patients) {
  EhrDataset ds;
  for (std::size_t u = 0; u < patients; ++u) {
    std::vector<Visit> visits;
    const int n = rng.between(2, 4);
    for (int t = 0; t < n; ++t) {
      std::set<std::string> codes;
      const int m = rng.between(1, 4);
      for (int i = 0; i < m; ++i) codes.insert(tree.leaf_id(rng.below(tree.num_leaves())));
      visits.push_back(visit({codes.begin(), codes.end()}));
    }
    const Split s = u % 4 == 3 ? Split::kTest : Split::kTrain;
    ds.patients.push_back(patient("P" + std::to_string(u), std::move(visits), s));
  }
  return ds;
}

}  // namespace

TEST(Observation, SinglePatientRow) {
  auto tree = cgl::testing::tree_from_text("r\t-\nc0\tr\nc1\tr\nc2\tr\n");
  EhrDataset ds;
  ds.patients.push_back(patient("u", {visit({"c0", "c2"}), visit({"c1"})}));
  const auto g = build_observation(ds, tree);
  const auto dense = g.dense();
  EXPECT_EQ(dense.data(), (std::vector<double>{1, 0, 1}));
  EXPECT_EQ(g.patient_index.at("u"), 0u);
}

TEST(Observation, EmptyTrainingSetGivesZeroRows) {
  auto tree = cgl::testing::tree_from_text("r\t-\nc0\tr\n");
  EhrDataset ds;
  ds.patients.push_back(patient("u", {visit({"c0"}), visit({"c0"})}, Split::kTest));
  const auto g = build_observation(ds, tree);
  EXPECT_EQ(g.num_patients(), 0u);
  EXPECT_EQ(g.dense().shape(), (ad::Shape{0, 1}));
}

TEST(Observation, MatchesMembershipOracle) {
  auto tree = twenty_code_tree();
  Rng rng(5);
  auto ds = random_dataset(tree, rng, 12);
  const auto g = build_observation(ds, tree);
  const auto dense = g.dense();
  std::size_t row = 0;
  for (const auto& p : ds.patients) {
    if (p.split != Split::kTrain) continue;
    for (std::size_t c = 0; c < tree.num_leaves(); ++c) {
      bool seen = false;
      for (std::size_t t = 0; t + 1 < p.visits.size(); ++t) {
        for (const auto& code : p.visits[t].codes) seen = seen || code == tree.leaf_id(c);
      }
      EXPECT_EQ(dense.at(row, c), seen ? 1.0 : 0.0);
    }
    ++row;
  }
  EXPECT_EQ(row, g.num_patients());
}

TEST(Observation, UnknownCodeIsDataError) {
  auto tree = cgl::testing::tree_from_text("r\t-\nc0\tr\n");
  EhrDataset ds;
  ds.patients.push_back(patient("u", {visit({"zz"}), visit({"c0"})}));
  try {
    build_observation(ds, tree);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST(Cooccurrence, VisitPairAndAbsentPair) {
  auto tree = cgl::testing::tree_from_text("r\t-\nc0\tr\nc1\tr\nc2\tr\n");
  EhrDataset ds;
  ds.patients.push_back(patient("u", {visit({"c0", "c1"}), visit({"c2"}), visit({"c0", "c2"})}));
  const auto b = build_cooccurrence(ds, tree);
  EXPECT_EQ(b.at(0, 1), 1);
  EXPECT_EQ(b.at(1, 0), 1);
  EXPECT_EQ(b.at(0, 0), 0);
  // c0 and c2 only meet in the label visit.
  EXPECT_EQ(b.at(0, 2), 0);
  const auto bp = build_cooccurrence(ds, tree, CooccurrenceScope::kPatient);
  EXPECT_EQ(bp.at(0, 2), 1);
  EXPECT_EQ(bp.at(1, 2), 1);
}

TEST(Cooccurrence, MatchesPairEnumeration) {
  auto tree = twenty_code_tree();
  ASSERT_EQ(tree.num_leaves(), 20u);
  Rng rng(17);
  auto ds = random_dataset(tree, rng, 15);
  for (auto scope : {CooccurrenceScope::kVisit, CooccurrenceScope::kPatient}) {
    std::vector<std::vector<int>> oracle(20, std::vector<int>(20, 0));
    for (const auto& p : ds.patients) {
      if (p.split != Split::kTrain) continue;
      std::vector<std::vector<std::string>> groups;
      if (scope == CooccurrenceScope::kVisit) {
        for (std::size_t t = 0; t + 1 < p.visits.size(); ++t) groups.push_back(p.visits[t].codes);
      } else {
        groups.emplace_back();
        for (std::size_t t = 0; t + 1 < p.visits.size(); ++t)
          groups.back().insert(groups.back().end(), p.visits[t].codes.begin(), p.visits[t].codes.end());
      }
      for (const auto& g : groups)
        for (const auto& a : g)
          for (const auto& b : g)
            if (a != b) oracle[tree.leaf_index(a)][tree.leaf_index(b)] = 1;
    }
    const auto b = build_cooccurrence(ds, tree, scope);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 20; ++j) ASSERT_EQ(b.at(i, j), oracle[i][j]) << i << "," << j;
    for (std::size_t k = 1; k < b.entries.size(); ++k) {
      const auto& x = b.entries[k - 1];
      const auto& y = b.entries[k];
      EXPECT_TRUE(x.row < y.row || (x.row == y.row && x.col < y.col));
    }
  }
}

TEST(OntologyAdjacencyTest, MatchesLcaTimesCooccurrence) {
  auto tree = twenty_code_tree();
  Rng rng(23);
  auto ds = random_dataset(tree, rng, 20);
  const auto b = build_cooccurrence(ds, tree);
  const auto adj = build_ontology_adjacency(tree, b);
  std::size_t prime_nnz = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 20; ++j) {
      const int lca = i == j ? 0 : tree.lca_level(i, j);
      prime_nnz += lca != 0;
      ASSERT_EQ(adj.lca_at(i, j), lca);
      ASSERT_EQ(adj.masked.at(i, j), lca * b.at(i, j));
      ASSERT_EQ(adj.masked.at(i, j), adj.masked.at(j, i));
      const int v = adj.masked.at(i, j);
      ASSERT_TRUE(v == 0 || (v >= 1 && v <= tree.depth() - 1));
      if (v != 0) ASSERT_EQ(b.at(i, j), 1);
    }
  }
  EXPECT_EQ(adj.lca_nnz(), prime_nnz);
  EXPECT_LE(adj.masked.nnz(), std::min(prime_nnz, b.nnz()));
}

TEST(OntologyAdjacencyTest, SiblingEdgeKeptOnlyWhenCooccurring) {
  auto tree = cgl::testing::tree_from_text("r\t-\na\tr\nx\ta\ny\ta\nz\ta\n");
  EhrDataset ds;
  ds.patients.push_back(patient("u", {visit({"x", "y"}), visit({"z"})}));
  const auto adj = build_ontology_adjacency(tree, build_cooccurrence(ds, tree));
  EXPECT_EQ(adj.masked.at(tree.leaf_index("x"), tree.leaf_index("y")), 2);
  EXPECT_EQ(adj.masked.at(tree.leaf_index("x"), tree.leaf_index("z")), 0);
  EXPECT_EQ(adj.lca_at(tree.leaf_index("x"), tree.leaf_index("z")), 2);
}

TEST(OntologyAdjacencyTest, RejectsAsymmetricInput) {
  auto tree = cgl::testing::tree_from_text("r\t-\na\tr\nb\tr\n");
  CooMatrix b;
  b.rows = b.cols = 2;
  b.entries = {{0, 1, 1}};
  EXPECT_THROW(build_ontology_adjacency(tree, b), ContractError);
}

TEST(Graphs, RebuildIsIdenticalAndExportsCoordinates) {
  auto tree = twenty_code_tree();
  Rng rng(31);
  auto ds = random_dataset(tree, rng, 10);
  EXPECT_EQ(build_cooccurrence(ds, tree), build_cooccurrence(ds, tree));
  EXPECT_EQ(build_observation(ds, tree).coo(), build_observation(ds, tree).coo());
  CooMatrix m;
  m.rows = m.cols = 3;
  m.entries = {{0, 2, 4}, {2, 0, 4}};
  std::ostringstream out;
  export_coo(m, out);
  EXPECT_EQ(out.str(), "0 2 4\n2 0 4\n");
}

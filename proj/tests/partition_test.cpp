#include "hgc/partition.hpp"

#include <array>
#include <numeric>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace {

using hgc::PartitionAssignment;
using hgc::PartitionStats;
using hgc::SuperpixelGraph;

SuperpixelGraph graph_from_edges(int n, const std::vector<std::array<int, 3>>& edges) {
  SuperpixelGraph g;
  g.n = n;
  g.adj.assign(n, {});
  g.node_weights.assign(n, 1);
  g.x = hgc::Matrix::Zero(n, 1);
  for (const auto& [i, j, w] : edges) {
    g.adj[i].emplace_back(j, w);
    g.adj[j].emplace_back(i, w);
  }
  for (auto& row : g.adj) std::sort(row.begin(), row.end());
  return g;
}

SuperpixelGraph two_triangles() {
  return graph_from_edges(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}});
}

SuperpixelGraph barbell() {
  std::vector<std::array<int, 3>> edges;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      edges.push_back({i, j, 1});
      edges.push_back({i + 4, j + 4, 1});
    }
  edges.push_back({3, 4, 1});
  return graph_from_edges(8, edges);
}

// exhaustive minimum over all balanced bisections
long brute_force_bisection_cut(const SuperpixelGraph& g) {
  const int n = g.n;
  long best = std::numeric_limits<long>::max();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != n / 2) continue;
    std::vector<int> part(n);
    for (int i = 0; i < n; ++i) part[i] = (mask >> i) & 1;
    best = std::min(best, testsupport::edge_cut_oracle(g, part));
  }
  return best;
}

TEST(Partition, SingleClusterIsTrivial) {
  hgc::Rng rng(1);
  const SuperpixelGraph g = testsupport::random_weighted_graph(15, 0.3, 2, rng);
  const PartitionAssignment assign = hgc::partition(g, 1, 0.1, 7);
  EXPECT_EQ(assign.c, 1);
  for (int v : assign.part) EXPECT_EQ(v, 0);
  EXPECT_EQ(hgc::edge_cut(g, assign), 0);
}

TEST(Partition, DisjointTrianglesSplitCleanly) {
  const SuperpixelGraph g = two_triangles();
  EXPECT_EQ(brute_force_bisection_cut(g), 0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PartitionAssignment assign = hgc::partition(g, 2, 0.1, seed);
    EXPECT_EQ(hgc::edge_cut(g, assign), 0) << "seed " << seed;
    EXPECT_EQ(assign.part[0], assign.part[1]);
    EXPECT_EQ(assign.part[0], assign.part[2]);
    EXPECT_EQ(assign.part[3], assign.part[4]);
    EXPECT_EQ(assign.part[3], assign.part[5]);
    EXPECT_NE(assign.part[0], assign.part[3]);
  }
}

TEST(Partition, BarbellCutsTheBridge) {
  const SuperpixelGraph g = barbell();
  EXPECT_EQ(brute_force_bisection_cut(g), 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PartitionAssignment assign = hgc::partition(g, 2, 0.1, seed);
    EXPECT_EQ(hgc::edge_cut(g, assign), 1) << "seed " << seed;
  }
}

TEST(Partition, BalanceHoldsOnWeightedNodes) {
  hgc::Rng rng(5);
  SuperpixelGraph g = testsupport::random_weighted_graph(60, 0.15, 3, rng);
  for (auto& w : g.node_weights) w = 1 + static_cast<long>(rng.below(4));
  for (int c : {2, 3, 5}) {
    PartitionStats stats;
    const PartitionAssignment assign = hgc::partition(g, c, 0.1, 11, &stats);
    std::vector<long> cluster_w(c, 0);
    for (int v = 0; v < g.n; ++v) cluster_w[assign.part[v]] += g.node_weights[v];
    const double ideal = static_cast<double>(g.total_node_weight()) / c;
    for (int i = 0; i < c; ++i) {
      EXPECT_GT(cluster_w[i], 0);
      if (!stats.eps_relaxed)
        EXPECT_LE(cluster_w[i], (1.0 + 0.1) * ideal + 1e-9) << "cluster " << i << " c=" << c;
    }
  }
}

TEST(Partition, FmPassesNeverIncreaseCut) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    hgc::Rng rng(seed);
    const SuperpixelGraph g = testsupport::random_weighted_graph(80, 0.1, 3, rng);
    PartitionStats stats;
    hgc::partition(g, 4, 0.1, seed, &stats);
    ASSERT_FALSE(stats.fm_passes.empty());
    for (const auto& [before, after] : stats.fm_passes) EXPECT_LE(after, before);
    for (const auto& [greedy, refined] : stats.bisections) EXPECT_LE(refined, greedy);
  }
}

TEST(Partition, HeavyEdgeMatchingConservesEdgeWeight) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    hgc::Rng rng(seed);
    const SuperpixelGraph g = testsupport::random_weighted_graph(120, 0.08, 4, rng);
    PartitionStats stats;
    hgc::partition(g, 2, 0.1, seed, &stats);
    ASSERT_FALSE(stats.coarsen_steps.empty());
    for (const auto& [fine, coarse, internal] : stats.coarsen_steps)
      EXPECT_EQ(fine, coarse + internal);
  }
}

TEST(Partition, BeatsRandomBalancedAssignmentsOnErdosRenyi) {
  for (int c : {2, 4}) {
    double mean_ours = 0, mean_random = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      hgc::Rng rng(seed * 71);
      const SuperpixelGraph g = testsupport::random_weighted_graph(100, 0.06, 1, rng);
      const PartitionAssignment assign = hgc::partition(g, c, 0.1, seed);
      mean_ours += static_cast<double>(hgc::edge_cut(g, assign));
      // balanced random assignment: shuffled round-robin
      std::vector<int> part(g.n);
      for (int v = 0; v < g.n; ++v) part[v] = v % c;
      rng.shuffle(part);
      PartitionAssignment random_assign;
      random_assign.part = part;
      random_assign.c = c;
      mean_random += static_cast<double>(hgc::edge_cut(g, random_assign));
    }
    EXPECT_LT(mean_ours, mean_random) << "c=" << c;
  }
}

TEST(Partition, DeterministicForFixedSeed) {
  hgc::Rng rng(2);
  const SuperpixelGraph g = testsupport::random_weighted_graph(70, 0.12, 3, rng);
  const PartitionAssignment a = hgc::partition(g, 5, 0.1, 31);
  const PartitionAssignment b = hgc::partition(g, 5, 0.1, 31);
  EXPECT_EQ(a.part, b.part);
}

TEST(Partition, ErrorsAndRelaxation) {
  hgc::Rng rng(3);
  const SuperpixelGraph g = testsupport::random_weighted_graph(6, 0.5, 2, rng);
  EXPECT_THROW(hgc::partition(g, 7, 0.1, 1), hgc::Error);
  EXPECT_THROW(hgc::partition(g, 0, 0.1, 1), hgc::Error);

  // one heavy node forces an infeasible tolerance; the call relaxes instead
  SuperpixelGraph skewed = graph_from_edges(3, {{0, 1, 1}, {1, 2, 1}});
  skewed.node_weights = {100, 1, 1};
  PartitionStats stats;
  const PartitionAssignment assign = hgc::partition(skewed, 2, 0.05, 1, &stats);
  EXPECT_EQ(assign.c, 2);
  EXPECT_TRUE(stats.eps_relaxed);
  std::vector<int> counts(2, 0);
  for (int v : assign.part) ++counts[v];
  EXPECT_GT(counts[0], 0);
  EXPECT_GT(counts[1], 0);
}

TEST(Partition, EveryClusterNonEmptyAtHighC) {
  hgc::Rng rng(9);
  const SuperpixelGraph g = testsupport::random_weighted_graph(40, 0.15, 2, rng);
  for (int c : {7, 13, 40}) {
    const PartitionAssignment assign = hgc::partition(g, c, 0.3, 5);
    std::vector<int> counts(c, 0);
    for (int v : assign.part) ++counts[v];
    for (int i = 0; i < c; ++i) EXPECT_GT(counts[i], 0) << "cluster " << i << " c=" << c;
  }
}

TEST(EdgeCut, CasesAndOracle) {
  const SuperpixelGraph pair = graph_from_edges(2, {{0, 1, 1}});
  PartitionAssignment same;
  same.part = {0, 0};
  same.c = 1;
  EXPECT_EQ(hgc::edge_cut(pair, same), 0);
  PartitionAssignment split;
  split.part = {0, 1};
  split.c = 2;
  EXPECT_EQ(hgc::edge_cut(pair, split), 1);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    hgc::Rng rng(seed);
    const int n = 5 + static_cast<int>(rng.below(16));
    const SuperpixelGraph g = testsupport::random_weighted_graph(n, 0.3, 4, rng);
    PartitionAssignment assign;
    assign.c = 3;
    assign.part.resize(n);
    for (int v = 0; v < n; ++v) assign.part[v] = static_cast<int>(rng.below(3));
    EXPECT_EQ(hgc::edge_cut(g, assign), testsupport::edge_cut_oracle(g, assign.part));
  }
}

TEST(InduceSubgraphs, IdentityAndTriangleSplit) {
  hgc::Rng rng(6);
  const SuperpixelGraph g = testsupport::random_weighted_graph(10, 0.4, 2, rng);
  PartitionAssignment trivial;
  trivial.part.assign(10, 0);
  trivial.c = 1;
  const auto subs = hgc::induce_subgraphs(g, trivial);
  ASSERT_EQ(subs.size(), 1u);
  EXPECT_EQ(subs[0].graph.adj, g.adj);
  EXPECT_EQ(subs[0].graph.x, g.x);

  const SuperpixelGraph tri = graph_from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
  PartitionAssignment ab_c;
  ab_c.part = {0, 0, 1};
  ab_c.c = 2;
  const auto parts = hgc::induce_subgraphs(tri, ab_c);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].graph.n, 2);
  EXPECT_EQ(parts[0].graph.adj[0].size(), 1u);  // one surviving edge
  EXPECT_EQ(parts[1].graph.n, 1);
  EXPECT_TRUE(parts[1].graph.adj[0].empty());
}

TEST(InduceSubgraphs, EdgeSetsPartitionTheOriginal) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    hgc::Rng rng(seed);
    const SuperpixelGraph g = testsupport::random_weighted_graph(30, 0.2, 3, rng);
    const PartitionAssignment assign = hgc::partition(g, 3, 0.2, seed);
    const auto subs = hgc::induce_subgraphs(g, assign);
    long internal_weight = 0;
    for (const auto& sub : subs) {
      internal_weight += sub.graph.total_edge_weight();
      // every induced edge maps back to an original edge of equal weight
      for (int s = 0; s < sub.graph.n; ++s)
        for (const auto& [t, w] : sub.graph.adj[s])
          EXPECT_EQ(g.edge_weight(sub.nodes[s], sub.nodes[t]), w);
    }
    EXPECT_EQ(internal_weight + hgc::edge_cut(g, assign), g.total_edge_weight());
  }
}

TEST(InduceSubgraphs, CarriesLabelsAndNormalization) {
  const SuperpixelGraph tri = graph_from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
  hgc::NodeLabels labels;
  labels.num_classes = 2;
  labels.train = {1, 0, 2};
  labels.val = {0, 2, 0};
  labels.test = {0, 0, 1};
  labels.impure = {0, 1, 0};
  PartitionAssignment assign;
  assign.part = {0, 1, 0};
  assign.c = 2;
  const auto subs = hgc::induce_subgraphs(tri, assign, &labels);
  EXPECT_EQ(subs[0].nodes, (std::vector<int>{0, 2}));
  EXPECT_EQ(subs[0].labels.train, (std::vector<int>{1, 2}));
  EXPECT_EQ(subs[1].labels.val, std::vector<int>{2});
  EXPECT_TRUE(subs[1].labels.impure[0]);
  // normalized adjacency for the surviving 0-2 edge: degrees 2,2
  ASSERT_EQ(subs[0].aprime.rows[0].size(), 2u);
  EXPECT_DOUBLE_EQ(subs[0].aprime.rows[0][0].second, 0.5);
  EXPECT_DOUBLE_EQ(subs[0].aprime.rows[0][1].second, 0.5);
}

TEST(AssignmentText, RoundTripAndValidation) {
  PartitionAssignment assign;
  assign.part = {0, 2, 1, 1};
  assign.c = 3;
  const std::string text = hgc::assignment_to_text(assign);
  const PartitionAssignment back = hgc::assignment_from_text(text, 4);
  EXPECT_EQ(back.part, assign.part);
  EXPECT_EQ(back.c, 3);
  EXPECT_THROW(hgc::assignment_from_text("0 0\n1 2\n", 2), hgc::Error);  // cluster 1 empty
  EXPECT_THROW(hgc::assignment_from_text("0 0\n", 2), hgc::Error);       // node 1 missing
  EXPECT_THROW(hgc::assignment_from_text("0 0\n5 1\n", 2), hgc::Error);  // out of range
}

}  // namespace

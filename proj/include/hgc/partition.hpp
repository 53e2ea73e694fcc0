#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hgc/common.hpp"
#include "hgc/graph.hpp"

namespace hgc {

struct PartitionAssignment {
  std::vector<int> part;  // per-node cluster id in 0..c-1
  int c = 1;
};

// Optional instrumentation sink; every FM pass and coarsening step lands here.
struct PartitionStats {
  std::vector<std::pair<long, long>> fm_passes;        // (cut before, cut after)
  std::vector<std::pair<long, long>> bisections;       // (greedy cut, refined cut)
  // (fine edge weight, coarse edge weight, matched internal weight)
  std::vector<std::array<long, 3>> coarsen_steps;
  bool eps_relaxed = false;
  double achieved_eps = 0.0;
};

struct SubGraph {
  std::vector<int> nodes;  // original node ids, ascending; remap is positional
  SuperpixelGraph graph;
  NormalizedAdjacency aprime;
  NodeLabels labels;  // zero-filled when no labels were supplied
};

namespace detail {

struct WorkGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, long>>> adj;  // sorted (node, weight)
  std::vector<long> vwgt;  // balance weight (superpixel pixel counts)
  std::vector<long> cnt;   // original node count, for non-empty feasibility

  long total_vwgt() const { return std::accumulate(vwgt.begin(), vwgt.end(), 0L); }
  long total_edge_weight() const {
    long w = 0;
    for (int i = 0; i < n; ++i)
      for (const auto& [j, wij] : adj[i])
        if (i < j) w += wij;
    return w;
  }
};

inline WorkGraph work_graph_from(const SuperpixelGraph& g) {
  WorkGraph wg;
  wg.n = g.n;
  wg.adj.assign(g.n, {});
  for (int i = 0; i < g.n; ++i)
    for (const auto& [j, w] : g.adj[i]) wg.adj[i].emplace_back(j, w);
  wg.vwgt = g.node_weights.empty() ? std::vector<long>(g.n, 1) : g.node_weights;
  wg.cnt.assign(g.n, 1);
  return wg;
}

struct CoarsenResult {
  WorkGraph coarse;
  std::vector<int> map;  // fine node -> coarse node
  long matched_internal_weight = 0;
};

// Heavy-edge matching: seeded visit order, each unmatched node pairs with its
// heaviest unmatched neighbor (ties toward the smaller id).
inline CoarsenResult coarsen_once(const WorkGraph& g, Rng& rng) {
  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  CoarsenResult res;
  res.map.assign(g.n, -1);
  std::vector<std::pair<int, int>> groups;  // (u, v) with v == -1 for singletons
  for (int u : order) {
    if (res.map[u] >= 0) continue;
    int best = -1;
    long best_w = 0;
    for (const auto& [v, w] : g.adj[u]) {
      if (res.map[v] >= 0 || v == u) continue;
      if (w > best_w || (w == best_w && best >= 0 && v < best)) {
        best = v;
        best_w = w;
      }
    }
    const int cid = static_cast<int>(groups.size());
    res.map[u] = cid;
    if (best >= 0) {
      res.map[best] = cid;
      res.matched_internal_weight += best_w;
    }
    groups.emplace_back(u, best);
  }

  WorkGraph& cg = res.coarse;
  cg.n = static_cast<int>(groups.size());
  cg.adj.assign(cg.n, {});
  cg.vwgt.assign(cg.n, 0);
  cg.cnt.assign(cg.n, 0);
  for (int u = 0; u < g.n; ++u) {
    cg.vwgt[res.map[u]] += g.vwgt[u];
    cg.cnt[res.map[u]] += g.cnt[u];
  }
  std::vector<std::pair<int, long>> row;
  for (int cu = 0; cu < cg.n; ++cu) {
    row.clear();
    const int members[2] = {groups[cu].first, groups[cu].second};
    for (int m : members) {
      if (m < 0) continue;
      for (const auto& [v, w] : g.adj[m]) {
        const int cv = res.map[v];
        if (cv != cu) row.emplace_back(cv, w);
      }
    }
    std::sort(row.begin(), row.end());
    for (const auto& [cv, w] : row) {
      if (!cg.adj[cu].empty() && cg.adj[cu].back().first == cv)
        cg.adj[cu].back().second += w;
      else
        cg.adj[cu].emplace_back(cv, w);
    }
  }
  return res;
}

inline long bisection_cut(const WorkGraph& g, const std::vector<int>& part) {
  long cut = 0;
  for (int i = 0; i < g.n; ++i)
    for (const auto& [j, w] : g.adj[i])
      if (i < j && part[i] != part[j]) cut += w;
  return cut;
}

struct BisectionLimits {
  double target_w0 = 0;  // desired weight of side 0
  double max_w0 = 0;     // hard caps per side
  double max_w1 = 0;
  long min_cnt0 = 1;  // minimum original-node counts per side
  long min_cnt1 = 1;
};

// Grows side 0 from a seed, always absorbing the boundary vertex with the
// highest attachment gain, until the weight target is met.
inline std::vector<int> grow_bisection(const WorkGraph& g, const BisectionLimits& lim,
                                       int seed_vertex) {
  std::vector<int> part(g.n, 1);
  std::vector<long> gain(g.n, 0);  // weight toward side 0 minus weight toward side 1
  for (int v = 0; v < g.n; ++v)
    for (const auto& [u, w] : g.adj[v]) {
      (void)u;
      gain[v] -= w;
    }
  const long total_cnt = std::accumulate(g.cnt.begin(), g.cnt.end(), 0L);

  double w0 = 0;
  long cnt0 = 0;
  auto move_to_zero = [&](int v) {
    part[v] = 0;
    w0 += static_cast<double>(g.vwgt[v]);
    cnt0 += g.cnt[v];
    for (const auto& [u, w] : g.adj[v])
      if (part[u] == 1) gain[u] += 2 * w;
  };
  move_to_zero(seed_vertex);

  while (w0 < lim.target_w0 || cnt0 < lim.min_cnt0) {
    int best = -1;
    for (int v = 0; v < g.n; ++v) {
      if (part[v] == 0) continue;
      if (total_cnt - cnt0 - g.cnt[v] < lim.min_cnt1) continue;
      if (best < 0 || gain[v] > gain[best]) best = v;
    }
    if (best < 0) break;
    move_to_zero(best);
  }
  return part;
}

// One boundary FM pass: hill-climbing move sequence with rollback to the best
// prefix, so the cut never increases across a pass.
inline bool fm_pass(const WorkGraph& g, std::vector<int>& part, const BisectionLimits& lim,
                    long& cut, PartitionStats* stats) {
  const long cut_before = cut;
  std::vector<long> gain(g.n, 0);
  for (int v = 0; v < g.n; ++v)
    for (const auto& [u, w] : g.adj[v]) gain[v] += part[u] != part[v] ? w : -w;

  double side_w[2] = {0, 0};
  long side_cnt[2] = {0, 0};
  for (int v = 0; v < g.n; ++v) {
    side_w[part[v]] += static_cast<double>(g.vwgt[v]);
    side_cnt[part[v]] += g.cnt[v];
  }
  const double max_w[2] = {lim.max_w0, lim.max_w1};
  const long min_cnt[2] = {lim.min_cnt0, lim.min_cnt1};

  std::vector<char> locked(g.n, 0);
  std::vector<int> moves;
  moves.reserve(g.n);
  long best_cut = cut;
  std::size_t best_len = 0;

  for (;;) {
    int best = -1;
    for (int v = 0; v < g.n; ++v) {
      if (locked[v]) continue;
      const int from = part[v], to = 1 - from;
      if (side_w[to] + static_cast<double>(g.vwgt[v]) > max_w[to]) continue;
      if (side_cnt[from] - g.cnt[v] < min_cnt[from]) continue;
      if (best < 0 || gain[v] > gain[best]) best = v;
    }
    if (best < 0) break;

    const int from = part[best], to = 1 - from;
    part[best] = to;
    locked[best] = 1;
    side_w[from] -= static_cast<double>(g.vwgt[best]);
    side_w[to] += static_cast<double>(g.vwgt[best]);
    side_cnt[from] -= g.cnt[best];
    side_cnt[to] += g.cnt[best];
    cut -= gain[best];
    for (const auto& [u, w] : g.adj[best])
      gain[u] += part[u] == from ? 2 * w : -2 * w;
    moves.push_back(best);
    if (cut < best_cut) {
      best_cut = cut;
      best_len = moves.size();
    }
  }

  // roll back everything after the best prefix
  for (std::size_t i = moves.size(); i > best_len; --i) {
    const int v = moves[i - 1];
    part[v] = 1 - part[v];
  }
  cut = best_cut;
  if (stats) stats->fm_passes.emplace_back(cut_before, cut);
  if (cut > cut_before) throw Error("FM pass increased the cut");
  return cut < cut_before;
}

inline void fm_refine(const WorkGraph& g, std::vector<int>& part, const BisectionLimits& lim,
                      long& cut, PartitionStats* stats) {
  for (int pass = 0; pass < 10; ++pass)
    if (!fm_pass(g, part, lim, cut, stats)) break;
}

inline std::vector<int> multilevel_bisect(const WorkGraph& graph, const BisectionLimits& lim,
                                          int coarse_limit, Rng& rng, PartitionStats* stats) {
  std::vector<WorkGraph> levels{graph};
  std::vector<std::vector<int>> maps;
  while (levels.back().n > coarse_limit) {
    CoarsenResult step = coarsen_once(levels.back(), rng);
    if (stats)
      stats->coarsen_steps.push_back({levels.back().total_edge_weight(),
                                      step.coarse.total_edge_weight(),
                                      step.matched_internal_weight});
    if (step.coarse.n >= static_cast<int>(0.95 * levels.back().n)) break;
    maps.push_back(std::move(step.map));
    levels.push_back(std::move(step.coarse));
  }

  const WorkGraph& coarsest = levels.back();
  std::vector<int> part;
  long cut = std::numeric_limits<long>::max();
  const int trials = std::min(4, coarsest.n);
  for (int t = 0; t < trials; ++t) {
    const int seed_vertex = coarsest.n == 1 ? 0 : rng.index(coarsest.n);
    std::vector<int> cand = grow_bisection(coarsest, lim, seed_vertex);
    const long cand_cut = bisection_cut(coarsest, cand);
    if (cand_cut < cut) {
      cut = cand_cut;
      part = std::move(cand);
    }
  }
  const long greedy_cut = cut;
  fm_refine(coarsest, part, lim, cut, stats);

  for (std::size_t level = maps.size(); level > 0; --level) {
    const WorkGraph& fine = levels[level - 1];
    std::vector<int> fine_part(fine.n);
    for (int v = 0; v < fine.n; ++v) fine_part[v] = part[maps[level - 1][v]];
    part = std::move(fine_part);
    cut = bisection_cut(fine, part);
    fm_refine(fine, part, lim, cut, stats);
  }
  if (stats) stats->bisections.emplace_back(greedy_cut, cut);
  return part;
}

inline WorkGraph induce_work_graph(const WorkGraph& g, const std::vector<int>& part,
                                   int side, std::vector<int>& ids) {
  ids.clear();
  std::vector<int> remap(g.n, -1);
  for (int v = 0; v < g.n; ++v)
    if (part[v] == side) {
      remap[v] = static_cast<int>(ids.size());
      ids.push_back(v);
    }
  WorkGraph sub;
  sub.n = static_cast<int>(ids.size());
  sub.adj.assign(sub.n, {});
  sub.vwgt.resize(sub.n);
  sub.cnt.resize(sub.n);
  for (int s = 0; s < sub.n; ++s) {
    const int v = ids[s];
    sub.vwgt[s] = g.vwgt[v];
    sub.cnt[s] = g.cnt[v];
    for (const auto& [u, w] : g.adj[v])
      if (remap[u] >= 0) sub.adj[s].emplace_back(remap[u], w);
  }
  return sub;
}

inline void recursive_bisect(const WorkGraph& g, const std::vector<int>& orig_ids,
                             int parts, int first_part, double eps, int coarse_limit,
                             Rng& rng, std::vector<int>& out, PartitionStats* stats) {
  if (parts == 1) {
    for (int id : orig_ids) out[id] = first_part;
    return;
  }
  const int c0 = (parts + 1) / 2;
  const int c1 = parts - c0;
  const double total = static_cast<double>(g.total_vwgt());
  // apportion the tolerance across bisection levels so the product of the
  // per-level allowances stays within 1 + eps overall
  const int levels = static_cast<int>(std::ceil(std::log2(static_cast<double>(parts))));
  const double tol = std::pow(1.0 + eps, 1.0 / levels) - 1.0;

  BisectionLimits lim;
  lim.target_w0 = total * c0 / parts;
  lim.max_w0 = (1.0 + tol) * lim.target_w0;
  lim.max_w1 = (1.0 + tol) * (total - lim.target_w0);
  lim.min_cnt0 = c0;
  lim.min_cnt1 = c1;

  const std::vector<int> part = multilevel_bisect(g, lim, coarse_limit, rng, stats);

  std::vector<int> ids0, ids1;
  const WorkGraph g0 = induce_work_graph(g, part, 0, ids0);
  const WorkGraph g1 = induce_work_graph(g, part, 1, ids1);
  std::vector<int> orig0(ids0.size()), orig1(ids1.size());
  for (std::size_t i = 0; i < ids0.size(); ++i) orig0[i] = orig_ids[ids0[i]];
  for (std::size_t i = 0; i < ids1.size(); ++i) orig1[i] = orig_ids[ids1[i]];
  recursive_bisect(g0, orig0, c0, first_part, eps, coarse_limit, rng, out, stats);
  recursive_bisect(g1, orig1, c1, first_part + c0, eps, coarse_limit, rng, out, stats);
}

}  // namespace detail

// Multilevel recursive bisection: heavy-edge-matching coarsening down to
// max(40, 8c) nodes, greedy region-growing initial bisection, boundary FM
// refinement at every uncoarsening level. Balance is on node-weight sums;
// an infeasible tolerance is relaxed with a warning rather than failing.
inline PartitionAssignment partition(const SuperpixelGraph& graph, int c, double eps,
                                     std::uint64_t seed, PartitionStats* stats = nullptr) {
  if (c < 1) throw Error("cluster count must be >= 1");
  if (c > graph.n)
    throw Error("cluster count " + std::to_string(c) + " exceeds node count " +
                std::to_string(graph.n));
  if (eps <= 0) throw Error("balance tolerance must be positive");

  PartitionAssignment assign;
  assign.c = c;
  assign.part.assign(graph.n, 0);
  if (c == 1) return assign;

  detail::WorkGraph wg = detail::work_graph_from(graph);
  std::vector<int> orig_ids(graph.n);
  std::iota(orig_ids.begin(), orig_ids.end(), 0);
  Rng rng(seed);
  const int coarse_limit = std::max(40, 8 * c);
  detail::recursive_bisect(wg, orig_ids, c, 0, eps, coarse_limit, rng, assign.part, stats);

  std::vector<double> cluster_w(c, 0);
  for (int v = 0; v < graph.n; ++v)
    cluster_w[assign.part[v]] += static_cast<double>(wg.vwgt[v]);
  const double ideal = static_cast<double>(wg.total_vwgt()) / c;
  double achieved = 0;
  for (int i = 0; i < c; ++i) achieved = std::max(achieved, cluster_w[i] / ideal - 1.0);
  if (stats) stats->achieved_eps = achieved;
  if (achieved > eps + 1e-9) {
    std::cerr << "warning: balance tolerance relaxed from " << eps << " to " << achieved
              << " (integer node weights made " << eps << " infeasible)\n";
    if (stats) stats->eps_relaxed = true;
  }
  return assign;
}

// Total weight of edges whose endpoints land in different clusters.
inline long edge_cut(const SuperpixelGraph& graph, const PartitionAssignment& assign) {
  if (static_cast<int>(assign.part.size()) != graph.n)
    throw Error("assignment does not cover all nodes");
  long cut = 0;
  for (int i = 0; i < graph.n; ++i)
    for (const auto& [j, w] : graph.adj[i])
      if (i < j && assign.part[i] != assign.part[j]) cut += w;
  return cut;
}

// Splits the graph into c sub-graphs, dropping cross-cluster edges; each
// sub-graph carries its own normalized adjacency.
inline std::vector<SubGraph> induce_subgraphs(const SuperpixelGraph& graph,
                                              const PartitionAssignment& assign,
                                              const NodeLabels* labels = nullptr) {
  if (static_cast<int>(assign.part.size()) != graph.n)
    throw Error("assignment does not cover all nodes");
  std::vector<SubGraph> subs(assign.c);
  std::vector<int> remap(graph.n, -1);
  for (int v = 0; v < graph.n; ++v) {
    const int cid = assign.part[v];
    if (cid < 0 || cid >= assign.c) throw Error("cluster id out of range");
    remap[v] = static_cast<int>(subs[cid].nodes.size());
    subs[cid].nodes.push_back(v);
  }
  for (auto& sub : subs) {
    const int sn = static_cast<int>(sub.nodes.size());
    sub.graph.n = sn;
    sub.graph.o = graph.o;
    sub.graph.k = graph.k;
    sub.graph.adj.assign(sn, {});
    sub.graph.x.resize(sn, graph.x.cols());
    sub.graph.node_weights.resize(sn);
    sub.labels.num_classes = labels ? labels->num_classes : 0;
    sub.labels.train.assign(sn, 0);
    sub.labels.val.assign(sn, 0);
    sub.labels.test.assign(sn, 0);
    sub.labels.impure.assign(sn, 0);
  }
  for (int v = 0; v < graph.n; ++v) {
    SubGraph& sub = subs[assign.part[v]];
    const int s = remap[v];
    sub.graph.x.row(s) = graph.x.row(v);
    sub.graph.node_weights[s] =
        graph.node_weights.empty() ? 1 : graph.node_weights[v];
    for (const auto& [u, w] : graph.adj[v])
      if (assign.part[u] == assign.part[v]) sub.graph.adj[s].emplace_back(remap[u], w);
    if (labels) {
      sub.labels.train[s] = labels->train[v];
      sub.labels.val[s] = labels->val[v];
      sub.labels.test[s] = labels->test[v];
      sub.labels.impure[s] = labels->impure[v];
    }
  }
  for (auto& sub : subs) {
    for (auto& row : sub.graph.adj) std::sort(row.begin(), row.end());
    sub.aprime = normalize(sub.graph);
  }
  return subs;
}

// One "node_id part_id" line per node; the same format is accepted back for
// externally produced partitions.
inline std::string assignment_to_text(const PartitionAssignment& assign) {
  std::ostringstream out;
  for (std::size_t v = 0; v < assign.part.size(); ++v)
    out << v << ' ' << assign.part[v] << '\n';
  return out.str();
}

inline PartitionAssignment assignment_from_text(const std::string& text, int expected_nodes) {
  std::istringstream in(text);
  std::vector<int> part(expected_nodes, -1);
  long node, cluster;
  while (in >> node >> cluster) {
    if (node < 0 || node >= expected_nodes)
      throw Error("partition file references node " + std::to_string(node) +
                  " outside 0.." + std::to_string(expected_nodes - 1));
    if (cluster < 0) throw Error("negative cluster id in partition file");
    part[node] = static_cast<int>(cluster);
  }
  PartitionAssignment assign;
  assign.part = std::move(part);
  int max_id = -1;
  for (int v : assign.part) {
    if (v < 0) throw Error("partition file does not cover all nodes");
    max_id = std::max(max_id, v);
  }
  assign.c = max_id + 1;
  std::vector<int> counts(assign.c, 0);
  for (int v : assign.part) ++counts[v];
  for (int i = 0; i < assign.c; ++i)
    if (counts[i] == 0)
      throw Error("partition file leaves cluster " + std::to_string(i) + " empty");
  return assign;
}

}  // namespace hgc

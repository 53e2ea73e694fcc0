#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hgc/common.hpp"
#include "hgc/superpixel.hpp"

namespace hgc {

// i ~ j iff some pixel of superpixel i is 4-adjacent to a pixel of j.
struct SpatialAdjacency {
  int n = 0;
  std::vector<std::vector<int>> nbrs;  // sorted, irreflexive, symmetric
};

// One A^{h,k}: unweighted symmetric relation.
struct BoolAdjacency {
  int n = 0;
  std::vector<std::vector<int>> nbrs;
};

struct SuperpixelGraph {
  int n = 0;
  Matrix x;                                        // node attributes, n x F
  std::vector<std::vector<std::pair<int, int>>> adj;  // sorted (node, weight), weight in 1..o
  int o = 1;
  int k = 1;
  std::vector<long> node_weights;  // superpixel pixel counts; 1s when unknown

  long total_node_weight() const {
    return std::accumulate(node_weights.begin(), node_weights.end(), 0L);
  }
  long total_edge_weight() const {
    long w = 0;
    for (int i = 0; i < n; ++i)
      for (const auto& [j, wij] : adj[i])
        if (i < j) w += wij;
    return w;
  }
  int edge_weight(int i, int j) const {
    for (const auto& [v, w] : adj[i])
      if (v == j) return w;
    return 0;
  }
};

// A' = D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
struct NormalizedAdjacency {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;  // sorted by id, diagonal included

  // Y = A' * M. Row accumulations sum value-sorted addends, which makes the
  // result a function of the addend multiset alone; relabeling nodes then
  // permutes outputs bit-exactly.
  Matrix multiply(const Matrix& m) const {
    if (m.rows() != n) throw Error("normalized adjacency and matrix shapes disagree");
    Matrix out(n, m.cols());
    std::vector<double> terms;
    for (int i = 0; i < n; ++i) {
      for (Eigen::Index col = 0; col < m.cols(); ++col) {
        terms.clear();
        for (const auto& [j, w] : rows[i]) terms.push_back(w * m(j, col));
        std::sort(terms.begin(), terms.end());
        double s = 0;
        for (double t : terms) s += t;
        out(i, col) = s;
      }
    }
    return out;
  }
};

// Exactly the superpixel pairs sharing a pixel-grid boundary.
inline SpatialAdjacency spatial_adjacency(const SuperpixelMap& map) {
  SpatialAdjacency adj;
  adj.n = map.p;
  adj.nbrs.assign(map.p, {});
  std::vector<std::pair<int, int>> pairs;
  const int W = map.width, H = map.height;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int a = map.assignment[static_cast<std::size_t>(y) * W + x];
      if (x + 1 < W) {
        const int b = map.assignment[static_cast<std::size_t>(y) * W + x + 1];
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < H) {
        const int b = map.assignment[static_cast<std::size_t>(y + 1) * W + x];
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (const auto& [a, b] : pairs) {
    adj.nbrs[a].push_back(b);
    adj.nbrs[b].push_back(a);
  }
  for (auto& row : adj.nbrs) std::sort(row.begin(), row.end());
  return adj;
}

// Nodes at shortest-path distance 1..h from j, ascending, j excluded.
inline std::vector<int> hop_neighborhood(const SpatialAdjacency& adj, int j, int h) {
  if (h < 1) throw Error("hop count must be >= 1");
  if (j < 0 || j >= adj.n) throw Error("node out of range");
  std::vector<int> depth(adj.n, -1);
  std::deque<int> queue{j};
  depth[j] = 0;
  std::vector<int> reached;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (depth[u] == h) continue;
    for (int v : adj.nbrs[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        reached.push_back(v);
        queue.push_back(v);
      }
    }
  }
  std::sort(reached.begin(), reached.end());
  return reached;
}

inline double pairwise_distance(const Matrix& x, int i, int j) {
  return (x.row(i) - x.row(j)).norm();
}

// A^{h,k}: i-j connected iff j is among i's k spectrally nearest h-hop
// neighbors or vice versa. Distance ties break toward the smaller node id.
inline BoolAdjacency topk_adjacency(const SpatialAdjacency& adj, const Matrix& x,
                                    int h, int k) {
  if (k < 1) throw Error("k must be >= 1");
  BoolAdjacency out;
  out.n = adj.n;
  out.nbrs.assign(adj.n, {});
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::pair<double, int>> ranked;
  for (int i = 0; i < adj.n; ++i) {
    const std::vector<int> hood = hop_neighborhood(adj, i, h);
    ranked.clear();
    for (int j : hood) ranked.emplace_back(pairwise_distance(x, i, j), j);
    std::sort(ranked.begin(), ranked.end());
    const int take = std::min<std::size_t>(k, ranked.size());
    for (int t = 0; t < take; ++t) {
      const int j = ranked[t].second;
      pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (const auto& [a, b] : pairs) {
    out.nbrs[a].push_back(b);
    out.nbrs[b].push_back(a);
  }
  for (auto& row : out.nbrs) std::sort(row.begin(), row.end());
  return out;
}

// Element-wise sum over hop scales; integer weights in 0..o.
inline SuperpixelGraph multiscale_sum(const std::vector<BoolAdjacency>& mats) {
  if (mats.empty()) throw Error("multiscale_sum needs at least one matrix");
  const int n = mats[0].n;
  for (const auto& m : mats)
    if (m.n != n) throw Error("multiscale_sum shape mismatch");

  SuperpixelGraph g;
  g.n = n;
  g.o = static_cast<int>(mats.size());
  g.adj.assign(n, {});
  g.node_weights.assign(n, 1);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, int>> row;
    for (const auto& m : mats)
      for (int j : m.nbrs[i]) row.emplace_back(j, 1);
    std::sort(row.begin(), row.end());
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (!g.adj[i].empty() && g.adj[i].back().first == row[t].first)
        g.adj[i].back().second += 1;
      else
        g.adj[i].push_back(row[t]);
    }
  }
  return g;
}

// Full construction: A_o^k = sum over h=1..o of A^{h,k}.
inline SuperpixelGraph build_graph(const SpatialAdjacency& adj, const Matrix& x,
                                   int o, int k) {
  if (o < 1) throw Error("o must be >= 1");
  std::vector<BoolAdjacency> scales;
  scales.reserve(o);
  for (int h = 1; h <= o; ++h) scales.push_back(topk_adjacency(adj, x, h, k));
  SuperpixelGraph g = multiscale_sum(scales);
  g.x = x;
  g.o = o;
  g.k = k;
  return g;
}

inline NormalizedAdjacency normalize(const SuperpixelGraph& g) {
  NormalizedAdjacency a;
  a.n = g.n;
  a.rows.assign(g.n, {});
  std::vector<double> inv_sqrt_degree(g.n);
  for (int i = 0; i < g.n; ++i) {
    long d = 1;  // self-loop from A + I
    for (const auto& [j, w] : g.adj[i]) d += w;
    inv_sqrt_degree[i] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  for (int i = 0; i < g.n; ++i) {
    auto& row = a.rows[i];
    bool diagonal_placed = false;
    for (const auto& [j, w] : g.adj[i]) {
      if (!diagonal_placed && j > i) {
        row.emplace_back(i, inv_sqrt_degree[i] * inv_sqrt_degree[i]);
        diagonal_placed = true;
      }
      row.emplace_back(j, w * inv_sqrt_degree[i] * inv_sqrt_degree[j]);
    }
    if (!diagonal_placed) row.emplace_back(i, inv_sqrt_degree[i] * inv_sqrt_degree[i]);
  }
  return a;
}

// --- text artifacts -------------------------------------------------------

// First line "N o k", then one line "i j w" per undirected edge, i < j.
inline std::string graph_edges_to_text(const SuperpixelGraph& g) {
  std::ostringstream out;
  out << g.n << ' ' << g.o << ' ' << g.k << '\n';
  for (int i = 0; i < g.n; ++i)
    for (const auto& [j, w] : g.adj[i])
      if (i < j) out << i << ' ' << j << ' ' << w << '\n';
  return out.str();
}

// First line "N F", then N attribute rows.
inline std::string attributes_to_text(const Matrix& x) {
  std::ostringstream out;
  out << x.rows() << ' ' << x.cols() << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(x(i, j));
    }
    out << '\n';
  }
  return out.str();
}

inline SuperpixelGraph graph_from_text(const std::string& edges_text,
                                       const std::string& attrs_text,
                                       const std::vector<long>* node_weights = nullptr) {
  SuperpixelGraph g;
  {
    std::istringstream in(edges_text);
    if (!(in >> g.n >> g.o >> g.k)) throw Error("ill-formed graph edge list header");
    g.adj.assign(g.n, {});
    int i, j, w;
    while (in >> i >> j >> w) {
      if (i < 0 || j < 0 || i >= g.n || j >= g.n || i == j || w < 1)
        throw Error("ill-formed graph edge entry");
      g.adj[i].emplace_back(j, w);
      g.adj[j].emplace_back(i, w);
    }
    for (auto& row : g.adj) std::sort(row.begin(), row.end());
  }
  {
    std::istringstream in(attrs_text);
    Eigen::Index rows, cols;
    if (!(in >> rows >> cols) || rows != g.n) throw Error("attribute matrix header mismatch");
    g.x.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> g.x(r, c))) throw Error("truncated attribute matrix");
  }
  if (node_weights) {
    if (static_cast<int>(node_weights->size()) != g.n)
      throw Error("node weight count mismatch");
    g.node_weights = *node_weights;
  } else {
    g.node_weights.assign(g.n, 1);
  }
  return g;
}

}  // namespace hgc

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "pasdf/geom.hpp"

namespace pasdf::test {

/// P(positive > negative) + 0.5 P(tie) over all labeled pairs.
inline double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// Exhaustive minimum over all bijections.
inline double brute_assignment(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[perm[i]]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Min-cost perfect matching by successive shortest paths with Bellman-Ford on the residual graph.
inline double min_cost_flow_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int source = 2 * n, sink = 2 * n + 1, nodes = 2 * n + 2;
  struct Edge {
    int to;
    int cap;
    double cost;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<int>> adj(nodes);
  const auto add = [&](int u, int v, double c) {
    adj[u].push_back(static_cast<int>(edges.size()));
    edges.push_back({v, 1, c});
    adj[v].push_back(static_cast<int>(edges.size()));
    edges.push_back({u, 0, -c});
  };
  for (int i = 0; i < n; ++i) {
    add(source, i, 0.0);
    add(n + i, sink, 0.0);
    for (int j = 0; j < n; ++j) add(i, n + j, cost(i, j));
  }
  double total = 0.0;
  for (int flow = 0; flow < n; ++flow) {
    std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
    std::vector<int> via(nodes, -1);
    dist[source] = 0.0;
    for (int round = 0; round < nodes; ++round) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (!std::isfinite(dist[u])) continue;
        for (int e : adj[u]) {
          if (edges[e].cap > 0 && dist[u] + edges[e].cost < dist[edges[e].to] - 1e-15) {
            dist[edges[e].to] = dist[u] + edges[e].cost;
            via[edges[e].to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    for (int v = sink; v != source; v = edges[via[v] ^ 1].to) {
      edges[via[v]].cap -= 1;
      edges[via[v] ^ 1].cap += 1;
    }
    total += dist[sink];
  }
  return total;
}

inline Eigen::MatrixXd distance_matrix(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (a[i] - b[j]).norm();
  return c;
}

}  // namespace pasdf::test

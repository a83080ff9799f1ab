#include "tsln/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace tsln {

static AreaGraph from_edge_set(int M, std::set<std::pair<int, int>> es) {
  AreaGraph g;
  g.M = M;
  g.edges.assign(es.begin(), es.end());
  std::vector<std::vector<int>> adj(M);
  for (auto [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  g.nbr_offset.assign(M + 1, 0);
  for (int i = 0; i < M; ++i) {
    std::sort(adj[i].begin(), adj[i].end());
    g.nbr_offset[i + 1] = g.nbr_offset[i] + static_cast<int>(adj[i].size());
  }
  g.nbr.reserve(g.nbr_offset[M]);
  for (int i = 0; i < M; ++i)
    g.nbr.insert(g.nbr.end(), adj[i].begin(), adj[i].end());
  return g;
}

AreaGraph build_graph_indexed(int M, std::vector<std::pair<int, int>> edge_list) {
  std::set<std::pair<int, int>> es;
  for (auto [a, b] : edge_list) {
    if (a < 0 || a >= M || b < 0 || b >= M)
      throw GraphError("UnknownArea: edge index out of range");
    if (a == b) continue;
    es.insert({std::min(a, b), std::max(a, b)});
  }
  return from_edge_set(M, std::move(es));
}

AreaGraph build_graph(const std::vector<std::pair<std::string, std::string>>& edge_list,
                      const std::vector<std::string>& area_ids) {
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < area_ids.size(); ++i) {
    if (!idx.emplace(area_ids[i], static_cast<int>(i)).second)
      throw GraphError("DuplicateAreaId: " + area_ids[i]);
  }
  std::vector<std::pair<int, int>> ie;
  ie.reserve(edge_list.size());
  for (const auto& [a, b] : edge_list) {
    auto ia = idx.find(a);
    auto ib = idx.find(b);
    if (ia == idx.end()) throw GraphError("UnknownArea: " + a);
    if (ib == idx.end()) throw GraphError("UnknownArea: " + b);
    ie.emplace_back(ia->second, ib->second);
  }
  return build_graph_indexed(static_cast<int>(area_ids.size()), std::move(ie));
}

std::vector<std::vector<int>> AreaGraph::components() const {
  std::vector<int> comp(M, -1);
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  for (int s = 0; s < M; ++s) {
    if (comp[s] >= 0) continue;
    int c = static_cast<int>(out.size());
    out.emplace_back();
    stack.push_back(s);
    comp[s] = c;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      out[c].push_back(v);
      for (int k = nbr_offset[v]; k < nbr_offset[v + 1]; ++k) {
        int u = nbr[k];
        if (comp[u] < 0) {
          comp[u] = c;
          stack.push_back(u);
        }
      }
    }
  }
  return out;
}

AreaGraph repair_graph(const AreaGraph& g,
                       const std::vector<std::pair<int, int>>& bridge_edges,
                       bool augment_singletons) {
  std::set<std::pair<int, int>> es(g.edges.begin(), g.edges.end());
  for (auto [a, b] : bridge_edges) {
    if (a < 0 || a >= g.M || b < 0 || b >= g.M)
      throw GraphError("UnknownArea: bridge index out of range");
    if (a != b) es.insert({std::min(a, b), std::max(a, b)});
  }
  AreaGraph bridged = from_edge_set(g.M, es);
  if (augment_singletons) {
    // degree-1 nodes inherit the neighbors of their sole neighbor,
    // evaluated against the bridged graph so the pass is idempotent
    for (int i = 0; i < bridged.M; ++i) {
      if (bridged.degree(i) != 1) continue;
      int h = bridged.nbr[bridged.nbr_offset[i]];
      for (int k = bridged.nbr_offset[h]; k < bridged.nbr_offset[h + 1]; ++k) {
        int u = bridged.nbr[k];
        if (u != i) es.insert({std::min(i, u), std::max(i, u)});
      }
    }
  }
  AreaGraph out = from_edge_set(g.M, std::move(es));
  if (!out.connected())
    throw GraphError("StillDisconnected: supply more bridge edges");
  return out;
}

std::vector<double> row_standardize(const AreaGraph& g) {
  std::vector<double> w(g.nbr.size());
  for (int i = 0; i < g.M; ++i) {
    int d = g.degree(i);
    if (d == 0) throw GraphError("IsolatedNode: area has no neighbors");
    for (int k = g.nbr_offset[i]; k < g.nbr_offset[i + 1]; ++k)
      w[k] = 1.0 / static_cast<double>(d);
  }
  return w;
}

double icar_scaling_factor(const AreaGraph& g) {
  if (!g.connected()) throw GraphError("DisconnectedGraph");
  int M = g.M;
  // generalized inverse on the sum-to-zero subspace:
  // Q+ = (L + J/M)^{-1} - J/M
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(M, M, 1.0 / M);
  for (int i = 0; i < M; ++i) A(i, i) += g.degree(i);
  for (auto [a, b] : g.edges) {
    A(a, b) -= 1.0;
    A(b, a) -= 1.0;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw GraphError("NumericalFailure: Laplacian inverse failed");
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(M, M));
  double log_sum = 0.0;
  for (int i = 0; i < M; ++i) {
    double v = inv(i, i) - 1.0 / M;
    if (!(v > 0.0) || !std::isfinite(v))
      throw GraphError("NumericalFailure: nonpositive marginal variance");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / M);
}

}  // namespace tsln

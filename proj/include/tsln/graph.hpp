#ifndef TSLN_GRAPH_HPP
#define TSLN_GRAPH_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsln {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adjacency over M areas. Edges kept as a sorted unique list of (a<b) pairs
// plus CSR-style neighbor offsets; no dense matrices, the application scale
// is a few thousand areas.
struct AreaGraph {
  int M = 0;
  std::vector<std::pair<int, int>> edges;   // a < b, sorted, unique
  std::vector<int> nbr_offset;              // size M+1
  std::vector<int> nbr;                     // concatenated neighbor lists

  int degree(int i) const { return nbr_offset[i + 1] - nbr_offset[i]; }
  std::vector<std::vector<int>> components() const;
  bool connected() const { return components().size() == 1; }
};

AreaGraph build_graph(const std::vector<std::pair<std::string, std::string>>& edge_list,
                      const std::vector<std::string>& area_ids);

AreaGraph build_graph_indexed(int M, std::vector<std::pair<int, int>> edge_list);

AreaGraph repair_graph(const AreaGraph& g,
                       const std::vector<std::pair<int, int>>& bridge_edges,
                       bool augment_singletons);

// per-area neighbor weight 1/degree; returned in CSR order matching g.nbr
std::vector<double> row_standardize(const AreaGraph& g);

// geometric mean of ICAR marginal variances (diag of the Laplacian
// generalized inverse on the sum-to-zero subspace)
double icar_scaling_factor(const AreaGraph& g);

}  // namespace tsln

#endif

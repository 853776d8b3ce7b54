#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tarsp/linalg.hpp"

namespace tarsp {

using Edge = std::pair<Index, Index>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Undirected areal proximity structure: binary symmetric W with zero
/// diagonal, the degrees D_w = diag(W 1) and the row-normalized A = D_w^{-1} W.
/// Immutable after construction.
class AdjacencyGraph {
 public:
  /// Symmetric closure of `edges`; duplicates collapse to a single 0/1 entry.
  /// Throws InvalidEdge on self-loops or out-of-range endpoints and
  /// IsolatedRegion when a vertex ends up with no neighbour.
  static AdjacencyGraph from_edges(Index n, std::span<const Edge> edges);

  Index size() const { return n_; }
  const SparseMatrix& weights() const { return w_; }
  const SparseMatrix& row_normalized() const { return a_; }
  const Eigen::VectorXi& degrees() const { return degrees_; }
  VectorXd degree_vector() const { return degrees_.cast<double>(); }
  const std::vector<std::vector<Index>>& neighbors() const { return neighbors_; }

  Index edge_count() const { return edge_count_; }
  /// Undirected edges with i < j, sorted.
  std::vector<Edge> edges() const;

  Index component_count() const { return components_; }
  bool connected() const { return components_ == 1; }
  /// True when at least one connected component is bipartite.
  bool has_bipartite_component() const { return bipartite_component_; }
  /// Diagnostics attached at construction (e.g. disconnected graph).
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  AdjacencyGraph() = default;

  Index n_ = 0;
  Index edge_count_ = 0;
  Index components_ = 0;
  bool bipartite_component_ = false;
  SparseMatrix w_;
  SparseMatrix a_;
  Eigen::VectorXi degrees_;
  std::vector<std::vector<Index>> neighbors_;
  std::vector<std::string> warnings_;
};

/// Rook (4-neighbour) lattice, cells numbered row-major: id = r * cols + c.
AdjacencyGraph build_grid_graph(Index rows, Index cols);

AdjacencyGraph build_graph_from_edges(Index n, std::span<const Edge> edges);

struct RhoRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// (1/λ_min, 1/λ_max) over the eigenvalues of D_w^{-1/2} W D_w^{-1/2}: the
/// open interval of ρ for which D_w - ρW is positive definite.
RhoRange car_rho_range(const AdjacencyGraph& g);

enum class NeighborOrdering { SortByFirstCoordinate, GivenPermutation };

/// Directed acyclic neighbour sets for the nearest-neighbour process variant.
/// `order[k]` is the point placed at position k; `sets[i]` lists, for point
/// i, the (up to m) nearest points placed before it, nearest first.
struct DirectedNeighborSets {
  std::vector<Index> order;
  std::vector<Index> position;
  std::vector<std::vector<Index>> sets;
  Index max_neighbors = 0;

  Index size() const { return static_cast<Index>(sets.size()); }
};

/// Ties in distance go to the point placed earlier in the ordering.
DirectedNeighborSets build_neighbor_sets(std::span<const Point> coords, Index m,
                                         NeighborOrdering ordering,
                                         std::span<const Index> permutation = {});

/// Cell centres of a rows x cols lattice over [0,1]^2, row-major.
std::vector<Point> grid_coordinates(Index rows, Index cols);

}  // namespace tarsp

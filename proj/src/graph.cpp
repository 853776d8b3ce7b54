#include "tarsp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include <Eigen/Eigenvalues>

#include "tarsp/error.hpp"

namespace tarsp {

AdjacencyGraph AdjacencyGraph::from_edges(Index n, std::span<const Edge> edges) {
  if (n < 1) throw Error(ErrorCode::InvalidDimension, "graph needs at least one region");

  std::set<Edge> unique;
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw Error(ErrorCode::InvalidEdge, "edge (" + std::to_string(i) + "," + std::to_string(j) +
                                              ") outside 0.." + std::to_string(n - 1));
    }
    if (i == j) throw Error(ErrorCode::InvalidEdge, "self-loop at region " + std::to_string(i));
    unique.emplace(std::min(i, j), std::max(i, j));
  }

  AdjacencyGraph g;
  g.n_ = n;
  g.edge_count_ = static_cast<Index>(unique.size());
  g.neighbors_.assign(static_cast<std::size_t>(n), {});
  for (const auto& [i, j] : unique) {
    g.neighbors_[static_cast<std::size_t>(i)].push_back(j);
    g.neighbors_[static_cast<std::size_t>(j)].push_back(i);
  }
  g.degrees_.resize(n);
  for (Index i = 0; i < n; ++i) {
    auto& nb = g.neighbors_[static_cast<std::size_t>(i)];
    std::sort(nb.begin(), nb.end());
    if (nb.empty()) throw Error(ErrorCode::IsolatedRegion, "region " + std::to_string(i) + " has no neighbours");
    g.degrees_[i] = static_cast<int>(nb.size());
  }

  std::vector<Triplet> tw;
  std::vector<Triplet> ta;
  tw.reserve(2 * unique.size());
  ta.reserve(2 * unique.size());
  for (Index i = 0; i < n; ++i) {
    const double inv = 1.0 / g.degrees_[i];
    for (Index j : g.neighbors_[static_cast<std::size_t>(i)]) {
      tw.emplace_back(i, j, 1.0);
      ta.emplace_back(i, j, inv);
    }
  }
  g.w_.resize(n, n);
  g.w_.setFromTriplets(tw.begin(), tw.end());
  g.a_.resize(n, n);
  g.a_.setFromTriplets(ta.begin(), ta.end());

  // Components and two-colourability in one BFS sweep.
  std::vector<int> colour(static_cast<std::size_t>(n), -1);
  for (Index s = 0; s < n; ++s) {
    if (colour[static_cast<std::size_t>(s)] >= 0) continue;
    ++g.components_;
    bool bipartite = true;
    std::queue<Index> q;
    q.push(s);
    colour[static_cast<std::size_t>(s)] = 0;
    while (!q.empty()) {
      const Index u = q.front();
      q.pop();
      for (Index v : g.neighbors_[static_cast<std::size_t>(u)]) {
        auto& cv = colour[static_cast<std::size_t>(v)];
        if (cv < 0) {
          cv = 1 - colour[static_cast<std::size_t>(u)];
          q.push(v);
        } else if (cv == colour[static_cast<std::size_t>(u)]) {
          bipartite = false;
        }
      }
    }
    g.bipartite_component_ = g.bipartite_component_ || bipartite;
  }
  if (g.components_ > 1) {
    g.warnings_.push_back("graph is disconnected (" + std::to_string(g.components_) + " components)");
  }
  return g;
}

std::vector<Edge> AdjacencyGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(edge_count_));
  for (Index i = 0; i < n_; ++i) {
    for (Index j : neighbors_[static_cast<std::size_t>(i)]) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

AdjacencyGraph build_grid_graph(Index rows, Index cols) {
  if (rows < 2 || cols < 2) {
    throw Error(ErrorCode::InvalidDimension, "grid needs rows >= 2 and cols >= 2, got " +
                                                 std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(rows * (cols - 1) + cols * (rows - 1)));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index id = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(id, id + 1);
      if (r + 1 < rows) edges.emplace_back(id, id + cols);
    }
  }
  return AdjacencyGraph::from_edges(rows * cols, edges);
}

AdjacencyGraph build_graph_from_edges(Index n, std::span<const Edge> edges) {
  return AdjacencyGraph::from_edges(n, edges);
}

RhoRange car_rho_range(const AdjacencyGraph& g) {
  // The spectrum of D^{-1/2} W D^{-1/2} lies in [-1, 1]; 1 is attained on
  // every component and -1 exactly when some component is bipartite.
  RhoRange out{-1.0, 1.0};
  if (g.has_bipartite_component()) return out;

  const VectorXd inv_sqrt = g.degree_vector().array().rsqrt();
  const MatrixXd s = inv_sqrt.asDiagonal() * MatrixXd(g.weights()) * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "eigenvalue solver did not converge");
  }
  const VectorXd& lambda = eig.eigenvalues();
  out.lo = 1.0 / lambda.minCoeff();
  out.hi = 1.0 / lambda.maxCoeff();
  return out;
}

DirectedNeighborSets build_neighbor_sets(std::span<const Point> coords, Index m,
                                         NeighborOrdering ordering,
                                         std::span<const Index> permutation) {
  const auto n = static_cast<Index>(coords.size());
  if (n < 2) throw Error(ErrorCode::InvalidInput, "neighbour sets need at least two points");
  if (m < 1) throw Error(ErrorCode::InvalidInput, "neighbour cap m must be >= 1");

  DirectedNeighborSets ns;
  ns.max_neighbors = m;
  ns.order.resize(static_cast<std::size_t>(n));
  if (ordering == NeighborOrdering::GivenPermutation) {
    if (static_cast<Index>(permutation.size()) != n) {
      throw Error(ErrorCode::InvalidInput, "permutation length differs from point count");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (std::size_t k = 0; k < permutation.size(); ++k) {
      const Index p = permutation[k];
      if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
        throw Error(ErrorCode::InvalidInput, "ordering is not a permutation of 0..n-1");
      }
      seen[static_cast<std::size_t>(p)] = true;
      ns.order[k] = p;
    }
  } else {
    std::iota(ns.order.begin(), ns.order.end(), Index{0});
    std::stable_sort(ns.order.begin(), ns.order.end(), [&](Index a, Index b) {
      const Point& pa = coords[static_cast<std::size_t>(a)];
      const Point& pb = coords[static_cast<std::size_t>(b)];
      if (pa.x != pb.x) return pa.x < pb.x;
      return pa.y < pb.y;
    });
  }
  ns.position.resize(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) ns.position[static_cast<std::size_t>(ns.order[static_cast<std::size_t>(k)])] = k;

  ns.sets.assign(static_cast<std::size_t>(n), {});
  std::vector<std::pair<double, Index>> cand;
  for (Index k = 1; k < n; ++k) {
    const Index i = ns.order[static_cast<std::size_t>(k)];
    const Point& pi = coords[static_cast<std::size_t>(i)];
    cand.clear();
    for (Index q = 0; q < k; ++q) {
      const Point& pq = coords[static_cast<std::size_t>(ns.order[static_cast<std::size_t>(q)])];
      const double dx = pi.x - pq.x;
      const double dy = pi.y - pq.y;
      cand.emplace_back(dx * dx + dy * dy, q);
    }
    const auto take = static_cast<std::ptrdiff_t>(std::min(k, m));
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    auto& s = ns.sets[static_cast<std::size_t>(i)];
    for (std::ptrdiff_t t = 0; t < take; ++t) s.push_back(ns.order[static_cast<std::size_t>(cand[static_cast<std::size_t>(t)].second)]);
  }
  return ns;
}

std::vector<Point> grid_coordinates(Index rows, Index cols) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(rows * cols));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      pts.push_back({(static_cast<double>(c) + 0.5) / static_cast<double>(cols),
                     (static_cast<double>(r) + 0.5) / static_cast<double>(rows)});
    }
  }
  return pts;
}

}  // namespace tarsp

#pragma once

// Independent dense reference computations shared by the unit and
// acceptance tests. Nothing here calls into the sparse code paths.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tarsp/graph.hpp"

namespace support {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using tarsp::Edge;
using tarsp::Index;

inline MatrixXd dense_w(Index n, const std::vector<Edge>& edges) {
  MatrixXd w = MatrixXd::Zero(n, n);
  for (auto [i, j] : edges) {
    w(i, j) = 1.0;
    w(j, i) = 1.0;
  }
  return w;
}

inline MatrixXd row_normalize(const MatrixXd& w) {
  MatrixXd a = w;
  for (Index i = 0; i < w.rows(); ++i) a.row(i) /= w.row(i).sum();
  return a;
}

inline MatrixXd degrees(const MatrixXd& w) { return w.rowwise().sum().asDiagonal(); }

inline MatrixXd tar_c(const MatrixXd& w, double delta, double sigma2) {
  const MatrixXd d = degrees(w);
  return (d / delta + d - w) / sigma2;
}

inline MatrixXd tar_s(const MatrixXd& w, double delta, double sigma2) {
  const Index n = w.rows();
  const MatrixXd r = MatrixXd::Identity(n, n) - row_normalize(w);
  return (MatrixXd::Identity(n, n) / delta + r.transpose() * r) / sigma2;
}

inline MatrixXd car(const MatrixXd& w, double rho, double sigma2) { return (degrees(w) - rho * w) / sigma2; }

inline MatrixXd sar(const MatrixXd& w, double rho, double sigma2) {
  const Index n = w.rows();
  const MatrixXd r = MatrixXd::Identity(n, n) - rho * row_normalize(w);
  return r.transpose() * r / sigma2;
}

inline MatrixXd dense_inverse(const MatrixXd& q) {
  return q.llt().solve(MatrixXd::Identity(q.rows(), q.cols()));
}

/// Spanning path over a random permutation plus `extra` random chords, so
/// the graph is connected and has no isolated vertex.
template <class Rng>
std::vector<Edge> random_connected_edges(Index n, Index extra, Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Edge> e;
  for (Index k = 0; k + 1 < n; ++k) e.emplace_back(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(k + 1)]);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  for (Index k = 0; k < extra; ++k) {
    const Index i = pick(rng);
    const Index j = pick(rng);
    if (i != j) e.emplace_back(i, j);
  }
  return e;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// Composite Simpson weights for m (odd) equally spaced nodes with spacing h.
inline std::vector<double> simpson_weights(int m, double h) {
  std::vector<double> w(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = (i == 0 || i == m - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
  for (double& v : w) v *= h / 3.0;
  return w;
}

/// log of ∫∫ N(y | xβ, σ² Q^{-1}) IG(σ²; a, b) dβ dσ² for a single covariate,
/// by brute-force 2-d Simpson quadrature over (β, log σ²) with the
/// likelihood evaluated densely. The β window is centred on the weighted
/// least-squares fit only to place the nodes; the integrand itself is the
/// raw joint density.
inline double log_marginal_quadrature(const MatrixXd& q, const VectorXd& x, const VectorXd& y, double a, double b,
                                      int beta_nodes = 601, int logs_nodes = 2001) {
  const Index n = y.size();
  const double logdet = 2.0 * q.llt().matrixLLT().diagonal().array().log().sum();
  const double xqx = x.dot(q * x);
  const double center = x.dot(q * y) / xqx;
  const double lgamma_a = std::lgamma(a);
  const double t_lo = -30.0;
  const double t_hi = 30.0;
  const double ht = (t_hi - t_lo) / (logs_nodes - 1);
  const auto wt = simpson_weights(logs_nodes, ht);

  // Quadratic form in β is r0 - 2β s1 + β² xqx.
  const double r0 = y.dot(q * y);
  const double s1 = x.dot(q * y);

  double peak = -INFINITY;
  std::vector<double> lw;
  for (int it = 0; it < logs_nodes; ++it) {
    const double t = t_lo + it * ht;
    const double s2 = std::exp(t);
    const double half = 14.0 * std::sqrt(s2 / xqx);
    const double hb = 2.0 * half / (beta_nodes - 1);
    const auto wb = simpson_weights(beta_nodes, hb);
    for (int ib = 0; ib < beta_nodes; ++ib) {
      const double beta = center - half + ib * hb;
      const double quad = r0 - 2.0 * beta * s1 + beta * beta * xqx;
      const double loglik = 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI * s2) - quad / (2.0 * s2);
      const double logprior = a * std::log(b) - lgamma_a - (a + 1.0) * t - b / s2;
      const double v = loglik + logprior + t + std::log(wt[static_cast<std::size_t>(it)]) +
                       std::log(wb[static_cast<std::size_t>(ib)]);
      lw.push_back(v);
      peak = std::max(peak, v);
    }
  }
  double s = 0.0;
  for (double v : lw) s += std::exp(v - peak);
  return peak + std::log(s);
}

inline std::vector<double> normalize_log(const std::vector<double>& l) {
  const double m = *std::max_element(l.begin(), l.end());
  std::vector<double> p;
  double s = 0.0;
  for (double v : l) {
    p.push_back(std::exp(v - m));
    s += p.back();
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace support

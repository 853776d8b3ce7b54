#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace tarsp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sparse LL' factorization of a symmetric matrix with a fill-reducing
/// ordering. The symbolic analysis is kept between calls to factorize() so
/// a family of matrices sharing one pattern (one grid of δ or ρ values) is
/// analysed once.
class SparseCholesky {
 public:
  SparseCholesky();
  /// Analyses and factorizes `q`; throws NotPositiveDefinite on failure.
  explicit SparseCholesky(const SparseMatrix& q);
  SparseCholesky(SparseCholesky&&) noexcept;
  SparseCholesky& operator=(SparseCholesky&&) noexcept;
  ~SparseCholesky();

  void analyze(const SparseMatrix& pattern);
  /// Numeric factorization; false when a non-positive pivot shows up.
  bool try_factorize(const SparseMatrix& q);
  void factorize(const SparseMatrix& q);

  Index size() const { return n_; }
  double log_determinant() const;
  VectorXd solve(const VectorXd& rhs) const;
  MatrixXd solve(const MatrixXd& rhs) const;
  /// v' Q v evaluated as a squared norm of the triangular factor, so it is
  /// never negative.
  double quadratic_form(const VectorXd& v) const;
  /// Maps z ~ N(0, I) to a draw from N(0, Q^{-1}).
  VectorXd correlate(const VectorXd& z) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Index n_ = 0;
  bool factorized_ = false;
};

/// Attempted sparse Cholesky; the positive-definiteness certificate used
/// throughout the library.
bool is_positive_definite(const SparseMatrix& q);

SparseMatrix identity(Index n);
SparseMatrix diagonal_matrix(const VectorXd& d);

/// Principal submatrix Q[idx, idx]; `idx` must be strictly increasing.
SparseMatrix principal_submatrix(const SparseMatrix& q, std::span<const Index> idx);

/// Q[rows, cols] for strictly increasing index lists.
SparseMatrix submatrix(const SparseMatrix& q, std::span<const Index> rows, std::span<const Index> cols);

/// Rows `idx` of a dense matrix / entries of a vector.
MatrixXd select_rows(const MatrixXd& x, std::span<const Index> idx);
VectorXd select(const VectorXd& v, std::span<const Index> idx);

double max_abs(const MatrixXd& m);
double max_abs(const SparseMatrix& m);

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

}  // namespace tarsp

#include "tarsp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

#include "tarsp/error.hpp"

namespace tarsp {

struct SparseCholesky::Impl {
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

SparseCholesky::SparseCholesky() : impl_(std::make_unique<Impl>()) {}

SparseCholesky::SparseCholesky(const SparseMatrix& q) : SparseCholesky() {
  analyze(q);
  factorize(q);
}

SparseCholesky::SparseCholesky(SparseCholesky&&) noexcept = default;
SparseCholesky& SparseCholesky::operator=(SparseCholesky&&) noexcept = default;
SparseCholesky::~SparseCholesky() = default;

void SparseCholesky::analyze(const SparseMatrix& pattern) {
  if (pattern.rows() != pattern.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "Cholesky needs a square matrix");
  }
  impl_->llt.analyzePattern(pattern);
  n_ = pattern.rows();
  factorized_ = false;
}

bool SparseCholesky::try_factorize(const SparseMatrix& q) {
  if (n_ != q.rows() || n_ == 0) analyze(q);
  impl_->llt.factorize(q);
  factorized_ = impl_->llt.info() == Eigen::Success;
  if (factorized_) {
    // A singular matrix can factorize with a rounding-sized last pivot, so
    // pivots must clear a relative floor, not just zero.
    const VectorXd d = impl_->llt.matrixL().nestedExpression().diagonal();
    const double scale = q.diagonal().cwiseAbs().maxCoeff();
    const double floor = 64.0 * static_cast<double>(n_) * std::numeric_limits<double>::epsilon() * scale;
    factorized_ = d.allFinite() && (d.array().square() > floor).all();
  }
  return factorized_;
}

void SparseCholesky::factorize(const SparseMatrix& q) {
  if (!try_factorize(q)) {
    throw Error(ErrorCode::NotPositiveDefinite, "sparse Cholesky factorization failed");
  }
}

double SparseCholesky::log_determinant() const {
  const VectorXd d = impl_->llt.matrixL().nestedExpression().diagonal();
  return 2.0 * d.array().log().sum();
}

VectorXd SparseCholesky::solve(const VectorXd& rhs) const {
  return impl_->llt.solve(rhs);
}

MatrixXd SparseCholesky::solve(const MatrixXd& rhs) const {
  return impl_->llt.solve(rhs);
}

double SparseCholesky::quadratic_form(const VectorXd& v) const {
  const VectorXd pv = impl_->llt.permutationP() * v;
  const VectorXd u = impl_->llt.matrixU() * pv;
  return u.squaredNorm();
}

VectorXd SparseCholesky::correlate(const VectorXd& z) const {
  const VectorXd u = impl_->llt.matrixU().solve(z);
  return impl_->llt.permutationPinv() * u;
}

bool is_positive_definite(const SparseMatrix& q) {
  SparseCholesky chol;
  chol.analyze(q);
  return chol.try_factorize(q);
}

SparseMatrix identity(Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

SparseMatrix diagonal_matrix(const VectorXd& d) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()));
  for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  SparseMatrix m(d.size(), d.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMatrix submatrix(const SparseMatrix& q, std::span<const Index> rows, std::span<const Index> cols) {
  std::vector<Index> rpos(static_cast<std::size_t>(q.rows()), -1);
  std::vector<Index> cpos(static_cast<std::size_t>(q.cols()), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) rpos[static_cast<std::size_t>(rows[k])] = static_cast<Index>(k);
  for (std::size_t k = 0; k < cols.size(); ++k) cpos[static_cast<std::size_t>(cols[k])] = static_cast<Index>(k);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(q.nonZeros()));
  for (Index col = 0; col < q.outerSize(); ++col) {
    const Index pc = cpos[static_cast<std::size_t>(col)];
    if (pc < 0) continue;
    for (SparseMatrix::InnerIterator it(q, col); it; ++it) {
      const Index pr = rpos[static_cast<std::size_t>(it.row())];
      if (pr >= 0) t.emplace_back(pr, pc, it.value());
    }
  }
  SparseMatrix sub(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  sub.setFromTriplets(t.begin(), t.end());
  return sub;
}

SparseMatrix principal_submatrix(const SparseMatrix& q, std::span<const Index> idx) { return submatrix(q, idx, idx); }

MatrixXd select_rows(const MatrixXd& x, std::span<const Index> idx) {
  MatrixXd out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = x.row(idx[k]);
  return out;
}

VectorXd select(const VectorXd& v, std::span<const Index> idx) {
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = v[idx[k]];
  return out;
}

double max_abs(const MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double max_abs(const SparseMatrix& m) {
  double out = 0.0;
  for (Index k = 0; k < m.nonZeros(); ++k) out = std::max(out, std::abs(m.valuePtr()[k]));
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidInput, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

}  // namespace tarsp

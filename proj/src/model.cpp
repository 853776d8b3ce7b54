#include "tarsp/model.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "tarsp/error.hpp"

namespace tarsp {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void require_positive(const char* what, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::ParameterRange, std::string(what) + " must be finite and > 0, got " + fmt(v));
  }
}

SparseMatrix transpose_times(const SparseMatrix& a, const SparseMatrix& b) {
  SparseMatrix at = a.transpose();
  SparseMatrix out = at * b;
  out.makeCompressed();
  return out;
}

// Copy of `m` on the pattern of `pattern` (which must contain m's pattern).
SparseMatrix align(const SparseMatrix& pattern, const SparseMatrix& m) {
  SparseMatrix out = 0.0 * pattern + m;
  out.makeCompressed();
  return out;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::TarC: return "tar-c";
    case Family::TarS: return "tar-s";
    case Family::Car: return "car";
    case Family::Sar: return "sar";
    case Family::NngpTar: return "nngp-tar";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::TarC, Family::TarS, Family::Car, Family::Sar, Family::NngpTar}) {
    if (family_name(f) == name) return f;
  }
  throw Error(ErrorCode::Config, "unknown family '" + std::string(name) +
                                     "' (expected tar-c, tar-s, car, sar or nngp-tar)");
}

bool uses_delta(Family f) { return f == Family::TarC || f == Family::TarS || f == Family::NngpTar; }

double CorrelationSpec::operator()(double distance) const { return std::exp(-phi * distance); }

void CorrelationSpec::validate() const { require_positive("correlation decay phi", phi); }

SparseMatrix precision_tar_c(const AdjacencyGraph& g, double delta, double sigma2) {
  require_positive("delta", delta);
  require_positive("sigma2", sigma2);
  const SparseMatrix d = diagonal_matrix(g.degree_vector());
  SparseMatrix q = ((1.0 / delta) * d + (d - g.weights())) / sigma2;
  q.makeCompressed();
  return q;
}

SparseMatrix precision_tar_s(const AdjacencyGraph& g, double delta, double sigma2) {
  require_positive("delta", delta);
  require_positive("sigma2", sigma2);
  SparseMatrix q = ((1.0 / delta) * identity(g.size()) + sar_kernel(g)) / sigma2;
  q.makeCompressed();
  return q;
}

SparseMatrix precision_car(const AdjacencyGraph& g, double rho, double sigma2) {
  if (!std::isfinite(rho)) throw Error(ErrorCode::ParameterRange, "rho must be finite");
  require_positive("sigma2", sigma2);
  SparseMatrix q = (diagonal_matrix(g.degree_vector()) - rho * g.weights()) / sigma2;
  q.makeCompressed();
  if (!is_positive_definite(q)) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "CAR precision is not positive definite at rho = " + fmt(rho));
  }
  return q;
}

SparseMatrix precision_sar(const AdjacencyGraph& g, double rho, double sigma2) {
  validate_parameter(Family::Sar, rho);
  require_positive("sigma2", sigma2);
  const SparseMatrix b = identity(g.size()) - rho * g.row_normalized();
  SparseMatrix q = transpose_times(b, b) / sigma2;
  q.makeCompressed();
  return q;
}

SparseMatrix car_kernel(const AdjacencyGraph& g) {
  SparseMatrix k = diagonal_matrix(g.degree_vector()) - g.weights();
  k.makeCompressed();
  return k;
}

SparseMatrix sar_kernel(const AdjacencyGraph& g) {
  const SparseMatrix b = identity(g.size()) - g.row_normalized();
  return transpose_times(b, b);
}

NngpFactors nngp_factors(const DirectedNeighborSets& ns, std::span<const Point> coords,
                         const CorrelationSpec& cs) {
  cs.validate();
  const Index n = ns.size();
  if (static_cast<Index>(coords.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "coordinates and neighbour sets differ in length");
  }
  auto dist = [&](Index a, Index b) {
    const Point& p = coords[static_cast<std::size_t>(a)];
    const Point& q = coords[static_cast<std::size_t>(b)];
    return std::hypot(p.x - q.x, p.y - q.y);
  };

  NngpFactors out;
  out.f = VectorXd::Ones(n);
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    const auto& s = ns.sets[static_cast<std::size_t>(i)];
    const auto k = static_cast<Index>(s.size());
    if (k == 0) continue;
    MatrixXd css(k, k);
    VectorXd csi(k);
    for (Index a = 0; a < k; ++a) {
      csi[a] = cs(dist(i, s[static_cast<std::size_t>(a)]));
      for (Index b = 0; b < k; ++b) css(a, b) = cs(dist(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]));
    }
    Eigen::LLT<MatrixXd> llt(css);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
      throw Error(ErrorCode::IllConditionedCorrelation,
                  "neighbour correlation matrix of point " + std::to_string(i) + " is numerically singular");
    }
    const VectorXd b = llt.solve(csi);
    const double f = 1.0 - b.dot(csi);
    if (!(f > 1e-12)) {
      throw Error(ErrorCode::IllConditionedCorrelation,
                  "conditional variance of point " + std::to_string(i) + " is not positive");
    }
    out.f[i] = f;
    for (Index a = 0; a < k; ++a) t.emplace_back(i, s[static_cast<std::size_t>(a)], b[a]);
  }
  out.b.resize(n, n);
  out.b.setFromTriplets(t.begin(), t.end());
  out.b.makeCompressed();
  return out;
}

SparseMatrix nngp_kernel(const NngpFactors& nf) {
  const Index n = nf.f.size();
  const SparseMatrix r = identity(n) - nf.b;
  const SparseMatrix finv = diagonal_matrix(nf.f.cwiseInverse());
  SparseMatrix rt = r.transpose();
  SparseMatrix k = rt * (finv * r);
  k.makeCompressed();
  return k;
}

SparseMatrix precision_nngp_tar(const DirectedNeighborSets& ns, std::span<const Point> coords,
                                const CorrelationSpec& cs, double delta, double sigma2) {
  require_positive("delta", delta);
  require_positive("sigma2", sigma2);
  const NngpFactors nf = nngp_factors(ns, coords, cs);
  SparseMatrix q = ((1.0 / delta) * identity(ns.size()) + nngp_kernel(nf)) / sigma2;
  q.makeCompressed();
  return q;
}

void validate_parameter(Family family, double theta) {
  if (!std::isfinite(theta)) {
    throw Error(ErrorCode::ParameterRange, "grid value must be finite, got " + fmt(theta));
  }
  if (uses_delta(family)) {
    require_positive("delta", theta);
  } else if (family == Family::Sar && std::abs(theta) >= 1.0) {
    throw Error(ErrorCode::ParameterRange, "SAR rho must lie in (-1, 1), got " + fmt(theta));
  }
}

PrecisionModel PrecisionModel::areal(Family family, AdjacencyGraph graph, std::vector<double> grid) {
  if (family == Family::NngpTar) {
    throw Error(ErrorCode::InvalidInput, "nngp-tar needs coordinates, not an adjacency graph");
  }
  if (grid.empty()) throw Error(ErrorCode::InvalidInput, "parameter grid is empty");
  for (double v : grid) validate_parameter(family, v);
  PrecisionModel m;
  m.family_ = family;
  m.n_ = graph.size();
  m.grid_ = std::move(grid);
  m.graph_ = std::move(graph);
  m.build_terms();
  return m;
}

PrecisionModel PrecisionModel::nngp(DirectedNeighborSets ns, std::vector<Point> coords, CorrelationSpec cs,
                                    std::vector<double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidInput, "parameter grid is empty");
  for (double v : grid) validate_parameter(Family::NngpTar, v);
  PrecisionModel m;
  m.family_ = Family::NngpTar;
  m.n_ = ns.size();
  m.grid_ = std::move(grid);
  m.nngp_ = ::tarsp::nngp_factors(ns, coords, cs);
  m.build_terms();
  return m;
}

void PrecisionModel::build_terms() {
  const SparseMatrix id = identity(n_);
  SparseMatrix t0, t1, t2;
  switch (family_) {
    case Family::TarC:
      t0 = diagonal_matrix(graph_->degree_vector());
      t1 = car_kernel(*graph_);
      kernel_ = t1;
      break;
    case Family::TarS:
      t0 = id;
      t1 = sar_kernel(*graph_);
      kernel_ = t1;
      break;
    case Family::Car:
      t0 = diagonal_matrix(graph_->degree_vector());
      t1 = graph_->weights();
      break;
    case Family::Sar: {
      const SparseMatrix& a = graph_->row_normalized();
      t0 = id;
      t1 = SparseMatrix(a.transpose()) + a;
      t2 = transpose_times(a, a);
      break;
    }
    case Family::NngpTar:
      t0 = id;
      t1 = nngp_kernel(*nngp_);
      kernel_ = t1;
      break;
  }
  if (t2.size() == 0) t2.resize(n_, n_);
  const SparseMatrix pattern = t0 + t1 + t2;
  t0_ = align(pattern, t0);
  t1_ = align(pattern, t1);
  t2_ = align(pattern, t2);
}

SparseMatrix PrecisionModel::precision(double theta, double sigma2) const {
  validate_parameter(family_, theta);
  require_positive("sigma2", sigma2);
  double w0 = 1.0, w1 = 1.0, w2 = 0.0;
  switch (family_) {
    case Family::TarC:
    case Family::TarS:
    case Family::NngpTar:
      w0 = 1.0 / theta;
      break;
    case Family::Car:
      w1 = -theta;
      break;
    case Family::Sar:
      w1 = -theta;
      w2 = theta * theta;
      break;
  }
  SparseMatrix q = t0_;
  const Index nnz = q.nonZeros();
  double* out = q.valuePtr();
  const double* v0 = t0_.valuePtr();
  const double* v1 = t1_.valuePtr();
  const double* v2 = t2_.valuePtr();
  for (Index k = 0; k < nnz; ++k) out[k] = (w0 * v0[k] + w1 * v1[k] + w2 * v2[k]) / sigma2;
  return q;
}

const SparseMatrix& PrecisionModel::limit_kernel() const {
  if (!uses_delta(family_)) {
    throw Error(ErrorCode::InvalidInput, "limit kernel is defined for the TAR families only");
  }
  return kernel_;
}

void PrecisionModel::validate_grid() const {
  SparseCholesky chol;
  chol.analyze(t0_);
  for (double v : grid_) {
    if (!chol.try_factorize(precision(v))) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  std::string(family_name(family_)) + " precision is not positive definite at " + fmt(v));
    }
  }
}

CarRepresentation car_representation(const AdjacencyGraph& g, Family family, double delta,
                                     double sigma2) {
  require_positive("delta", delta);
  require_positive("sigma2", sigma2);
  const double tau2 = delta * sigma2;
  const double k = 1.0 / tau2 + 1.0 / sigma2;
  const Index n = g.size();
  const SparseMatrix& a = g.row_normalized();

  CarRepresentation rep;
  SparseMatrix q;
  if (family == Family::TarC) {
    rep.c = (tau2 / (tau2 + sigma2)) * a;
    rep.m = (k * g.degree_vector()).cwiseInverse();
    q = precision_tar_c(g, delta, sigma2);
  } else if (family == Family::TarS) {
    const SparseMatrix ata = transpose_times(a, a);
    VectorXd d1 = VectorXd::Zero(n);
    std::vector<Triplet> t2;
    for (Index col = 0; col < ata.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(ata, col); it; ++it) {
        if (it.row() == it.col()) {
          d1[it.row()] = it.value();
        } else {
          t2.emplace_back(it.row(), it.col(), it.value());
        }
      }
    }
    SparseMatrix d2(n, n);
    d2.setFromTriplets(t2.begin(), t2.end());
    const VectorXd d = VectorXd::Constant(n, k) + d1 / sigma2;
    const SparseMatrix r = (SparseMatrix(a.transpose()) + a - d2) / sigma2;
    rep.c = diagonal_matrix(d.cwiseInverse()) * r;
    rep.m = d.cwiseInverse();
    q = precision_tar_s(g, delta, sigma2);
  } else {
    throw Error(ErrorCode::InvalidInput, "CAR representation is built for tar-c and tar-s only");
  }
  rep.c.makeCompressed();

  auto mismatch = [](const std::string& what) {
    throw Error(ErrorCode::RepresentationMismatch, what);
  };

  if (!is_positive_definite(q)) mismatch("Q is not positive definite");
  for (Index i = 0; i < n; ++i) {
    if (!(rep.m[i] > 0.0) || !std::isfinite(rep.m[i])) mismatch("M has a non-positive diagonal entry");
  }
  const SparseMatrix s = diagonal_matrix(rep.m.cwiseInverse()) * rep.c;  // c_ij / m_ii
  const double s_scale = std::max(1e-300, max_abs(s));
  for (Index col = 0; col < s.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(s, col); it; ++it) {
      if (it.row() == it.col() && it.value() != 0.0) mismatch("C has a non-zero diagonal entry");
      if (std::abs(it.value() - s.coeff(it.col(), it.row())) > 1e-12 * s_scale) {
        mismatch("c_ij / m_ii differs from c_ji / m_jj");
      }
    }
  }

  const SparseMatrix recon = diagonal_matrix(rep.m.cwiseInverse()) * (identity(n) - rep.c);
  rep.identity_residual = max_abs(SparseMatrix(recon - q)) / max_abs(q);
  if (rep.identity_residual > 1e-8) mismatch("M^{-1}(I - C) does not reproduce Q");

  if (n <= 500) {
    const MatrixXd qd = MatrixXd(q);
    const MatrixXd qinv = qd.llt().solve(MatrixXd::Identity(n, n));
    const MatrixXd ic = MatrixXd::Identity(n, n) - MatrixXd(rep.c);
    const MatrixXd cov = ic.partialPivLu().solve(MatrixXd(rep.m.asDiagonal()));
    rep.inverse_residual = (cov - qinv).cwiseAbs().maxCoeff();
    if (*rep.inverse_residual > 1e-8 * std::max(1.0, qinv.cwiseAbs().maxCoeff())) {
      mismatch("(I - C)^{-1} M does not reproduce Q^{-1}");
    }
  }
  return rep;
}

void write_triplets(std::ostream& os, const SparseMatrix& m) {
  const auto old = os.precision(17);
  for (Index col = 0; col < m.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  os.precision(old);
}

}  // namespace tarsp

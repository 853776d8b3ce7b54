#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tarsp/graph.hpp"
#include "tarsp/linalg.hpp"

namespace tarsp {

enum class Family { TarC, TarS, Car, Sar, NngpTar };

/// CLI spelling: tar-c, tar-s, car, sar, nngp-tar.
std::string_view family_name(Family f);
/// Throws Config for an unknown name.
Family parse_family(std::string_view name);

/// TAR families carry a δ grid (τ² = δσ²); CAR/SAR carry a ρ grid.
bool uses_delta(Family f);

/// Exponential correlation C(s, s') = exp(-phi * |s - s'|).
struct CorrelationSpec {
  double phi = 1.0;

  double operator()(double distance) const;
  void validate() const;
};

/// Q = (1/σ²)[(1/δ)D_w + (D_w - W)].
SparseMatrix precision_tar_c(const AdjacencyGraph& g, double delta, double sigma2);
/// Q = (1/σ²)[(1/δ)I + (I - A)'(I - A)].
SparseMatrix precision_tar_s(const AdjacencyGraph& g, double delta, double sigma2);
/// Q = (1/σ²)(D_w - ρW). Throws NotPositiveDefinite when the factorization
/// fails, which is exactly the case ρ outside car_rho_range(g).
SparseMatrix precision_car(const AdjacencyGraph& g, double rho, double sigma2);
/// Q = (1/σ²)(I - ρA)'(I - ρA); |ρ| >= 1 is a ParameterRange error.
SparseMatrix precision_sar(const AdjacencyGraph& g, double rho, double sigma2);

/// Directed nearest-neighbour regression weights: row i of `b` holds
/// C(s_i, S_i) C(S_i, S_i)^{-1} and f[i] = 1 - b_i' C(S_i, s_i).
struct NngpFactors {
  SparseMatrix b;
  VectorXd f;
};

NngpFactors nngp_factors(const DirectedNeighborSets& ns, std::span<const Point> coords,
                         const CorrelationSpec& cs);

/// Q = (1/σ²)[(1/δ)I + (I - B)' F^{-1} (I - B)].
SparseMatrix precision_nngp_tar(const DirectedNeighborSets& ns, std::span<const Point> coords,
                                const CorrelationSpec& cs, double delta, double sigma2);

/// The τ² = ∞ kernels: D_w - W, (I - A)'(I - A) and (I - B)'F^{-1}(I - B).
SparseMatrix car_kernel(const AdjacencyGraph& g);
SparseMatrix sar_kernel(const AdjacencyGraph& g);
SparseMatrix nngp_kernel(const NngpFactors& nf);

/// A family plus its candidate grid for δ or ρ. Q(θ, σ²) is assembled as a
/// fixed linear combination of a few precomputed sparse terms that share one
/// sparsity pattern, so every grid value can reuse one symbolic Cholesky
/// analysis.
class PrecisionModel {
 public:
  /// Areal families. Throws ParameterRange for invalid grid values
  /// (δ <= 0, |ρ| >= 1 for SAR, non-finite) and InvalidInput for an empty
  /// grid. CAR positive definiteness is checked when a value is factorized.
  static PrecisionModel areal(Family family, AdjacencyGraph graph, std::vector<double> grid);
  static PrecisionModel nngp(DirectedNeighborSets ns, std::vector<Point> coords, CorrelationSpec cs,
                             std::vector<double> grid);

  Family family() const { return family_; }
  const std::vector<double>& grid() const { return grid_; }
  Index size() const { return n_; }

  /// Present for the areal families only.
  const std::optional<AdjacencyGraph>& graph() const { return graph_; }
  /// Present for NngpTar only.
  const std::optional<NngpFactors>& nngp_factors() const { return nngp_; }

  /// Q(θ, σ²) = Q(θ, 1) / σ².
  SparseMatrix precision(double theta, double sigma2 = 1.0) const;
  /// The τ² = ∞ limit kernel for TAR families; throws InvalidInput otherwise.
  const SparseMatrix& limit_kernel() const;

  /// Attempts a Cholesky factorization of every grid value; throws
  /// NotPositiveDefinite naming the first value that fails.
  void validate_grid() const;

 private:
  PrecisionModel() = default;
  void build_terms();

  Family family_ = Family::TarC;
  Index n_ = 0;
  std::vector<double> grid_;
  std::optional<AdjacencyGraph> graph_;
  std::optional<NngpFactors> nngp_;

  // Q(θ, 1) = w0(θ) * t0 + w1(θ) * t1 + w2(θ) * t2 on a common pattern.
  SparseMatrix t0_;
  SparseMatrix t1_;
  SparseMatrix t2_;
  SparseMatrix kernel_;
};

void validate_parameter(Family family, double theta);

/// Q^{-1} = (I - C)^{-1} M with M diagonal, for the two TAR families.
struct CarRepresentation {
  SparseMatrix c;
  VectorXd m;  // diagonal of M
  double identity_residual = 0.0;  // max |M^{-1}(I - C) - Q| / max |Q|
  std::optional<double> inverse_residual;  // max |(I - C)^{-1}M - Q^{-1}|, n <= 500
};

/// Builds C and M, then checks c_ii = 0, m_ii > 0, c_ij/m_ii = c_ji/m_jj,
/// positive definiteness of Q and the identity M^{-1}(I - C) = Q. Any
/// residual above 1e-8 throws RepresentationMismatch.
CarRepresentation car_representation(const AdjacencyGraph& g, Family family, double delta,
                                     double sigma2);

/// One `i j value` line per stored entry, 0-based.
void write_triplets(std::ostream& os, const SparseMatrix& m);

}  // namespace tarsp

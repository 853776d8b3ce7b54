#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "tarsp/linalg.hpp"
#include "tarsp/model.hpp"
#include "tarsp/sampler.hpp"

namespace tarsp {

struct NeumannConfig {
  /// Series longer than this are not attempted.
  Index max_order = 400;
  double tail_tol = 1e-8;
  bool enabled = true;
  /// When no contraction certificate exists (or max_order is exceeded), use
  /// sparse Cholesky column solves instead of failing with NoConvergence.
  bool allow_fallback = true;
  /// Upper bound on the total stored nonzeros of cached sparse powers A^k.
  Index power_cache_nonzeros = 8'000'000;

  void validate() const;
};

/// Smallest K >= 0 with |c|^{K+1} / (1 - |c|) < tail_tol, the max-row-sum
/// bound on the dropped tail of Σ c^k A^k for row-stochastic A. |c| < 1.
Index neumann_order(double c, double tail_tol);

/// Sums Σ_{k=0}^{K} c^k A^k into a dense matrix. Powers A^k are kept as
/// sparse matrices and reused for every later c; once the cache reaches its
/// nonzero budget the remaining terms continue as sparse-times-dense products.
class NeumannSeries {
 public:
  NeumannSeries(SparseMatrix a, Index nonzero_budget);

  MatrixXd sum(double c, Index order);
  Index cached_powers() const;
  Index cached_nonzeros() const { return cached_nonzeros_; }

 private:
  SparseMatrix a_;
  Index budget_;
  std::vector<SparseMatrix> powers_;  // powers_[k-1] = A^k
  Index cached_nonzeros_ = 0;
  bool full_ = false;
  std::mutex mutex_;
};

enum class CovarianceMethod { Neumann, Cholesky };

struct Covariance {
  MatrixXd sigma;  // Q(θ, 1)^{-1}, symmetrized
  CovarianceMethod method = CovarianceMethod::Cholesky;
  Index order = 0;  // series length when method == Neumann
};

/// Recovers Σ(θ) = Q(θ, 1)^{-1} for one model, caching matrix powers across θ.
/// The series route is taken for tar-c (c = δ/(1+δ), M = δ/((1+δ) D_w)) and
/// for car with |ρ| < 1 (c = ρ, M = D_w^{-1}); every other case uses sparse
/// Cholesky solves, or throws NoConvergence when fallback is disabled.
class CovarianceEngine {
 public:
  CovarianceEngine(const PrecisionModel& model, NeumannConfig cfg);

  Covariance covariance(double theta);
  /// Whether covariance(theta) would take the series route.
  bool has_certificate(double theta) const;

 private:
  const PrecisionModel& model_;
  NeumannConfig cfg_;
  std::unique_ptr<NeumannSeries> series_;
};

/// Dense Σ = Q^{-1} by sparse Cholesky column solves.
MatrixXd covariance_by_cholesky(const SparseMatrix& q);

/// One-shot form of CovarianceEngine::covariance.
Covariance covariance_from_precision(const PrecisionModel& model, double theta, const NeumannConfig& cfg);

/// How the conditional moments of y_M given y_O are obtained for one θ.
///   PrecisionBlocks:  Σ_MO Σ_OO^{-1} = -Q_MM^{-1} Q_MO and the conditional
///                     covariance is Q_MM^{-1}; only the n_M x n_M inverse is
///                     formed, by the series on the missing block when a
///                     certificate exists.
///   CovarianceBlocks: dense Σ(θ) from CovarianceEngine, then an LL'
///                     factorization of Σ_OO.
/// Both give the same predictive law; the second is the literal form and
/// serves as a cross-check.
enum class KrigingRoute { PrecisionBlocks, CovarianceBlocks };

struct KrigingOptions {
  int threads = 1;
  /// Reuse Σ(θ)-derived terms across draws sharing a θ. Turning it off
  /// recomputes them per draw and must not change the output.
  bool cache = true;
  KrigingRoute route = KrigingRoute::PrecisionBlocks;
};

struct PredictiveSummary {
  std::vector<Index> ids;  // missing regions, ascending
  VectorXd point;
  VectorXd lower;
  VectorXd upper;
  MatrixXd samples;  // G x n_M
  double alpha = 0.05;
  std::map<double, CovarianceMethod> methods;  // per distinct θ used
  std::vector<std::string> warnings;

  Index size() const { return static_cast<Index>(ids.size()); }
};

/// Per-draw, per-location sampling from the univariate conditional normal
///   mean_i = x_i'β_g + Σ_{iO} Σ_OO^{-1} (y_O - X_Oβ_g)
///   var_i  = σ²_g (Σ_ii - Σ_{iO} Σ_OO^{-1} Σ_{Oi})
/// with Σ = Σ(θ_g). Location i draws from its own RNG stream, so the output
/// does not depend on the thread count.
PredictiveSummary kriging_predict(const Dataset& data, const PrecisionModel& model, const PosteriorDraws& draws,
                                  const NeumannConfig& cfg, double alpha, std::uint64_t seed,
                                  const KrigingOptions& opts = {});

/// Per-θ conditional moments at unit σ²: mean_i = h_i'β + ky_i and
/// sd_i² the conditional variance. Exposed for tests and benchmarks.
struct KrigingTerms {
  MatrixXd h;   // X_M - Σ_MO Σ_OO^{-1} X_O
  VectorXd ky;  // Σ_MO Σ_OO^{-1} y_O
  VectorXd sd;
  CovarianceMethod method = CovarianceMethod::Cholesky;
};

/// Precomputes what is shared by every θ for one dataset and model.
class KrigingSystem {
 public:
  KrigingSystem(const Dataset& data, const PrecisionModel& model, NeumannConfig cfg, KrigingRoute route);
  ~KrigingSystem();
  KrigingSystem(const KrigingSystem&) = delete;
  KrigingSystem& operator=(const KrigingSystem&) = delete;

  KrigingTerms terms(double theta);
  const std::vector<Index>& missing() const { return mis_; }

 private:
  KrigingTerms from_precision(double theta);
  KrigingTerms from_covariance(double theta);

  const PrecisionModel& model_;
  NeumannConfig cfg_;
  KrigingRoute route_;
  std::vector<Index> obs_;
  std::vector<Index> mis_;
  VectorXd y_o_;
  MatrixXd x_o_;
  MatrixXd x_m_;
  std::unique_ptr<NeumannSeries> block_series_;  // powers of D_M^{-1} W_MM
  std::unique_ptr<CovarianceEngine> engine_;
  std::unique_ptr<SparseCholesky> block_chol_;
};

/// Same moments with Σ(θ) from a dense LL' factorization of Q(θ) for every θ,
/// i.e. without any reuse across θ. Baseline for benchmarks and tests.
KrigingTerms kriging_terms_dense(const Dataset& data, const PrecisionModel& model, double theta);

/// Wall-clock time of the per-θ Kriging terms over the model's grid through
/// KrigingSystem (cached powers) and through kriging_terms_dense.
struct KrigingBenchmark {
  Index thetas = 0;
  double cached_seconds = 0.0;
  double dense_seconds = 0.0;
  double max_difference = 0.0;  // over h, ky and sd
  Index neumann_count = 0;
};

KrigingBenchmark benchmark_kriging(const Dataset& data, const PrecisionModel& model, const NeumannConfig& cfg);

/// truth - point at the predicted regions; UnavailableTruth without truth.
VectorXd residual_map(const Dataset& data, const PredictiveSummary& summary);

/// `id,point,lower,upper`, plus `,truth,residual` when the full-length truth
/// vector (indexed by region id) is given.
void write_predictions_csv(std::ostream& os, const PredictiveSummary& s, const VectorXd* truth = nullptr);
/// Header `draw,<id>...`, one row per posterior draw.
void write_samples_csv(std::ostream& os, const PredictiveSummary& s);

std::string_view method_name(CovarianceMethod m);

}  // namespace tarsp

#include "tarsp/predict.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <optional>
#include <random>

#include <Eigen/Cholesky>

#include "parallel.hpp"
#include "tarsp/csv.hpp"
#include "tarsp/error.hpp"
#include "tarsp/rng.hpp"

namespace tarsp {

void NeumannConfig::validate() const {
  if (max_order < 1) throw Error(ErrorCode::Config, "Neumann max order must be >= 1");
  if (!(tail_tol > 0.0)) throw Error(ErrorCode::Config, "Neumann tail tolerance must be > 0");
  if (power_cache_nonzeros < 0) throw Error(ErrorCode::Config, "power cache budget must be >= 0");
}

Index neumann_order(double c, double tail_tol) {
  const double a = std::abs(c);
  if (!(a < 1.0)) throw Error(ErrorCode::NoConvergence, "Neumann series needs |c| < 1");
  if (!(tail_tol > 0.0)) throw Error(ErrorCode::Config, "tail tolerance must be > 0");
  if (a == 0.0) return 0;
  // |c|^{K+1} < tol (1 - |c|)  <=>  K + 1 > log(tol (1 - |c|)) / log|c|
  const double bound = std::log(tail_tol * (1.0 - a)) / std::log(a);
  auto k = static_cast<Index>(std::max(0.0, std::floor(bound)));
  while (k > 0 && std::pow(a, static_cast<double>(k)) / (1.0 - a) < tail_tol) --k;
  while (!(std::pow(a, static_cast<double>(k + 1)) / (1.0 - a) < tail_tol)) ++k;
  return k;
}

NeumannSeries::NeumannSeries(SparseMatrix a, Index nonzero_budget) : a_(std::move(a)), budget_(nonzero_budget) {
  a_.makeCompressed();
}

Index NeumannSeries::cached_powers() const { return static_cast<Index>(powers_.size()); }

MatrixXd NeumannSeries::sum(double c, Index order) {
  std::lock_guard<std::mutex> lock(mutex_);
  const Index n = a_.rows();
  MatrixXd s = MatrixXd::Identity(n, n);
  if (order == 0) return s;

  // Extend the sparse cache as far as the budget allows.
  while (!full_ && static_cast<Index>(powers_.size()) < order) {
    SparseMatrix next = powers_.empty() ? a_ : SparseMatrix(a_ * powers_.back());
    next.makeCompressed();
    if (cached_nonzeros_ + next.nonZeros() > budget_) {
      full_ = true;
      break;
    }
    cached_nonzeros_ += next.nonZeros();
    powers_.push_back(std::move(next));
  }

  const Index from_cache = std::min<Index>(order, static_cast<Index>(powers_.size()));
  double ck = 1.0;
  for (Index k = 1; k <= from_cache; ++k) {
    ck *= c;
    const SparseMatrix& p = powers_[static_cast<std::size_t>(k - 1)];
    for (Index col = 0; col < p.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(p, col); it; ++it) s(it.row(), it.col()) += ck * it.value();
    }
  }
  if (from_cache < order) {
    MatrixXd t = from_cache == 0 ? MatrixXd::Identity(n, n)
                                 : MatrixXd(powers_[static_cast<std::size_t>(from_cache - 1)]);
    for (Index k = from_cache + 1; k <= order; ++k) {
      ck *= c;
      t = a_ * t;
      s += ck * t;
    }
  }
  return s;
}

std::string_view method_name(CovarianceMethod m) {
  return m == CovarianceMethod::Neumann ? "neumann" : "cholesky";
}

MatrixXd covariance_by_cholesky(const SparseMatrix& q) {
  SparseCholesky chol(q);
  MatrixXd s = chol.solve(MatrixXd(MatrixXd::Identity(q.rows(), q.cols())));
  return 0.5 * (s + s.transpose());
}

CovarianceEngine::CovarianceEngine(const PrecisionModel& model, NeumannConfig cfg) : model_(model), cfg_(cfg) {
  cfg_.validate();
  if (model_.graph() && (model_.family() == Family::TarC || model_.family() == Family::Car)) {
    series_ = std::make_unique<NeumannSeries>(model_.graph()->row_normalized(), cfg_.power_cache_nonzeros);
  }
}

bool CovarianceEngine::has_certificate(double theta) const {
  if (!cfg_.enabled || !series_) return false;
  const double c = model_.family() == Family::TarC ? theta / (1.0 + theta) : theta;
  if (!(std::abs(c) < 1.0)) return false;
  return neumann_order(c, cfg_.tail_tol) <= cfg_.max_order;
}

Covariance CovarianceEngine::covariance(double theta) {
  validate_parameter(model_.family(), theta);
  Covariance out;
  if (has_certificate(theta)) {
    const VectorXd d = model_.graph()->degree_vector();
    double c = 0.0;
    VectorXd m;
    if (model_.family() == Family::TarC) {
      c = theta / (1.0 + theta);
      m = (c * d.cwiseInverse());  // δ / ((1 + δ) d_i)
    } else {
      c = theta;
      m = d.cwiseInverse();
    }
    out.order = neumann_order(c, cfg_.tail_tol);
    MatrixXd s = series_->sum(c, out.order);
    s.array().rowwise() *= m.transpose().array();
    out.sigma = 0.5 * (s + s.transpose());
    out.method = CovarianceMethod::Neumann;
    return out;
  }
  if (cfg_.enabled && !cfg_.allow_fallback) {
    throw Error(ErrorCode::NoConvergence, std::string("no contraction certificate for ") +
                                              std::string(family_name(model_.family())) + " at " +
                                              format_double(theta) + " and fallback is disabled");
  }
  out.sigma = covariance_by_cholesky(model_.precision(theta));
  out.method = CovarianceMethod::Cholesky;
  return out;
}

Covariance covariance_from_precision(const PrecisionModel& model, double theta, const NeumannConfig& cfg) {
  CovarianceEngine engine(model, cfg);
  return engine.covariance(theta);
}

namespace {

// Series data for Q(θ, 1) = m^{-1}-scaled (I - c A) on a graph family, or
// nullopt when the family has no such form.
struct SeriesForm {
  double c = 0.0;
  double m_scale = 1.0;  // Q^{-1} = (Σ c^k A^k) diag(m_scale / d_i)
};

std::optional<SeriesForm> series_form(Family family, double theta) {
  if (family == Family::TarC) return SeriesForm{theta / (1.0 + theta), theta / (1.0 + theta)};
  if (family == Family::Car) return SeriesForm{theta, 1.0};
  return std::nullopt;
}

KrigingTerms covariance_terms(const MatrixXd& sigma, CovarianceMethod method, const std::vector<Index>& obs,
                              const std::vector<Index>& mis, const VectorXd& y_o, const MatrixXd& x_o,
                              const MatrixXd& x_m) {
  const auto n_o = static_cast<Index>(obs.size());
  const auto n_m = static_cast<Index>(mis.size());
  MatrixXd s_oo(n_o, n_o);
  MatrixXd s_om(n_o, n_m);
  for (Index b = 0; b < n_o; ++b) {
    for (Index a = 0; a < n_o; ++a) s_oo(a, b) = sigma(obs[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
  }
  for (Index b = 0; b < n_m; ++b) {
    for (Index a = 0; a < n_o; ++a) s_om(a, b) = sigma(obs[static_cast<std::size_t>(a)], mis[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "observed covariance block is not positive definite");
  }
  const MatrixXd kt = llt.solve(s_om);  // Σ_OO^{-1} Σ_OM
  KrigingTerms t;
  t.method = method;
  t.h = x_m - kt.transpose() * x_o;
  t.ky = kt.transpose() * y_o;
  t.sd.resize(n_m);
  for (Index i = 0; i < n_m; ++i) {
    const Index id = mis[static_cast<std::size_t>(i)];
    const double v = sigma(id, id) - s_om.col(i).dot(kt.col(i));
    if (!(v > 0.0)) {
      throw Error(ErrorCode::NumericalFailure, "non-positive conditional variance at region " + std::to_string(id));
    }
    t.sd[i] = std::sqrt(v);
  }
  return t;
}

}  // namespace

KrigingSystem::KrigingSystem(const Dataset& data, const PrecisionModel& model, NeumannConfig cfg, KrigingRoute route)
    : model_(model), cfg_(cfg), route_(route) {
  cfg_.validate();
  if (model.size() != data.size()) throw Error(ErrorCode::ShapeMismatch, "model and data sizes differ");
  obs_ = data.observed_indices();
  mis_ = data.missing_indices();
  y_o_ = select(data.y, obs_);
  x_o_ = select_rows(data.x, obs_);
  x_m_ = select_rows(data.x, mis_);
  if (route_ == KrigingRoute::CovarianceBlocks) {
    engine_ = std::make_unique<CovarianceEngine>(model_, cfg_);
  } else if (model_.graph() && series_form(model_.family(), model_.grid().front()) && !mis_.empty()) {
    // D_M^{-1} W_MM: rows of the row-normalized A restricted to the missing
    // block, so its max row sum is at most 1.
    const SparseMatrix a_mm = principal_submatrix(model_.graph()->row_normalized(), mis_);
    block_series_ = std::make_unique<NeumannSeries>(a_mm, cfg_.power_cache_nonzeros);
  }
}

KrigingSystem::~KrigingSystem() = default;

KrigingTerms KrigingSystem::terms(double theta) {
  validate_parameter(model_.family(), theta);
  if (mis_.empty()) return {};
  return route_ == KrigingRoute::CovarianceBlocks ? from_covariance(theta) : from_precision(theta);
}

KrigingTerms KrigingSystem::from_covariance(double theta) {
  const Covariance cov = engine_->covariance(theta);
  return covariance_terms(cov.sigma, cov.method, obs_, mis_, y_o_, x_o_, x_m_);
}

KrigingTerms KrigingSystem::from_precision(double theta) {
  const SparseMatrix q = model_.precision(theta);
  const auto n_m = static_cast<Index>(mis_.size());
  KrigingTerms t;
  MatrixXd p;  // Q_MM^{-1}
  const auto form = series_form(model_.family(), theta);
  const bool series = cfg_.enabled && block_series_ && form && std::abs(form->c) < 1.0 &&
                      neumann_order(form->c, cfg_.tail_tol) <= cfg_.max_order;
  if (series) {
    const VectorXd d = model_.graph()->degree_vector();
    VectorXd m(n_m);
    for (Index i = 0; i < n_m; ++i) m[i] = form->m_scale / d[mis_[static_cast<std::size_t>(i)]];
    p = block_series_->sum(form->c, neumann_order(form->c, cfg_.tail_tol));
    p.array().rowwise() *= m.transpose().array();
    t.method = CovarianceMethod::Neumann;
  } else {
    if (cfg_.enabled && !cfg_.allow_fallback) {
      throw Error(ErrorCode::NoConvergence, std::string("no contraction certificate for ") +
                                                std::string(family_name(model_.family())) + " at " +
                                                format_double(theta) + " and fallback is disabled");
    }
    const SparseMatrix q_mm = principal_submatrix(q, mis_);
    if (!block_chol_) {
      block_chol_ = std::make_unique<SparseCholesky>();
      block_chol_->analyze(q_mm);
    }
    if (!block_chol_->try_factorize(q_mm)) {
      throw Error(ErrorCode::NumericalFailure, "missing-block precision is not positive definite");
    }
    p = block_chol_->solve(MatrixXd(MatrixXd::Identity(n_m, n_m)));
    t.method = CovarianceMethod::Cholesky;
  }
  p = 0.5 * (p + p.transpose());
  // Σ_MO Σ_OO^{-1} = -Q_MM^{-1} Q_MO
  const SparseMatrix q_mo = submatrix(q, mis_, obs_);
  const MatrixXd qx = q_mo * x_o_;
  const VectorXd qy = q_mo * y_o_;
  t.h = x_m_ + p * qx;
  t.ky = -(p * qy);
  t.sd.resize(n_m);
  for (Index i = 0; i < n_m; ++i) {
    if (!(p(i, i) > 0.0)) {
      throw Error(ErrorCode::NumericalFailure,
                  "non-positive conditional variance at region " + std::to_string(mis_[static_cast<std::size_t>(i)]));
    }
    t.sd[i] = std::sqrt(p(i, i));
  }
  return t;
}

KrigingTerms kriging_terms_dense(const Dataset& data, const PrecisionModel& model, double theta) {
  validate_parameter(model.family(), theta);
  const auto obs = data.observed_indices();
  const auto mis = data.missing_indices();
  const MatrixXd q(model.precision(theta));
  Eigen::LLT<MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "precision is not positive definite");
  MatrixXd sigma = llt.solve(MatrixXd::Identity(q.rows(), q.cols()));
  sigma = 0.5 * (sigma + sigma.transpose());
  return covariance_terms(sigma, CovarianceMethod::Cholesky, obs, mis, select(data.y, obs), select_rows(data.x, obs),
                          select_rows(data.x, mis));
}

KrigingBenchmark benchmark_kriging(const Dataset& data, const PrecisionModel& model, const NeumannConfig& cfg) {
  using clock = std::chrono::steady_clock;
  KrigingBenchmark out;
  out.thetas = static_cast<Index>(model.grid().size());
  std::vector<KrigingTerms> fast;
  const auto t0 = clock::now();
  KrigingSystem sys(data, model, cfg, KrigingRoute::PrecisionBlocks);
  for (double theta : model.grid()) {
    fast.push_back(sys.terms(theta));
    if (fast.back().method == CovarianceMethod::Neumann) ++out.neumann_count;
  }
  const auto t1 = clock::now();
  std::vector<KrigingTerms> dense;
  for (double theta : model.grid()) dense.push_back(kriging_terms_dense(data, model, theta));
  const auto t2 = clock::now();
  out.cached_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.dense_seconds = std::chrono::duration<double>(t2 - t1).count();
  for (std::size_t k = 0; k < fast.size(); ++k) {
    out.max_difference = std::max({out.max_difference, max_abs(MatrixXd(fast[k].h - dense[k].h)),
                                   max_abs(MatrixXd(fast[k].ky - dense[k].ky)),
                                   max_abs(MatrixXd(fast[k].sd - dense[k].sd))});
  }
  return out;
}

PredictiveSummary kriging_predict(const Dataset& data, const PrecisionModel& model, const PosteriorDraws& draws,
                                  const NeumannConfig& cfg, double alpha, std::uint64_t seed,
                                  const KrigingOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::Config, "alpha must lie in (0, 1)");
  if (draws.size() < 1) throw Error(ErrorCode::InvalidInput, "no posterior draws");
  if (model.size() != data.size()) throw Error(ErrorCode::ShapeMismatch, "model and data sizes differ");
  if (draws.beta.cols() != data.num_covariates()) {
    throw Error(ErrorCode::ShapeMismatch, "posterior draws and design differ in the number of covariates");
  }
  PredictiveSummary out;
  out.alpha = alpha;
  out.ids = data.missing_indices();
  const Index g_count = draws.size();
  const auto n_m = static_cast<Index>(out.ids.size());
  out.samples.resize(g_count, n_m);
  out.point.resize(n_m);
  out.lower.resize(n_m);
  out.upper.resize(n_m);
  if (n_m == 0) {
    out.warnings.push_back("no missing regions to predict");
    return out;
  }

  KrigingSystem system(data, model, cfg, opts.route);
  auto compute_terms = [&](double theta) {
    KrigingTerms t = system.terms(theta);
    out.methods[theta] = t.method;
    return t;
  };

  std::vector<Engine> engines;
  engines.reserve(static_cast<std::size_t>(n_m));
  for (Index i = 0; i < n_m; ++i) {
    engines.push_back(make_engine(seed, Stream::Kriging, static_cast<std::uint64_t>(out.ids[static_cast<std::size_t>(i)])));
  }

  auto sample_location = [&](const KrigingTerms& t, Index g, Index i) {
    std::normal_distribution<double> normal;
    const double mean = t.h.row(i).dot(draws.beta.row(g)) + t.ky[i];
    out.samples(g, i) = mean + std::sqrt(draws.sigma2[g]) * t.sd[i] * normal(engines[static_cast<std::size_t>(i)]);
  };

  if (opts.cache) {
    std::map<double, KrigingTerms> cache;
    for (Index g = 0; g < g_count; ++g) {
      if (!cache.count(draws.theta[g])) cache.emplace(draws.theta[g], compute_terms(draws.theta[g]));
    }
    std::vector<const KrigingTerms*> per_draw(static_cast<std::size_t>(g_count));
    for (Index g = 0; g < g_count; ++g) per_draw[static_cast<std::size_t>(g)] = &cache.at(draws.theta[g]);
    detail::parallel_for(static_cast<std::size_t>(n_m), opts.threads, [&](std::size_t, std::size_t i) {
      for (Index g = 0; g < g_count; ++g) sample_location(*per_draw[static_cast<std::size_t>(g)], g, static_cast<Index>(i));
    });
  } else {
    for (Index g = 0; g < g_count; ++g) {
      const KrigingTerms t = compute_terms(draws.theta[g]);
      for (Index i = 0; i < n_m; ++i) sample_location(t, g, i);
    }
  }

  std::vector<double> col(static_cast<std::size_t>(g_count));
  for (Index i = 0; i < n_m; ++i) {
    for (Index g = 0; g < g_count; ++g) col[static_cast<std::size_t>(g)] = out.samples(g, i);
    out.point[i] = out.samples.col(i).mean();
    std::sort(col.begin(), col.end());
    out.lower[i] = quantile_sorted(col, alpha / 2.0);
    out.upper[i] = quantile_sorted(col, 1.0 - alpha / 2.0);
  }
  return out;
}

VectorXd residual_map(const Dataset& data, const PredictiveSummary& summary) {
  if (!data.truth) throw Error(ErrorCode::UnavailableTruth, "no truth available at the predicted regions");
  VectorXd r(summary.size());
  for (Index i = 0; i < summary.size(); ++i) {
    r[i] = (*data.truth)[summary.ids[static_cast<std::size_t>(i)]] - summary.point[i];
  }
  return r;
}

void write_predictions_csv(std::ostream& os, const PredictiveSummary& s, const VectorXd* truth) {
  os << "id,point,lower,upper";
  if (truth) os << ",truth,residual";
  os << '\n';
  for (Index i = 0; i < s.size(); ++i) {
    const Index id = s.ids[static_cast<std::size_t>(i)];
    os << id << ',' << format_double(s.point[i]) << ',' << format_double(s.lower[i]) << ','
       << format_double(s.upper[i]);
    if (truth) os << ',' << format_double((*truth)[id]) << ',' << format_double((*truth)[id] - s.point[i]);
    os << '\n';
  }
}

void write_samples_csv(std::ostream& os, const PredictiveSummary& s) {
  os << "draw";
  for (Index id : s.ids) os << ',' << id;
  os << '\n';
  for (Index g = 0; g < s.samples.rows(); ++g) {
    os << g;
    for (Index i = 0; i < s.samples.cols(); ++i) os << ',' << format_double(s.samples(g, i));
    os << '\n';
  }
}

}  // namespace tarsp

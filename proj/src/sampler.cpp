#include "tarsp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "parallel.hpp"
#include "tarsp/csv.hpp"
#include "tarsp/error.hpp"
#include "tarsp/rng.hpp"

namespace tarsp {

Index Dataset::num_observed() const {
  return static_cast<Index>(std::count(observed.begin(), observed.end(), true));
}

std::vector<Index> Dataset::observed_indices() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

std::vector<Index> Dataset::missing_indices() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!observed[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

void Dataset::validate() const {
  const Index n = size();
  if (x.rows() != n || static_cast<Index>(observed.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "y, X and the observed mask must have the same length");
  }
  if (truth && truth->size() != n) throw Error(ErrorCode::ShapeMismatch, "truth length differs from y");
  if (!coords.empty() && static_cast<Index>(coords.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "coordinate count differs from y");
  }
  const Index p = x.cols();
  const auto obs = observed_indices();
  const auto n_o = static_cast<Index>(obs.size());
  if (n_o < p + 1) {
    throw Error(ErrorCode::InvalidMask, "need at least p + 1 = " + std::to_string(p + 1) +
                                            " observed regions, have " + std::to_string(n_o));
  }
  for (Index i : obs) {
    if (!std::isfinite(y[i]) || !x.row(i).allFinite()) {
      throw Error(ErrorCode::InvalidInput, "non-finite observed value at region " + std::to_string(i));
    }
  }
  const MatrixXd xo = select_rows(x, obs);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(xo);
  const double tol = 1e-10 * xo.norm();
  const VectorXd r = qr.matrixR().topLeftCorner(p, p).diagonal().cwiseAbs();
  const Index rank = (r.array() > tol).count();
  if (rank < p) {
    throw Error(ErrorCode::SingularDesign, "observed design has rank " + std::to_string(rank) + " < p = " +
                                               std::to_string(p));
  }
}

void PriorConfig::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorCode::ParameterRange, "inverse-gamma prior needs a > 0 and b > 0");
  }
}

SparseMatrix observed_precision(const SparseMatrix& q, const std::vector<bool>& observed) {
  if (static_cast<Index>(observed.size()) != q.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "mask length differs from precision size");
  }
  std::vector<Index> idx;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i]) idx.push_back(static_cast<Index>(i));
  }
  if (idx.empty()) throw Error(ErrorCode::InvalidMask, "no observed regions");
  return principal_submatrix(q, idx);
}

double ConditionalPosterior::draw_sigma2(Engine& eng) const {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return scale / gamma(eng);
}

VectorXd ConditionalPosterior::draw_beta(double sigma2, Engine& eng) const {
  std::normal_distribution<double> normal;
  VectorXd z(beta_hat.size());
  for (Index k = 0; k < z.size(); ++k) z[k] = normal(eng);
  const VectorXd w = gram_factor.transpose().triangularView<Eigen::Upper>().solve(z);
  return beta_hat + std::sqrt(sigma2) * w;
}

ConditionalPosterior conditional_posterior(const VectorXd& y_o, const MatrixXd& x_o, const SparseMatrix& q_o,
                                           SparseCholesky& chol, const PriorConfig& prior,
                                           double log_prior) {
  chol.factorize(q_o);
  const Index n_o = y_o.size();
  const Index p = x_o.cols();
  const MatrixXd qx = q_o * x_o;
  const MatrixXd gram = x_o.transpose() * qx;
  const VectorXd xqy = qx.transpose() * y_o;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularDesign, "X_O' Q_o X_O is not positive definite");
  }
  ConditionalPosterior cp;
  cp.beta_hat = llt.solve(xqy);
  cp.gram_factor = llt.matrixL();
  const double r = chol.quadratic_form(y_o - x_o * cp.beta_hat);
  cp.shape = prior.a + 0.5 * static_cast<double>(n_o - p);
  cp.scale = prior.b + 0.5 * r;
  const double logdet_gram = 2.0 * cp.gram_factor.diagonal().array().log().sum();
  cp.log_joint = 0.5 * chol.log_determinant() - 0.5 * logdet_gram - cp.shape * std::log(cp.scale) + log_prior;
  return cp;
}

double log_joint_theta(const Dataset& data, const SparseMatrix& q_o, const PriorConfig& prior,
                       double log_prior) {
  data.validate();
  prior.validate();
  const auto obs = data.observed_indices();
  if (q_o.rows() != static_cast<Index>(obs.size())) {
    throw Error(ErrorCode::ShapeMismatch, "Q_o size differs from the observed count");
  }
  SparseCholesky chol;
  chol.analyze(q_o);
  return conditional_posterior(select(data.y, obs), select_rows(data.x, obs), q_o, chol, prior, log_prior)
      .log_joint;
}

PosteriorDraws sample_posterior(const Dataset& data, const PrecisionModel& model, const PriorConfig& prior,
                                Index draws, std::uint64_t seed, const SamplerOptions& opts) {
  if (draws < 1) throw Error(ErrorCode::InvalidInput, "draw count G must be >= 1");
  data.validate();
  prior.validate();
  if (model.size() != data.size()) throw Error(ErrorCode::ShapeMismatch, "model and data sizes differ");

  const auto obs = data.observed_indices();
  const VectorXd y_o = select(data.y, obs);
  const MatrixXd x_o = select_rows(data.x, obs);
  const auto& grid = model.grid();
  const std::size_t k = grid.size();
  const double log_prior = -std::log(static_cast<double>(k));

  std::vector<ConditionalPosterior> terms(k);
  const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(k)));
  std::vector<SparseCholesky> chols(static_cast<std::size_t>(workers));
  std::vector<char> analysed(static_cast<std::size_t>(workers), 0);
  detail::parallel_for(k, workers, [&](std::size_t w, std::size_t i) {
    const SparseMatrix q_o = principal_submatrix(model.precision(grid[i]), obs);
    if (!analysed[w]) {
      chols[w].analyze(q_o);
      analysed[w] = 1;
    }
    try {
      terms[i] = conditional_posterior(y_o, x_o, q_o, chols[w], prior, log_prior);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPositiveDefinite) throw;
      throw Error(ErrorCode::NotPositiveDefinite, std::string(family_name(model.family())) +
                                                      " observed precision is not positive definite at " +
                                                      format_double(grid[i]));
    }
    terms[i].theta = grid[i];
  });

  PosteriorDraws out;
  out.family = model.family();
  out.grid = grid;
  out.seed = seed;
  out.column_names = data.column_names;
  out.log_joint.resize(static_cast<Index>(k));
  for (std::size_t i = 0; i < k; ++i) out.log_joint[static_cast<Index>(i)] = terms[i].log_joint;
  const double top = out.log_joint.maxCoeff();
  if (!std::isfinite(top)) throw Error(ErrorCode::NumericalFailure, "log posterior of the grid is not finite");
  out.probabilities = (out.log_joint.array() - top).exp();
  out.probabilities /= out.probabilities.sum();

  std::vector<double> cdf(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) cdf[i] = acc += out.probabilities[static_cast<Index>(i)];

  const Index p = data.num_covariates();
  out.beta.resize(draws, p);
  out.sigma2.resize(draws);
  out.theta.resize(draws);
  out.theta_index.resize(static_cast<std::size_t>(draws));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index g = 0; g < draws; ++g) {
    Engine eng = make_engine(seed, Stream::Posterior, static_cast<std::uint64_t>(g));
    const double u = unif(eng) * acc;
    const auto pick = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(k) - 1));
    const ConditionalPosterior& cp = terms[pick];
    const double s2 = cp.draw_sigma2(eng);
    out.theta_index[static_cast<std::size_t>(g)] = static_cast<Index>(pick);
    out.theta[g] = cp.theta;
    out.sigma2[g] = s2;
    out.beta.row(g) = cp.draw_beta(s2, eng).transpose();
  }
  return out;
}

PosteriorDraws sample_posterior_car_sar(const Dataset& data, const PrecisionModel& model,
                                        const PriorConfig& prior, Index draws, std::uint64_t seed,
                                        const SamplerOptions& opts) {
  if (model.family() != Family::Car && model.family() != Family::Sar) {
    throw Error(ErrorCode::InvalidInput, "expected a car or sar model");
  }
  return sample_posterior(data, model, prior, draws, seed, opts);
}

Interval summarize(const VectorXd& values, double alpha) {
  if (values.size() == 0) throw Error(ErrorCode::InvalidInput, "cannot summarize an empty sample");
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  return {values.mean(), quantile_sorted(v, alpha / 2.0), quantile_sorted(v, 1.0 - alpha / 2.0)};
}

void write_draws_csv(std::ostream& os, const PosteriorDraws& d) {
  os << "draw";
  for (Index j = 0; j < d.beta.cols(); ++j) os << ",beta_" << j;
  os << ",sigma2,theta\n";
  for (Index g = 0; g < d.size(); ++g) {
    os << g;
    for (Index j = 0; j < d.beta.cols(); ++j) os << ',' << format_double(d.beta(g, j));
    os << ',' << format_double(d.sigma2[g]) << ',' << format_double(d.theta[g]) << '\n';
  }
}

PosteriorDraws read_draws_csv(std::istream& is) {
  const CsvTable t = read_csv(is, "posterior draws");
  const auto cols = static_cast<Index>(t.header.size());
  if (cols < 4 || t.header.front() != "draw" || t.header[t.header.size() - 2] != "sigma2" ||
      t.header.back() != "theta") {
    throw Error(ErrorCode::Ingestion, "posterior draws header must be draw,beta_0..,sigma2,theta");
  }
  const Index p = cols - 3;
  const auto g = static_cast<Index>(t.rows.size());
  if (g == 0) throw Error(ErrorCode::Ingestion, "posterior draws file has no rows");
  PosteriorDraws d;
  d.beta.resize(g, p);
  d.sigma2.resize(g);
  d.theta.resize(g);
  for (Index r = 0; r < g; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    for (Index c = 1; c < cols; ++c) {
      double v = 0.0;
      if (!parse_double(row[static_cast<std::size_t>(c)], v)) {
        throw Error(ErrorCode::Ingestion, "posterior draws row " + std::to_string(r + 1) + " column " +
                                              t.header[static_cast<std::size_t>(c)] + " is not numeric");
      }
      if (c <= p) {
        d.beta(r, c - 1) = v;
      } else if (c == p + 1) {
        d.sigma2[r] = v;
      } else {
        d.theta[r] = v;
      }
    }
  }
  return d;
}

nlohmann::json summary_json(const PosteriorDraws& d) {
  using nlohmann::json;
  auto interval = [](const Interval& s) { return json{{"mean", s.mean}, {"lower", s.lower}, {"upper", s.upper}}; };
  json beta = json::array();
  for (Index j = 0; j < d.beta.cols(); ++j) {
    json b = interval(summarize(d.beta.col(j)));
    b["name"] = static_cast<std::size_t>(j) < d.column_names.size() ? d.column_names[static_cast<std::size_t>(j)]
                                                                     : "beta_" + std::to_string(j);
    beta.push_back(b);
  }
  json mass = json::array();
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    mass.push_back({{"theta", d.grid[i]},
                    {"probability", d.probabilities[static_cast<Index>(i)]},
                    {"log_joint", d.log_joint[static_cast<Index>(i)]}});
  }
  return json{{"family", std::string(family_name(d.family))},
              {"draws", d.size()},
              {"seed", d.seed},
              {"interval_level", 0.95},
              {"beta", beta},
              {"sigma2", interval(summarize(d.sigma2))},
              {"theta", interval(summarize(d.theta))},
              {"parameter", uses_delta(d.family) ? "delta" : "rho"},
              {"grid_mass", mass}};
}

}  // namespace tarsp

#include "tarsp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "tarsp/csv.hpp"
#include "tarsp/error.hpp"
#include "tarsp/metrics.hpp"
#include "tarsp/rng.hpp"

namespace tarsp {

SimulationDesign SimulationDesign::item(char which) {
  SimulationDesign d;
  d.beta = VectorXd(2);
  d.beta << 2.0, 5.0;
  d.sigma2 = 0.5;
  d.missing.total_missing = 480;
  d.missing.block_rows = 15;
  d.missing.block_cols = 15;
  switch (which) {
    case 'a': d.family = Family::Car; d.theta = -0.606; break;
    case 'b': d.family = Family::TarC; d.theta = 1.0; break;
    case 'c': d.family = Family::Sar; d.theta = -0.606; break;
    case 'd': d.family = Family::TarS; d.theta = 1.0; break;
    default:
      throw Error(ErrorCode::Config, std::string("unknown simulation item '") + which + "' (expected a, b, c or d)");
  }
  return d;
}

void SimulationDesign::validate() const {
  if (family == Family::NngpTar) throw Error(ErrorCode::Config, "lattice simulation supports tar-c, tar-s, car and sar");
  if (rows < 2 || cols < 2) throw Error(ErrorCode::InvalidDimension, "design grid must be at least 2 x 2");
  if (beta.size() < 1) throw Error(ErrorCode::Config, "design needs at least one regression coefficient");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw Error(ErrorCode::ParameterRange, "sigma2 must be > 0");
  validate_parameter(family, theta);
  if (family == Family::Car && !(std::abs(theta) < 1.0)) {
    // Rook lattices are bipartite, so the admissible CAR range is (-1, 1).
    throw Error(ErrorCode::ParameterRange, "CAR rho must lie in (-1, 1) on a lattice");
  }
  const MissingSpec& m = missing;
  if (m.block_rows < 0 || m.block_cols < 0 || m.block_rows > rows || m.block_cols > cols) {
    throw Error(ErrorCode::Config, "missing block does not fit the grid");
  }
  if (!(m.random_fraction >= 0.0 && m.random_fraction < 1.0)) {
    throw Error(ErrorCode::Config, "random missing fraction must lie in [0, 1)");
  }
  const Index block = m.block_rows * m.block_cols;
  const Index random = m.total_missing ? *m.total_missing - block
                                       : static_cast<Index>(std::llround(m.random_fraction * static_cast<double>(size())));
  if (random < 0) throw Error(ErrorCode::Config, "total missing count is smaller than the block");
  if (block + random > size() - (beta.size() + 1)) {
    throw Error(ErrorCode::Config, "missing pattern leaves fewer than p + 1 observed cells");
  }
}

SimulationDesign design_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::Config, "design must be a JSON object");
    SimulationDesign d = j.contains("item") ? SimulationDesign::item(j.at("item").get<std::string>().at(0))
                                            : SimulationDesign::item('b');
    if (j.contains("family")) d.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("rows")) d.rows = j.at("rows").get<Index>();
    if (j.contains("cols")) d.cols = j.at("cols").get<Index>();
    if (j.contains("beta")) {
      const auto b = j.at("beta").get<std::vector<double>>();
      d.beta = Eigen::Map<const VectorXd>(b.data(), static_cast<Index>(b.size()));
    }
    if (j.contains("sigma2")) d.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("theta")) d.theta = j.at("theta").get<double>();
    if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("missing")) {
      const auto& m = j.at("missing");
      d.missing = MissingSpec{};
      if (m.contains("random_fraction")) d.missing.random_fraction = m.at("random_fraction").get<double>();
      if (m.contains("total_missing") && !m.at("total_missing").is_null()) {
        d.missing.total_missing = m.at("total_missing").get<Index>();
      }
      if (m.contains("block_rows")) d.missing.block_rows = m.at("block_rows").get<Index>();
      if (m.contains("block_cols")) d.missing.block_cols = m.at("block_cols").get<Index>();
    }
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed design: ") + e.what());
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::Config, "malformed design: empty item name");
  }
}

nlohmann::json design_to_json(const SimulationDesign& d) {
  nlohmann::json missing{{"random_fraction", d.missing.random_fraction},
                         {"block_rows", d.missing.block_rows},
                         {"block_cols", d.missing.block_cols}};
  missing["total_missing"] = d.missing.total_missing ? nlohmann::json(*d.missing.total_missing) : nlohmann::json(nullptr);
  return nlohmann::json{{"family", std::string(family_name(d.family))},
                        {"rows", d.rows},
                        {"cols", d.cols},
                        {"beta", std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size())},
                        {"sigma2", d.sigma2},
                        {"theta", d.theta},
                        {"missing", missing},
                        {"seed", d.seed}};
}

std::vector<bool> missing_mask(Index rows, Index cols, const MissingSpec& spec, std::uint64_t seed) {
  const Index n = rows * cols;
  std::vector<bool> observed(static_cast<std::size_t>(n), true);
  Engine eng = make_engine(seed, Stream::Missing);
  auto offset = [&](Index extent, Index block) {
    // Prefer an offset that keeps the block off the lattice border.
    const Index lo = extent - block >= 2 ? 1 : 0;
    const Index hi = extent - block >= 2 ? extent - block - 1 : extent - block;
    return std::uniform_int_distribution<Index>(lo, hi)(eng);
  };
  const Index block = spec.block_rows * spec.block_cols;
  if (block > 0) {
    const Index r0 = offset(rows, spec.block_rows);
    const Index c0 = offset(cols, spec.block_cols);
    for (Index r = r0; r < r0 + spec.block_rows; ++r) {
      for (Index c = c0; c < c0 + spec.block_cols; ++c) observed[static_cast<std::size_t>(r * cols + c)] = false;
    }
  }
  const Index random = spec.total_missing
                           ? *spec.total_missing - block
                           : static_cast<Index>(std::llround(spec.random_fraction * static_cast<double>(n)));
  std::vector<Index> pool;
  for (Index i = 0; i < n; ++i) {
    if (observed[static_cast<std::size_t>(i)]) pool.push_back(i);
  }
  if (random < 0 || random > static_cast<Index>(pool.size())) {
    throw Error(ErrorCode::Config, "missing pattern does not fit the grid");
  }
  // Partial Fisher-Yates: the first `random` entries become missing.
  for (Index k = 0; k < random; ++k) {
    const Index j = std::uniform_int_distribution<Index>(k, static_cast<Index>(pool.size()) - 1)(eng);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
    observed[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = false;
  }
  return observed;
}

Dataset simulate_dataset(const SimulationDesign& design) {
  design.validate();
  const Index n = design.size();
  const Index p = design.beta.size();
  const AdjacencyGraph g = build_grid_graph(design.rows, design.cols);
  const PrecisionModel model = PrecisionModel::areal(design.family, g, {design.theta});

  Dataset d;
  d.x.resize(n, p);
  Engine cov_eng = make_engine(design.seed, Stream::Covariates);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) d.x(i, j) = unif(cov_eng);
  }
  Engine field_eng = make_engine(design.seed, Stream::Field);
  std::normal_distribution<double> normal;
  VectorXd z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(field_eng);
  SparseCholesky chol;
  chol.analyze(model.precision(design.theta, design.sigma2));
  if (!chol.try_factorize(model.precision(design.theta, design.sigma2))) {
    throw Error(ErrorCode::ParameterRange, std::string(family_name(design.family)) +
                                               " precision is not positive definite at the design parameter");
  }
  const VectorXd truth = d.x * design.beta + chol.correlate(z);

  d.observed = missing_mask(design.rows, design.cols, design.missing, design.seed);
  d.y = truth;
  for (Index i = 0; i < n; ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) d.y[i] = std::numeric_limits<double>::quiet_NaN();
  }
  d.truth = truth;
  for (Index j = 0; j < p; ++j) d.column_names.push_back("x" + std::to_string(j + 1));
  d.coords = grid_coordinates(design.rows, design.cols);
  return d;
}

std::vector<double> default_grid(Family family) {
  if (uses_delta(family)) return {1.0};
  std::vector<double> grid;
  for (int k = -99; k <= 99; k += 2) grid.push_back(k / 100.0);
  return grid;
}

const std::vector<std::string>& study_metrics() {
  static const std::vector<std::string> names = {"r2", "mae", "rmse", "crps", "int_score", "cvg", "frobenius", "sigma2"};
  return names;
}

std::vector<StudyRow> replicate_study(const SimulationDesign& design, const std::vector<FitSpec>& fits,
                                      Index replicates, const StudyOptions& opts) {
  if (replicates < 1) throw Error(ErrorCode::Config, "replicate count must be >= 1");
  if (fits.empty()) throw Error(ErrorCode::Config, "no families to fit");
  design.validate();
  const AdjacencyGraph g = build_grid_graph(design.rows, design.cols);
  const PrecisionModel truth_model = PrecisionModel::areal(design.family, g, {design.theta});
  const MatrixXd true_cov = design.sigma2 * covariance_by_cholesky(truth_model.precision(design.theta));

  std::vector<PrecisionModel> models;
  for (const FitSpec& f : fits) {
    models.push_back(PrecisionModel::areal(f.family, g, f.grid.empty() ? default_grid(f.family) : f.grid));
  }

  std::vector<StudyRow> rows;
  for (Index r = 0; r < replicates; ++r) {
    SimulationDesign rep = design;
    rep.seed = derive_seed(design.seed, Stream::Replicate, static_cast<std::uint64_t>(r));
    const Dataset data = simulate_dataset(rep);
    const auto mis = data.missing_indices();
    const VectorXd truth_m = select(*data.truth, mis);
    for (std::size_t f = 0; f < fits.size(); ++f) {
      const PrecisionModel& model = models[f];
      const PosteriorDraws draws = sample_posterior(data, model, opts.prior, opts.draws, rep.seed,
                                                    SamplerOptions{opts.threads});
      const PredictiveSummary pred =
          kriging_predict(data, model, draws, opts.neumann, opts.alpha, rep.seed, KrigingOptions{opts.threads, true});
      const ScoreCard sc = score_predictions(truth_m, pred.point, pred.samples, pred.lower, pred.upper, opts.alpha);
      const double sigma2_mean = draws.sigma2.mean();
      const MatrixXd fit_cov = sigma2_mean * covariance_by_cholesky(model.precision(draws.theta.mean()));
      const double values[] = {sc.r2 ? *sc.r2 : std::numeric_limits<double>::quiet_NaN(),
                               sc.mae,
                               sc.rmse,
                               sc.crps,
                               sc.int_score,
                               sc.cvg,
                               frobenius_distance(true_cov, fit_cov),
                               sigma2_mean};
      for (std::size_t m = 0; m < study_metrics().size(); ++m) {
        rows.push_back({r, fits[f].family, study_metrics()[m], values[m]});
      }
    }
  }
  return rows;
}

void write_study_long(std::ostream& os, const std::vector<StudyRow>& rows) {
  os << "replicate,family,metric,value\n";
  for (const StudyRow& r : rows) {
    os << r.replicate << ',' << family_name(r.family) << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

void write_study_wide(std::ostream& os, const std::vector<StudyRow>& rows) {
  const auto& names = study_metrics();
  os << "replicate,family";
  for (const auto& m : names) os << ',' << m;
  os << '\n';
  for (std::size_t i = 0; i + names.size() <= rows.size(); i += names.size()) {
    os << rows[i].replicate << ',' << family_name(rows[i].family);
    for (std::size_t m = 0; m < names.size(); ++m) os << ',' << format_double(rows[i + m].value);
    os << '\n';
  }
}

double study_median(const std::vector<StudyRow>& rows, Family family, const std::string& metric) {
  std::vector<double> v;
  for (const StudyRow& r : rows) {
    if (r.family == family && r.metric == metric) v.push_back(r.value);
  }
  if (v.empty()) throw Error(ErrorCode::InvalidInput, "no rows for " + std::string(family_name(family)) + "/" + metric);
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

namespace {

// Standard normal restricted to (lo, hi) by inversion, working on whichever
// tail keeps the probabilities away from 1.
double truncated_standard_normal(double lo, double hi, Engine& eng) {
  static const boost::math::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const bool flip = lo > 0.0;
  const double a = flip ? -hi : lo;
  const double b = flip ? -lo : hi;
  const double pa = std::isinf(a) ? 0.0 : boost::math::cdf(nd, a);
  const double pb = std::isinf(b) ? 1.0 : boost::math::cdf(nd, b);
  double u = pa + (pb - pa) * unif(eng);
  u = std::clamp(u, std::numeric_limits<double>::min(), 1.0 - std::numeric_limits<double>::epsilon());
  const double x = boost::math::quantile(nd, u);
  return flip ? -x : x;
}

}  // namespace

bool truncated_gibbs_sweep(VectorXd& x, const AdjacencyGraph& g, double k, Engine& eng) {
  const double bound = std::sqrt(k);
  const auto& nb = g.neighbors();
  const VectorXd d = g.degree_vector();
  bool clean = true;
  for (Index j = 0; j < x.size(); ++j) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    // Own row: |x_j - (Bx)_j| < sqrt(k).
    double m = 0.0;
    for (Index l : nb[static_cast<std::size_t>(j)]) m += x[l] / d[j];
    lo = std::max(lo, m - bound);
    hi = std::min(hi, m + bound);
    // Rows i that weight x_j: |e_i - a_ij x_j| < sqrt(k).
    for (Index i : nb[static_cast<std::size_t>(j)]) {
      const double aij = 1.0 / d[i];
      double e = x[i];
      for (Index l : nb[static_cast<std::size_t>(i)]) {
        if (l != j) e -= x[l] / d[i];
      }
      lo = std::max(lo, (e - bound) / aij);
      hi = std::min(hi, (e + bound) / aij);
    }
    // Keep strictly inside so that recomputing the constraints in another
    // summation order cannot land on the boundary.
    const double pad = 1e-12 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
    if (hi - lo > 4.0 * pad) {
      lo += pad;
      hi -= pad;
    }
    double v = truncated_standard_normal(lo, hi, eng);
    int tries = 0;
    while (!(lo < v && v < hi) && ++tries < 16) v = truncated_standard_normal(lo, hi, eng);
    if (!(lo < v && v < hi)) {
      v = 0.5 * (lo + hi);
      clean = false;
    }
    x[j] = v;
  }
  return clean;
}

MotivationResult motivation_experiment(Index side, Index replicates, double k, std::uint64_t seed,
                                       const MotivationOptions& opts) {
  if (!(k > 0.0)) throw Error(ErrorCode::ParameterRange, "constraint bound k must be > 0");
  if (replicates < 2) throw Error(ErrorCode::InvalidInput, "need at least two retained replicates");
  if (opts.burn_in < 0 || opts.thin < 1) throw Error(ErrorCode::Config, "burn-in must be >= 0 and thinning >= 1");
  const AdjacencyGraph g = build_grid_graph(side, side);
  const Index n = g.size();
  MotivationResult out;
  if (replicates < 100) {
    out.warnings.push_back("only " + std::to_string(replicates) + " retained replicates; correlations are noisy");
  }

  Engine eng = make_engine(seed, Stream::Motivation);
  VectorXd x = VectorXd::Zero(n);
  MatrixXd kept(replicates, n);
  Index fallbacks = 0;
  for (Index s = 0; s < opts.burn_in; ++s) fallbacks += truncated_gibbs_sweep(x, g, k, eng) ? 0 : 1;
  for (Index r = 0; r < replicates; ++r) {
    for (Index s = 0; s < opts.thin; ++s) fallbacks += truncated_gibbs_sweep(x, g, k, eng) ? 0 : 1;
    kept.row(r) = x.transpose();
  }
  out.sweeps = opts.burn_in + replicates * opts.thin;
  if (fallbacks > 0) {
    out.warnings.push_back(std::to_string(fallbacks) + " sweeps used an interval midpoint after repeated rounding failures");
  }

  const MatrixXd centered = kept.rowwise() - kept.colwise().mean();
  const MatrixXd cov = centered.transpose() * centered;
  out.correlation = MatrixXd::Identity(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double denom = std::sqrt(cov(i, i) * cov(j, j));
      const double c = denom > 0.0 ? cov(i, j) / denom : 0.0;
      out.correlation(i, j) = c;
      out.correlation(j, i) = c;
    }
  }
  return out;
}

}  // namespace tarsp

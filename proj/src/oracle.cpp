#include "tarsp/oracle.hpp"

#include <cmath>
#include <random>

#include "tarsp/error.hpp"
#include "tarsp/rng.hpp"

namespace tarsp {

namespace {

// Everything the indicator form needs: per-coordinate residual of the local
// average, the variance scale of each bound and the u-free prefactor.
struct TruncatedForm {
  VectorXd residual;
  VectorXd bound_scale;  // s_i² in |r_i| < sqrt(-2 s_i² log u_i)
  double log_prefactor = 0.0;
};

TruncatedForm truncated_form(const PrecisionModel& model, double delta, double sigma2,
                             const VectorXd& y) {
  if (!(delta > 0.0) || !(sigma2 > 0.0)) {
    throw Error(ErrorCode::ParameterRange, "delta and sigma2 must be > 0");
  }
  if (y.size() != model.size()) throw Error(ErrorCode::ShapeMismatch, "y_tilde length differs from model size");
  const double tau2 = delta * sigma2;
  const Index n = model.size();
  TruncatedForm tf;
  switch (model.family()) {
    case Family::TarC: {
      const auto& g = *model.graph();
      const VectorXd d = g.degree_vector();
      tf.residual = y - g.row_normalized() * y;
      tf.bound_scale = sigma2 * d.cwiseInverse();
      tf.log_prefactor = -0.5 * (y.array().square() * d.array()).sum() / tau2;
      break;
    }
    case Family::TarS: {
      const auto& g = *model.graph();
      tf.residual = y - g.row_normalized() * y;
      tf.bound_scale = VectorXd::Constant(n, sigma2);
      tf.log_prefactor = -0.5 * y.squaredNorm() / tau2;
      break;
    }
    case Family::NngpTar: {
      const auto& nf = *model.nngp_factors();
      tf.residual = y - nf.b * y;
      tf.bound_scale = sigma2 * nf.f;
      tf.log_prefactor = -0.5 * y.squaredNorm() / tau2;
      break;
    }
    default:
      throw Error(ErrorCode::InvalidInput, "truncation oracle covers tar-c, tar-s and nngp-tar");
  }
  return tf;
}

bool inside(double r, double scale, double u) {
  const double half_width = std::sqrt(-2.0 * scale * std::log(u));
  return -half_width < r && r < half_width;
}

}  // namespace

OracleResult truncation_density_oracle(const PrecisionModel& model, double delta, double sigma2,
                                       const VectorXd& y_tilde, const OracleOptions& opts) {
  const Index n = model.size();
  if (n > 6) throw Error(ErrorCode::InvalidInput, "truncation oracle is limited to n <= 6");
  const TruncatedForm tf = truncated_form(model, delta, sigma2, y_tilde);
  const double pre = std::exp(tf.log_prefactor);

  OracleResult out;
  if (n <= 3) {
    // Midpoint rule; the integrand is a product of indicators, so each axis
    // miscounts by at most half a cell and the whole product by n/(2N).
    static constexpr Index points[] = {0, 200000, 2000, 160};
    const Index m = points[n];
    Index total = 1;
    for (Index i = 0; i < n; ++i) total *= m;
    std::vector<Index> idx(static_cast<std::size_t>(n), 0);
    long double hits = 0;
    for (Index cell = 0; cell < total; ++cell) {
      Index rest = cell;
      bool ok = true;
      for (Index i = 0; i < n && ok; ++i) {
        const double u = (static_cast<double>(rest % m) + 0.5) / static_cast<double>(m);
        rest /= m;
        ok = inside(tf.residual[i], tf.bound_scale[i], u);
      }
      if (ok) hits += 1;
    }
    out.value = pre * static_cast<double>(hits / static_cast<long double>(total));
    out.tolerance = pre * static_cast<double>(n) / (2.0 * static_cast<double>(m));
    out.method = "midpoint-quadrature";
    return out;
  }

  Engine eng = make_engine(opts.seed, Stream::Oracle, static_cast<std::uint64_t>(n));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Index hits = 0;
  for (Index k = 0; k < opts.mc_draws; ++k) {
    bool ok = true;
    for (Index i = 0; i < n; ++i) {
      double u = unif(eng);
      while (u <= 0.0) u = unif(eng);
      ok = ok && inside(tf.residual[i], tf.bound_scale[i], u);
    }
    if (ok) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(opts.mc_draws);
  // Laplace-smoothed proportion in the error so zero hits still give the
  // rule-of-three width instead of a zero tolerance.
  const double ps = (static_cast<double>(hits) + 1.0) / (static_cast<double>(opts.mc_draws) + 2.0);
  const double se = pre * std::sqrt(ps * (1.0 - ps) / static_cast<double>(opts.mc_draws));
  out.value = pre * p;
  out.tolerance = 3.0 * se;
  out.method = "monte-carlo";
  if (se > opts.max_standard_error) {
    out.warning = "oracle standard error " + std::to_string(se) + " exceeds " +
                  std::to_string(opts.max_standard_error);
  }
  return out;
}

double truncated_kernel_closed_form(const PrecisionModel& model, double delta, double sigma2,
                                    const VectorXd& y_tilde) {
  if (y_tilde.size() != model.size()) throw Error(ErrorCode::ShapeMismatch, "y_tilde length differs from model size");
  if (model.family() == Family::TarC) {
    const auto& g = *model.graph();
    const VectorXd d = g.degree_vector();
    const VectorXd r = y_tilde - g.row_normalized() * y_tilde;
    const double tau2 = delta * sigma2;
    double e = 0.0;
    for (Index i = 0; i < y_tilde.size(); ++i) {
      e += y_tilde[i] * y_tilde[i] * d[i] / (2.0 * tau2) + r[i] * r[i] * d[i] / (2.0 * sigma2);
    }
    return std::exp(-e);
  }
  const SparseMatrix q = model.precision(delta, sigma2);
  return std::exp(-0.5 * y_tilde.dot(q * y_tilde));
}

}  // namespace tarsp

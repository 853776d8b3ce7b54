#include "tarsp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tarsp/error.hpp"

namespace tarsp {

PointScores point_scores(const VectorXd& truth, const VectorXd& pred) {
  if (truth.size() != pred.size()) throw Error(ErrorCode::ShapeMismatch, "truth and prediction lengths differ");
  if (truth.size() < 2) throw Error(ErrorCode::InvalidInput, "point scores need at least two values");
  const VectorXd e = truth - pred;
  PointScores s;
  s.mae = e.cwiseAbs().mean();
  s.rmse = std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
  const VectorXd t = truth.array() - truth.mean();
  const VectorXd p = pred.array() - pred.mean();
  const double stt = t.squaredNorm();
  const double spp = p.squaredNorm();
  if (stt > 0.0 && spp > 0.0) {
    const double r = t.dot(p) / std::sqrt(stt * spp);
    s.r2 = r * r;
  }
  return s;
}

double crps_empirical(std::span<const double> samples, double truth) {
  const auto g = samples.size();
  if (g < 2) throw Error(ErrorCode::InvalidInput, "CRPS needs at least two samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  double abs_dev = 0.0;
  for (double v : x) abs_dev += std::abs(v - truth);
  // Σ_j Σ_k |x_j - x_k| = 2 Σ_i (2i - G + 1) x_(i) for ascending x, i from 0.
  double pair = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    pair += (2.0 * static_cast<double>(i) - static_cast<double>(g) + 1.0) * x[i];
  }
  pair *= 2.0;
  const double gd = static_cast<double>(g);
  return std::max(0.0, abs_dev / gd - pair / (2.0 * gd * gd));
}

IntervalScores interval_scores(const VectorXd& lower, const VectorXd& upper, const VectorXd& truth, double alpha) {
  if (lower.size() != upper.size() || lower.size() != truth.size()) {
    throw Error(ErrorCode::ShapeMismatch, "interval bounds and truth lengths differ");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidInput, "alpha must lie in (0, 1)");
  if (truth.size() == 0) throw Error(ErrorCode::InvalidInput, "no intervals to score");
  IntervalScores s;
  Index covered = 0;
  for (Index i = 0; i < truth.size(); ++i) {
    const double l = lower[i], u = upper[i], y = truth[i];
    if (l > u) throw Error(ErrorCode::InvalidInterval, "lower bound above upper bound at position " + std::to_string(i));
    double score = u - l;
    if (y < l) score += (2.0 / alpha) * (l - y);
    if (y > u) score += (2.0 / alpha) * (y - u);
    s.int_score += score;
    if (l <= y && y <= u) ++covered;
  }
  s.int_score /= static_cast<double>(truth.size());
  s.cvg = static_cast<double>(covered) / static_cast<double>(truth.size());
  return s;
}

double frobenius_distance(const MatrixXd& k, const MatrixXd& l) {
  if (k.rows() != l.rows() || k.cols() != l.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "Frobenius distance needs equal shapes");
  }
  return (k - l).norm();
}

ScoreCard score_predictions(const VectorXd& truth, const VectorXd& point, const MatrixXd& samples,
                            const VectorXd& lower, const VectorXd& upper, double alpha) {
  if (samples.cols() != truth.size()) throw Error(ErrorCode::ShapeMismatch, "sample matrix width differs from truth");
  ScoreCard c;
  const PointScores ps = point_scores(truth, point);
  c.r2 = ps.r2;
  c.mae = ps.mae;
  c.rmse = ps.rmse;
  std::vector<double> col(static_cast<std::size_t>(samples.rows()));
  for (Index i = 0; i < truth.size(); ++i) {
    for (Index g = 0; g < samples.rows(); ++g) col[static_cast<std::size_t>(g)] = samples(g, i);
    c.crps += crps_empirical(col, truth[i]);
  }
  c.crps /= static_cast<double>(truth.size());
  const IntervalScores is = interval_scores(lower, upper, truth, alpha);
  c.int_score = is.int_score;
  c.cvg = is.cvg;
  c.alpha = alpha;
  c.n_scored = truth.size();
  return c;
}

nlohmann::json to_json(const ScoreCard& s) {
  return nlohmann::json{{"r2", s.r2 ? nlohmann::json(*s.r2) : nlohmann::json(nullptr)},
                        {"mae", s.mae},
                        {"rmse", s.rmse},
                        {"crps", s.crps},
                        {"int_score", s.int_score},
                        {"cvg", s.cvg},
                        {"alpha", s.alpha},
                        {"n_scored", s.n_scored}};
}

}  // namespace tarsp

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"
#include "tarsp/error.hpp"
#include "tarsp/sampler.hpp"
#include "tarsp/simulate.hpp"

using namespace tarsp;

namespace {

Dataset small_dataset(Index n, std::vector<bool> observed, std::uint64_t seed, Index p = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.y.resize(n);
  d.x.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) d.x(i, j) = 0.5 + u(rng);
    d.y[i] = d.x.row(i).sum() + z(rng);
  }
  d.observed = std::move(observed);
  for (Index i = 0; i < n; ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) d.y[i] = std::nan("");
  }
  return d;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Config;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("observed precision is read off Q") {
    const std::vector<Edge> cycle = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    const SparseMatrix q = precision_tar_c(build_graph_from_edges(4, cycle), 1.0, 1.0);
    MatrixXd expect(2, 2);
    expect << 4, -1, -1, 4;
    CHECK((MatrixXd(observed_precision(q, {true, true, false, false})) - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK((MatrixXd(observed_precision(q, {true, true, true, true})) - MatrixXd(q)).cwiseAbs().maxCoeff() == 0.0);
    const MatrixXd single(observed_precision(q, {false, false, true, false}));
    CHECK(single.rows() == 1);
    CHECK(single(0, 0) == 4.0);
    CHECK(code_of([&] { observed_precision(q, {false, false, false, false}); }) == ErrorCode::InvalidMask);
  }

  TEST_CASE("grid of one value carries all the mass; equal values split it") {
    const auto g = build_grid_graph(3, 3);
    const Dataset d = small_dataset(9, std::vector<bool>(9, true), 1);
    const auto one = sample_posterior(d, PrecisionModel::areal(Family::TarC, g, {1.5}), {}, 10, 3);
    CHECK(one.probabilities[0] == 1.0);
    const auto two = sample_posterior(d, PrecisionModel::areal(Family::TarC, g, {1.5, 1.5}), {}, 10, 3);
    CHECK(two.probabilities[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(two.probabilities[1] == doctest::Approx(0.5).epsilon(1e-14));
  }

  TEST_CASE("grid posterior matches 2-d quadrature on a 5-region path") {
    std::vector<Edge> path;
    for (Index i = 0; i + 1 < 6; ++i) path.emplace_back(i, i + 1);
    const auto g = build_graph_from_edges(6, path);
    const std::vector<bool> obs = {true, true, false, true, true, true};
    const Dataset d = small_dataset(6, obs, 17);
    const PriorConfig prior{0.01, 0.01};
    const std::vector<double> grid = {0.5, 2.0};
    const auto draws = sample_posterior(d, PrecisionModel::areal(Family::TarC, g, grid), prior, 1, 1);

    const auto idx = d.observed_indices();
    const MatrixXd w = support::dense_w(6, path);
    std::vector<double> logm;
    for (double delta : grid) {
      const MatrixXd q = support::tar_c(w, delta, 1.0);
      MatrixXd qo(idx.size(), idx.size());
      VectorXd x(idx.size()), y(idx.size());
      for (std::size_t a = 0; a < idx.size(); ++a) {
        x[static_cast<Index>(a)] = d.x(idx[a], 0);
        y[static_cast<Index>(a)] = d.y[idx[a]];
        for (std::size_t b = 0; b < idx.size(); ++b) qo(static_cast<Index>(a), static_cast<Index>(b)) = q(idx[a], idx[b]);
      }
      logm.push_back(support::log_marginal_quadrature(qo, x, y, prior.a, prior.b));
    }
    const auto p = support::normalize_log(logm);
    const std::vector<double> got(draws.probabilities.data(), draws.probabilities.data() + 2);
    CHECK(support::total_variation(p, got) < 1e-3);
  }

  TEST_CASE("identity precision and an intercept give the sample mean") {
    // Tiny δ makes Q ≈ (1/δ) D_w; with equal degrees that is a scaled identity.
    std::vector<Edge> ring;
    for (Index i = 0; i < 8; ++i) ring.emplace_back(i, (i + 1) % 8);
    const auto g = build_graph_from_edges(8, ring);
    Dataset d = small_dataset(8, std::vector<bool>(8, true), 4);
    d.x = MatrixXd::Ones(8, 1);
    const SparseMatrix qo = observed_precision(precision_car(g, 0.0, 1.0), d.observed);
    SparseCholesky chol(qo);
    const ConditionalPosterior cp = conditional_posterior(d.y, d.x, qo, chol, {}, 0.0);
    CHECK(cp.beta_hat[0] == doctest::Approx(d.y.mean()).epsilon(1e-12));
  }

  TEST_CASE("inverse-gamma shape and a non-negative scale") {
    const auto g = build_grid_graph(4, 4);
    std::vector<bool> obs(16, true);
    obs[5] = obs[10] = false;
    const Dataset d = small_dataset(16, obs, 8, 2);
    const SparseMatrix qo = observed_precision(precision_tar_s(g, 0.8, 1.0), d.observed);
    SparseCholesky chol(qo);
    const PriorConfig prior{0.3, 0.2};
    const auto idx = d.observed_indices();
    const ConditionalPosterior cp = conditional_posterior(select(d.y, idx), select_rows(d.x, idx), qo, chol, prior, 0.0);
    CHECK(cp.shape == 0.3 + (14.0 - 2.0) / 2.0);
    CHECK(cp.scale >= 0.2);
    // Residual form against a dense generalized least-squares computation.
    const MatrixXd q(qo);
    const MatrixXd x = select_rows(d.x, idx);
    const VectorXd y = select(d.y, idx);
    const VectorXd bh = (x.transpose() * q * x).ldlt().solve(x.transpose() * q * y);
    const VectorXd r = y - x * bh;
    CHECK(cp.scale == doctest::Approx(0.2 + 0.5 * r.dot(q * r)).epsilon(1e-10));
    CHECK((cp.beta_hat - bh).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("beta draws concentrate on the GLS mean") {
    const auto g = build_grid_graph(3, 4);
    const Dataset d = small_dataset(12, std::vector<bool>(12, true), 12, 2);
    const SparseMatrix qo = observed_precision(precision_tar_c(g, 1.0, 1.0), d.observed);
    SparseCholesky chol(qo);
    const ConditionalPosterior cp = conditional_posterior(d.y, d.x, qo, chol, {}, 0.0);
    Engine eng = make_engine(9, Stream::Posterior);
    const Index n = 100'000;
    const double s2 = 0.7;
    VectorXd mean = VectorXd::Zero(2);
    for (Index i = 0; i < n; ++i) mean += cp.draw_beta(s2, eng);
    mean /= static_cast<double>(n);
    const MatrixXd cov = s2 * (d.x.transpose() * MatrixXd(qo) * d.x).inverse();
    for (Index j = 0; j < 2; ++j) {
      CHECK(std::abs(mean[j] - cp.beta_hat[j]) < 4.0 * std::sqrt(cov(j, j) / static_cast<double>(n)));
    }
  }

  TEST_CASE("draws are reproducible and thread-count independent") {
    const auto g = build_grid_graph(6, 6);
    std::vector<bool> obs(36, true);
    obs[7] = obs[20] = obs[33] = false;
    const Dataset d = small_dataset(36, obs, 21, 2);
    const auto model = PrecisionModel::areal(Family::TarC, g, {0.25, 0.5, 1.0, 2.0, 4.0});
    const auto a = sample_posterior(d, model, {}, 200, 77, SamplerOptions{1});
    const auto b = sample_posterior(d, model, {}, 200, 77, SamplerOptions{3});
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.sigma2 - b.sigma2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
    for (Index k = 0; k < a.size(); ++k) {
      CHECK(a.sigma2[k] > 0.0);
      CHECK(std::find(model.grid().begin(), model.grid().end(), a.theta[k]) != model.grid().end());
    }
    const auto c = sample_posterior(d, model, {}, 200, 78);
    CHECK((a.sigma2 - c.sigma2).cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("design checks") {
    const auto g = build_grid_graph(3, 3);
    const auto model = PrecisionModel::areal(Family::TarC, g, {1.0});
    Dataset d = small_dataset(9, std::vector<bool>(9, true), 2, 2);
    d.x.col(1) = 3.0 * d.x.col(0);
    CHECK(code_of([&] { sample_posterior(d, model, {}, 5, 1); }) == ErrorCode::SingularDesign);
    Dataset few = small_dataset(9, {true, true, false, false, false, false, false, false, false}, 2, 2);
    CHECK(code_of([&] { sample_posterior(few, model, {}, 5, 1); }) == ErrorCode::InvalidMask);
    CHECK(code_of([&] { PriorConfig{0.0, 1.0}.validate(); }) == ErrorCode::ParameterRange);
  }

  TEST_CASE("car and sar baselines") {
    const auto g = build_grid_graph(5, 5);
    const Dataset d = small_dataset(25, std::vector<bool>(25, true), 6);
    const auto car0 = sample_posterior_car_sar(d, PrecisionModel::areal(Family::Car, g, {0.0}), {}, 50, 2);
    // ρ = 0 is weighted regression with weights D_w.
    const MatrixXd w(g.weights());
    const VectorXd dw = w.rowwise().sum();
    const double bh = (d.x.col(0).cwiseProduct(dw)).dot(d.y) / (d.x.col(0).cwiseProduct(dw)).dot(d.x.col(0));
    CHECK(std::abs(car0.beta.col(0).mean() - bh) < 0.5);
    CHECK(code_of([&] {
            sample_posterior_car_sar(d, PrecisionModel::areal(Family::TarC, g, {1.0}), {}, 5, 1);
          }) == ErrorCode::InvalidInput);
    CHECK_NOTHROW(sample_posterior_car_sar(d, PrecisionModel::areal(Family::Sar, g, {0.999}), {}, 5, 1));
    CHECK(code_of([&] { PrecisionModel::areal(Family::Sar, g, {1.0}); }) == ErrorCode::ParameterRange);
  }

  TEST_CASE("car posterior on simulated car data puts its mass on negative rho") {
    SimulationDesign design = SimulationDesign::item('a');
    design.seed = 5;
    const Dataset d = simulate_dataset(design);
    const auto draws = sample_posterior_car_sar(
        d, PrecisionModel::areal(Family::Car, build_grid_graph(40, 40), default_grid(Family::Car)), {}, 500, 5);
    double negative = 0.0;
    for (std::size_t k = 0; k < draws.grid.size(); ++k) {
      if (draws.grid[k] < 0.0) negative += draws.probabilities[static_cast<Index>(k)];
    }
    CHECK(negative > 0.95);
  }

  TEST_CASE("interval summary and csv round trip") {
    VectorXd v(5);
    v << 5, 1, 4, 2, 3;
    const Interval s = summarize(v, 0.5);
    CHECK(s.mean == 3.0);
    CHECK(s.lower == doctest::Approx(2.0));
    CHECK(s.upper == doctest::Approx(4.0));

    const auto g = build_grid_graph(3, 3);
    const Dataset d = small_dataset(9, std::vector<bool>(9, true), 2, 2);
    const auto draws = sample_posterior(d, PrecisionModel::areal(Family::TarC, g, {1.0, 2.0}), {}, 1, 4);
    std::stringstream ss;
    write_draws_csv(ss, draws);
    const std::string text = ss.str();
    CHECK(text.rfind("draw,beta_0,beta_1,sigma2,theta\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    const auto back = read_draws_csv(ss);
    CHECK((back.beta - draws.beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.sigma2[0] == draws.sigma2[0]);
    CHECK(back.theta[0] == draws.theta[0]);

    const auto j = summary_json(draws);
    CHECK(j["grid_mass"].size() == 2);
    CHECK(j["beta"].size() == 2);
    CHECK(j["parameter"] == "delta");
  }
}

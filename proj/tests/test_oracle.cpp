#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tarsp/oracle.hpp"

using namespace tarsp;

TEST_SUITE("oracle") {
  TEST_CASE("tar-s single edge at the origin is exactly one") {
    const std::vector<Edge> e = {{0, 1}};
    const auto model = PrecisionModel::areal(Family::TarS, build_graph_from_edges(2, e), {1.0});
    const VectorXd y = VectorXd::Zero(2);
    const OracleResult r = truncation_density_oracle(model, 1.0, 1.0, y);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(truncated_kernel_closed_form(model, 1.0, 1.0, y) == 1.0);
  }

  TEST_CASE("tar-s single edge at (1, 0)") {
    const std::vector<Edge> e = {{0, 1}};
    const auto model = PrecisionModel::areal(Family::TarS, build_graph_from_edges(2, e), {1.0});
    VectorXd y(2);
    y << 1.0, 0.0;
    const OracleResult r = truncation_density_oracle(model, 1.0, 1.0, y);
    const double closed = std::exp(-1.5);
    CHECK(truncated_kernel_closed_form(model, 1.0, 1.0, y) == doctest::Approx(closed).epsilon(1e-14));
    CHECK(std::abs(r.value - closed) <= r.tolerance);
  }

  TEST_CASE("tar-c conditional with a zero neighbour average") {
    // Two regions, y_2 = 0: the first factor is exp(-y1²(1/2τ1² + 1/2σ1²)).
    const std::vector<Edge> e = {{0, 1}};
    const auto model = PrecisionModel::areal(Family::TarC, build_graph_from_edges(2, e), {2.0});
    VectorXd y(2);
    y << 0.8, 0.0;
    const double delta = 2.0;
    const double s2 = 0.7;
    const double tau2 = delta * s2;
    const double first = std::exp(-y[0] * y[0] * (1.0 / (2.0 * tau2) + 1.0 / (2.0 * s2)));
    // The second region sees neighbour average 0.8 and ỹ₂ = 0.
    const double second = std::exp(-0.8 * 0.8 / (2.0 * s2));
    CHECK(truncated_kernel_closed_form(model, delta, s2, y) == doctest::Approx(first * second).epsilon(1e-14));
    const OracleResult r = truncation_density_oracle(model, delta, s2, y);
    CHECK(std::abs(r.value - first * second) <= r.tolerance);
  }

  TEST_CASE("oracle agrees with the closed forms on random small inputs") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    OracleOptions opts;
    opts.mc_draws = 200'000;
    for (Index n = 2; n <= 4; ++n) {
      const auto e = support::random_connected_edges(n, 1, rng);
      const auto g = build_graph_from_edges(n, e);
      for (Family f : {Family::TarC, Family::TarS}) {
        const auto model = PrecisionModel::areal(f, g, {1.0});
        for (int rep = 0; rep < 4; ++rep) {
          VectorXd y(n);
          for (Index i = 0; i < n; ++i) y[i] = 0.7 * z(rng);
          const double delta = std::exp(2.0 * u(rng) - 1.0);
          const double s2 = 0.5 + u(rng);
          opts.seed = static_cast<std::uint64_t>(100 * n + rep);
          const OracleResult r = truncation_density_oracle(model, delta, s2, y, opts);
          CHECK(std::abs(r.value - truncated_kernel_closed_form(model, delta, s2, y)) <= r.tolerance);
        }
      }
    }
  }

  TEST_CASE("nngp variant") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pts(3);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const auto ns = build_neighbor_sets(pts, 2, NeighborOrdering::SortByFirstCoordinate);
    const auto model = PrecisionModel::nngp(ns, pts, CorrelationSpec{2.0}, {1.0});
    VectorXd y(3);
    y << 0.3, -0.2, 0.5;
    const OracleResult r = truncation_density_oracle(model, 1.5, 0.8, y);
    CHECK(std::abs(r.value - truncated_kernel_closed_form(model, 1.5, 0.8, y)) <= r.tolerance);
  }

  TEST_CASE("Monte Carlo beyond three dimensions reports its error") {
    const auto g = build_grid_graph(2, 2);
    const auto model = PrecisionModel::areal(Family::TarS, g, {1.0});
    VectorXd y(4);
    y << 0.2, -0.1, 0.4, 0.0;
    OracleOptions opts;
    opts.mc_draws = 1000;
    opts.max_standard_error = 1e-9;
    const OracleResult r = truncation_density_oracle(model, 1.0, 1.0, y, opts);
    CHECK(r.method.find("monte") != std::string::npos);
    CHECK(r.warning.has_value());
    CHECK(r.tolerance > 0.0);
  }
}

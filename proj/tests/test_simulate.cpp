#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "support.hpp"
#include "tarsp/error.hpp"
#include "tarsp/simulate.hpp"

using namespace tarsp;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Config;
}

Index count_missing(const std::vector<bool>& obs) {
  return static_cast<Index>(std::count(obs.begin(), obs.end(), false));
}

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("the four lattice settings") {
    for (char c : {'a', 'b', 'c', 'd'}) {
      const SimulationDesign d = SimulationDesign::item(c);
      CHECK(d.size() == 1600);
      CHECK(d.beta.size() == 2);
      CHECK(d.sigma2 == 0.5);
      CHECK_NOTHROW(d.validate());
    }
    CHECK(SimulationDesign::item('a').family == Family::Car);
    CHECK(SimulationDesign::item('b').family == Family::TarC);
    CHECK(SimulationDesign::item('c').family == Family::Sar);
    CHECK(SimulationDesign::item('d').family == Family::TarS);
    CHECK(SimulationDesign::item('a').theta == -0.606);
  }

  TEST_CASE("item b dataset shape") {
    const Dataset d = simulate_dataset(SimulationDesign::item('b'));
    CHECK(d.size() == 1600);
    CHECK(d.size() - d.num_observed() == 480);
    REQUIRE(d.truth);
    for (Index i = 0; i < d.size(); ++i) {
      if (d.observed[static_cast<std::size_t>(i)]) {
        CHECK(d.y[i] == (*d.truth)[i]);
      } else {
        CHECK(std::isnan(d.y[i]));
      }
    }
    CHECK(d.x.minCoeff() >= 0.0);
    CHECK(d.x.maxCoeff() <= 1.0);
    CHECK(d.coords.size() == 1600);
  }

  TEST_CASE("mask contains a contiguous block and is reproducible") {
    const MissingSpec spec = SimulationDesign::item('b').missing;
    const auto a = missing_mask(40, 40, spec, 11);
    const auto b = missing_mask(40, 40, spec, 11);
    const auto c = missing_mask(40, 40, spec, 12);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(count_missing(a) == 480);
    // Some 15x15 window is entirely missing.
    bool found = false;
    for (Index r0 = 0; r0 + 15 <= 40 && !found; ++r0) {
      for (Index c0 = 0; c0 + 15 <= 40 && !found; ++c0) {
        bool all = true;
        for (Index r = r0; r < r0 + 15 && all; ++r)
          for (Index cc = c0; cc < c0 + 15 && all; ++cc) all = !a[static_cast<std::size_t>(r * 40 + cc)];
        found = all;
      }
    }
    CHECK(found);

    MissingSpec none;
    CHECK(count_missing(missing_mask(10, 10, none, 1)) == 0);
    MissingSpec frac;
    frac.random_fraction = 0.25;
    CHECK(count_missing(missing_mask(10, 10, frac, 1)) == 25);
  }

  TEST_CASE("vanishing noise leaves the mean surface") {
    SimulationDesign d = SimulationDesign::item('b');
    d.sigma2 = 1e-12;
    const Dataset data = simulate_dataset(d);
    CHECK((*data.truth - data.x * d.beta).cwiseAbs().maxCoeff() < 1e-4);
  }

  TEST_CASE("simulated field has the model covariance") {
    for (Family f : {Family::TarC, Family::Sar}) {
      SimulationDesign d;
      d.family = f;
      d.rows = 4;
      d.cols = 4;
      d.beta = VectorXd::Zero(1);
      d.sigma2 = 0.8;
      d.theta = f == Family::TarC ? 0.7 : 0.6;
      const Index reps = 6000;
      MatrixXd e(reps, 16);
      for (Index r = 0; r < reps; ++r) {
        d.seed = static_cast<std::uint64_t>(1000 + r);
        e.row(r) = simulate_dataset(d).truth->transpose();
      }
      const MatrixXd w = support::dense_w(16, [] {
        std::vector<Edge> out;
        for (Index r = 0; r < 4; ++r)
          for (Index c = 0; c < 4; ++c) {
            if (c + 1 < 4) out.emplace_back(r * 4 + c, r * 4 + c + 1);
            if (r + 1 < 4) out.emplace_back(r * 4 + c, (r + 1) * 4 + c);
          }
        return out;
      }());
      const MatrixXd sigma =
          support::dense_inverse(f == Family::TarC ? support::tar_c(w, d.theta, d.sigma2) : support::sar(w, d.theta, d.sigma2));
      // Mean is exactly zero, so use the raw second moment.
      const MatrixXd emp = e.transpose() * e / static_cast<double>(reps);
      Index outside = 0;
      for (Index i = 0; i < 16; ++i)
        for (Index j = 0; j < 16; ++j) {
          const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / static_cast<double>(reps));
          if (std::abs(emp(i, j) - sigma(i, j)) > 5.0 * se) ++outside;
        }
      CHECK(outside == 0);
    }
  }

  TEST_CASE("design validation and json") {
    SimulationDesign d = SimulationDesign::item('a');
    d.theta = 1.0;
    CHECK(code_of([&] { d.validate(); }) == ErrorCode::ParameterRange);
    d = SimulationDesign::item('b');
    d.missing.total_missing = 100;
    CHECK(code_of([&] { d.validate(); }) == ErrorCode::Config);
    d = SimulationDesign::item('b');
    d.family = Family::NngpTar;
    CHECK(code_of([&] { d.validate(); }) == ErrorCode::Config);

    const SimulationDesign b = SimulationDesign::item('c');
    const SimulationDesign back = design_from_json(design_to_json(b));
    CHECK(back.family == b.family);
    CHECK(back.theta == b.theta);
    CHECK(back.beta == b.beta);
    CHECK(back.missing.total_missing == b.missing.total_missing);
    CHECK(design_from_json(nlohmann::json{{"item", "d"}, {"seed", 7}}).seed == 7);
    CHECK(code_of([] { design_from_json(nlohmann::json{{"rows", "many"}}); }) == ErrorCode::Config);
    CHECK(code_of([] { design_from_json(nlohmann::json::array()); }) == ErrorCode::Config);
    CHECK(code_of([] { design_from_json(nlohmann::json{{"family", "tar-q"}}); }) == ErrorCode::Config);
  }

  TEST_CASE("default grids") {
    CHECK(default_grid(Family::TarC) == std::vector<double>{1.0});
    const auto rho = default_grid(Family::Car);
    CHECK(rho.size() == 100);
    CHECK(rho.front() == doctest::Approx(-0.99));
    CHECK(rho.back() == doctest::Approx(0.99));
  }

  TEST_CASE("gibbs sweeps keep every constraint") {
    const auto g = build_grid_graph(6, 6);
    const MatrixXd b = MatrixXd(g.row_normalized());
    Engine eng = make_engine(3, Stream::Motivation);
    VectorXd x = VectorXd::Zero(36);
    // The start is feasible.
    CHECK(((x - b * x).cwiseAbs().array() < std::sqrt(0.5)).all());
    for (int s = 0; s < 200; ++s) {
      truncated_gibbs_sweep(x, g, 0.5, eng);
      CHECK(((x - b * x).cwiseAbs().array() < std::sqrt(0.5)).all());
    }
  }

  TEST_CASE("loose constraints give nearly independent coordinates") {
    const MotivationResult r = motivation_experiment(4, 2000, 1e9, 5, {20, 2});
    const MatrixXd off = r.correlation - MatrixXd::Identity(16, 16);
    CHECK(off.cwiseAbs().maxCoeff() < 0.12);
  }

  TEST_CASE("motivation output shape and warnings") {
    const MotivationResult few = motivation_experiment(3, 2, 0.5, 1, {5, 1});
    CHECK_FALSE(few.warnings.empty());
    const MotivationResult r = motivation_experiment(5, 150, 0.5, 2, {50, 5});
    CHECK(r.correlation.rows() == 25);
    CHECK((r.correlation - r.correlation.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.correlation.diagonal().array() == 1.0).all());
    CHECK(r.correlation.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    CHECK(r.sweeps == 50 + 150 * 5);
    // Neighbours under the constraint are positively correlated.
    CHECK(r.correlation(12, 13) > 0.0);
    CHECK(code_of([] { motivation_experiment(3, 10, 0.0, 1); }) == ErrorCode::ParameterRange);
  }

  TEST_CASE("one replicate gives one wide row per family") {
    SimulationDesign d = SimulationDesign::item('b');
    d.rows = 10;
    d.cols = 10;
    d.missing.total_missing = 20;
    d.missing.block_rows = 3;
    d.missing.block_cols = 3;
    StudyOptions opts;
    opts.draws = 100;
    const std::vector<FitSpec> fits = {{Family::TarC, {1.0}}, {Family::Car, {-0.5, 0.0, 0.5}}};
    const auto rows = replicate_study(d, fits, 1, opts);
    CHECK(rows.size() == 2 * study_metrics().size());
    std::ostringstream wide;
    write_study_wide(wide, rows);
    const std::string text = wide.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    std::ostringstream lng;
    write_study_long(lng, rows);
    CHECK(lng.str().rfind("replicate,family,metric,value\n", 0) == 0);
    for (const auto& m : study_metrics()) {
      CHECK(std::isfinite(study_median(rows, Family::TarC, m)));
    }
    const auto again = replicate_study(d, fits, 1, opts);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].value == again[i].value);
  }
}

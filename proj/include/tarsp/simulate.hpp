#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarsp/graph.hpp"
#include "tarsp/model.hpp"
#include "tarsp/predict.hpp"
#include "tarsp/sampler.hpp"

namespace tarsp {

/// Missing-data pattern on a rows x cols lattice: an axis-aligned block of
/// block_rows x block_cols cells at a seed-chosen interior offset, plus cells
/// drawn uniformly without replacement from outside the block. The random
/// count is total_missing - block cells when total_missing is set, and
/// round(random_fraction * n) otherwise.
struct MissingSpec {
  double random_fraction = 0.0;
  std::optional<Index> total_missing;
  Index block_rows = 0;
  Index block_cols = 0;
};

struct SimulationDesign {
  Family family = Family::TarC;
  Index rows = 40;
  Index cols = 40;
  VectorXd beta = VectorXd::Zero(0);
  double sigma2 = 0.5;
  double theta = 1.0;  // δ for tar-c/tar-s, ρ for car/sar
  MissingSpec missing;
  std::uint64_t seed = 42;

  /// The four lattice settings: 'a' car, 'b' tar-c, 'c' sar, 'd' tar-s, all
  /// with β = (2, 5), σ² = 0.5, δ = 1 or ρ = -0.606 and 480 missing cells
  /// (a 15 x 15 block plus 255 random cells) on a 40 x 40 grid.
  static SimulationDesign item(char which);

  Index size() const { return rows * cols; }
  void validate() const;
};

SimulationDesign design_from_json(const nlohmann::json& j);
nlohmann::json design_to_json(const SimulationDesign& d);

/// Observed mask for the design's lattice; depends only on (spec, seed).
std::vector<bool> missing_mask(Index rows, Index cols, const MissingSpec& spec, std::uint64_t seed);

/// X with iid U(0,1) entries (no intercept), y = Xβ + e with e ~ N(0, Q^{-1})
/// drawn as P^{-1} U^{-1} z from the sparse factor of Q(θ, σ²). The full
/// response is kept in `truth`; y is NaN at missing cells.
Dataset simulate_dataset(const SimulationDesign& design);

/// One fitted family in a comparison study.
struct FitSpec {
  Family family = Family::TarC;
  std::vector<double> grid;
};

/// δ grid {1} for the TAR families, ρ in {-0.99, -0.97, ..., 0.99} otherwise.
std::vector<double> default_grid(Family family);

struct StudyOptions {
  Index draws = 500;
  double alpha = 0.05;
  PriorConfig prior;
  NeumannConfig neumann;
  int threads = 1;
};

struct StudyRow {
  Index replicate = 0;
  Family family = Family::TarC;
  std::string metric;
  double value = 0.0;
};

/// The eight metrics reported per replicate and family.
const std::vector<std::string>& study_metrics();

/// For r = 0..R-1: simulate with a replicate-derived seed, fit every family,
/// predict the missing cells and score them. The Frobenius metric compares
/// σ²(Q_true(θ_true, 1))^{-1} with the fit's covariance at its posterior-mean
/// (θ, σ²); sigma2 is the posterior mean of σ².
std::vector<StudyRow> replicate_study(const SimulationDesign& design, const std::vector<FitSpec>& fits,
                                      Index replicates, const StudyOptions& opts);

/// `replicate,family,metric,value`.
void write_study_long(std::ostream& os, const std::vector<StudyRow>& rows);
/// `replicate,family,<metric>...`, one row per replicate and family.
void write_study_wide(std::ostream& os, const std::vector<StudyRow>& rows);

/// Median of one metric for one family over the replicates.
double study_median(const std::vector<StudyRow>& rows, Family family, const std::string& metric);

struct MotivationResult {
  MatrixXd correlation;
  Index sweeps = 0;
  std::vector<std::string> warnings;
};

struct MotivationOptions {
  Index burn_in = 100;
  Index thin = 10;
};

/// Coordinate-wise Gibbs sampler for a standard normal vector truncated to
/// {x : |x_i - (Bx)_i| < sqrt(k) for all i}, B the row-normalized rook
/// adjacency of a side x side lattice, started at x = 0. Returns the
/// empirical correlation of the retained states (exactly symmetric, unit
/// diagonal), locations in row-major order.
MotivationResult motivation_experiment(Index side, Index replicates, double k, std::uint64_t seed,
                                       const MotivationOptions& opts = {});

/// One Gibbs sweep, exposed for tests. Returns false if any coordinate had
/// to fall back to the midpoint of its feasible interval.
bool truncated_gibbs_sweep(VectorXd& x, const AdjacencyGraph& g, double k, Engine& eng);

}  // namespace tarsp

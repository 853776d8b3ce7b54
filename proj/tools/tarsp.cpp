#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tarsp/error.hpp"
#include "tarsp/graph.hpp"
#include "tarsp/io.hpp"
#include "tarsp/metrics.hpp"
#include "tarsp/model.hpp"
#include "tarsp/predict.hpp"
#include "tarsp/sampler.hpp"
#include "tarsp/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tarsp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Config, "cannot open '" + path + "'");
  return is;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Config, "cannot write '" + path.string() + "'");
  return os;
}

json read_json(const std::string& path) {
  std::ifstream is = open_in(path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, "malformed JSON in '" + path + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

// Timings never go into the deterministic artifacts; they accumulate here.
void log_run(const fs::path& dir, const std::string& command, const json& entry) {
  const fs::path p = dir / "run_log.json";
  json log = json::object();
  if (fs::exists(p)) {
    std::ifstream is(p);
    log = json::parse(is, nullptr, false);
    if (log.is_discarded() || !log.is_object()) log = json::object();
  }
  log[command] = entry;
  write_json(p, log);
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Config, "cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

struct Common {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out = ".";
  double alpha = 0.05;
  double neumann_tol = 1e-8;
  double prior_a = 0.01;
  double prior_b = 0.01;
  Index draws = 500;
};

void add_seed(CLI::App* c, Common& o) { c->add_option("--seed", o.seed, "RNG seed"); }
void add_threads(CLI::App* c, Common& o) {
  c->add_option("--threads", o.threads, "worker thread cap")->check(CLI::PositiveNumber);
}
void add_out(CLI::App* c, Common& o) { c->add_option("--out", o.out, "output directory"); }
void add_prior(CLI::App* c, Common& o) {
  c->add_option("--prior-a", o.prior_a, "inverse-gamma shape for sigma2");
  c->add_option("--prior-b", o.prior_b, "inverse-gamma scale for sigma2");
  c->add_option("--draws", o.draws, "posterior draws G")->check(CLI::PositiveNumber);
}
void add_predict_opts(CLI::App* c, Common& o) {
  c->add_option("--alpha", o.alpha, "interval level is 1 - alpha");
  c->add_option("--neumann-tol", o.neumann_tol, "tail tolerance of the Neumann series");
}

NeumannConfig neumann_config(const Common& o) {
  NeumannConfig cfg;
  cfg.tail_tol = o.neumann_tol;
  cfg.validate();
  return cfg;
}

PriorConfig prior_config(const Common& o) {
  PriorConfig p{o.prior_a, o.prior_b};
  p.validate();
  return p;
}

SimulationDesign load_design(const std::string& design_path, const std::string& item, CLI::Option* seed_opt,
                             std::uint64_t seed) {
  SimulationDesign d;
  if (!design_path.empty()) {
    d = design_from_json(read_json(design_path));
  } else {
    if (item.size() != 1) throw Error(ErrorCode::Config, "--item must be one of a, b, c, d");
    d = SimulationDesign::item(item[0]);
  }
  if (seed_opt->count() > 0) d.seed = seed;
  d.validate();
  return d;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& design_path, const std::string& item, CLI::Option* seed_opt, const Common& o) {
  const auto t0 = Clock::now();
  const SimulationDesign design = load_design(design_path, item, seed_opt, o.seed);
  const Dataset data = simulate_dataset(design);
  const fs::path dir = prepare_out(o.out);
  {
    auto os = open_out(dir / "dataset.csv");
    write_dataset_csv(os, data);
  }
  {
    auto os = open_out(dir / "truth.csv");
    write_truth_csv(os, *data.truth);
  }
  {
    auto os = open_out(dir / "mask.csv");
    write_mask_csv(os, data);
  }
  {
    auto os = open_out(dir / "adjacency.txt");
    write_edge_list(os, build_grid_graph(design.rows, design.cols));
  }
  {
    auto os = open_out(dir / "coords.csv");
    os << "id,x,y\n";
    for (std::size_t i = 0; i < data.coords.size(); ++i) {
      os << i << ',' << format_double(data.coords[i].x) << ',' << format_double(data.coords[i].y) << '\n';
    }
  }
  write_json(dir / "design.json", design_to_json(design));
  log_run(dir, "simulate", {{"seconds", seconds_since(t0)}});
  std::cout << "simulated " << data.size() << " regions, " << data.size() - data.num_observed() << " missing\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitInputs {
  std::string data;
  std::string adjacency;
  std::string coords;
  std::string formula;
  std::string family = "tar-c";
  std::string grid;
  Index neighbors = 10;
  double phi = 1.0;
};

struct LoadedModel {
  Dataset data;
  std::optional<PrecisionModel> model;
};

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

LoadedModel load_model(const FitInputs& in, const std::vector<double>& grid) {
  LoadedModel lm;
  const Family family = parse_family(in.family);
  if (in.data.empty()) throw Error(ErrorCode::Config, "--data is required");
  std::optional<std::vector<Edge>> edges;
  if (!in.adjacency.empty()) {
    auto is = open_in(in.adjacency);
    edges = read_edge_list(is, in.adjacency);
  }
  {
    auto is = open_in(in.data);
    if (!in.formula.empty()) {
      if (!edges) throw Error(ErrorCode::Config, "--formula needs --adjacency to fix the region count");
      const CsvTable table = read_csv(is, in.data);
      lm.data = ingest_dataset(table, edge_list_size(*edges), formula_from_json(read_json(in.formula)));
    } else {
      lm.data = read_dataset_csv(is, in.data);
    }
  }
  if (family == Family::NngpTar) {
    if (in.coords.empty()) throw Error(ErrorCode::Config, "nngp-tar needs --coords");
    auto is = open_in(in.coords);
    std::vector<Point> pts = read_coordinates(is, in.coords);
    if (static_cast<Index>(pts.size()) != lm.data.size()) {
      throw Error(ErrorCode::Config, "coordinates and data differ in size");
    }
    DirectedNeighborSets ns = build_neighbor_sets(pts, in.neighbors, NeighborOrdering::SortByFirstCoordinate);
    lm.model = PrecisionModel::nngp(std::move(ns), std::move(pts), CorrelationSpec{in.phi}, grid);
  } else {
    if (!edges) throw Error(ErrorCode::Config, std::string(family_name(family)) + " needs --adjacency");
    AdjacencyGraph g = build_graph_from_edges(lm.data.size(), *edges);
    for (const auto& w : g.warnings()) warn(w);
    lm.model = PrecisionModel::areal(family, std::move(g), grid);
  }
  return lm;
}

int cmd_fit(const FitInputs& in, const Common& o) {
  const Family family = parse_family(in.family);
  const std::vector<double> grid = in.grid.empty() ? default_grid(family) : parse_grid_spec(in.grid);
  const PriorConfig prior = prior_config(o);
  const LoadedModel lm = load_model(in, grid);
  const fs::path dir = prepare_out(o.out);

  const auto t0 = Clock::now();
  const PosteriorDraws draws = sample_posterior(lm.data, *lm.model, prior, o.draws, o.seed, SamplerOptions{o.threads});
  const double fit_seconds = seconds_since(t0);

  {
    auto os = open_out(dir / "posterior.csv");
    write_draws_csv(os, draws);
  }
  json summary = summary_json(draws);
  write_json(dir / "summary.json", summary);
  json fit{{"family", std::string(family_name(family))},
           {"grid", grid},
           {"data", absolute(in.data)},
           {"adjacency", absolute(in.adjacency)},
           {"coords", absolute(in.coords)},
           {"formula", absolute(in.formula)},
           {"neighbors", in.neighbors},
           {"phi", in.phi},
           {"prior", {{"a", prior.a}, {"b", prior.b}}},
           {"draws", o.draws},
           {"seed", o.seed},
           {"column_names", draws.column_names}};
  write_json(dir / "fit.json", fit);
  log_run(dir, "fit", {{"model_seconds", fit_seconds}, {"grid_size", grid.size()}, {"draws", o.draws},
                       {"threads", o.threads}});
  std::cout << "fit " << family_name(family) << ": " << o.draws << " draws over " << grid.size()
            << " grid values in " << fit_seconds << " s\n";
  return 0;
}

// ----------------------------------------------------------------- predict

int cmd_predict(const std::string& fit_dir, const std::string& truth_path, bool samples, const Common& o) {
  const fs::path fdir(fit_dir);
  if (fit_dir.empty() || !fs::exists(fdir / "fit.json") || !fs::exists(fdir / "posterior.csv")) {
    throw Error(ErrorCode::Config, "fit directory '" + fit_dir + "' lacks fit.json or posterior.csv");
  }
  const json fit = read_json((fdir / "fit.json").string());
  FitInputs in;
  std::vector<double> grid;
  try {
    in.family = fit.at("family").get<std::string>();
    in.data = fit.at("data").get<std::string>();
    in.adjacency = fit.at("adjacency").get<std::string>();
    in.coords = fit.at("coords").get<std::string>();
    in.formula = fit.at("formula").get<std::string>();
    in.neighbors = fit.at("neighbors").get<Index>();
    in.phi = fit.at("phi").get<double>();
    grid = fit.at("grid").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed fit.json: ") + e.what());
  }
  const LoadedModel lm = load_model(in, grid);
  PosteriorDraws draws;
  {
    auto is = open_in((fdir / "posterior.csv").string());
    draws = read_draws_csv(is);
  }
  draws.family = lm.model->family();
  draws.grid = grid;
  std::optional<VectorXd> truth;
  if (!truth_path.empty()) {
    auto is = open_in(truth_path);
    truth = read_truth_csv(is, lm.data.size(), truth_path);
  }
  const NeumannConfig cfg = neumann_config(o);
  const fs::path dir = prepare_out(o.out);

  const auto t0 = Clock::now();
  const PredictiveSummary pred =
      kriging_predict(lm.data, *lm.model, draws, cfg, o.alpha, o.seed, KrigingOptions{o.threads, true});
  const double predict_seconds = seconds_since(t0);
  for (const auto& w : pred.warnings) warn(w);

  std::optional<VectorXd> truth_m;
  if (truth) truth_m = select(*truth, pred.ids);
  {
    auto os = open_out(dir / "predictions.csv");
    write_predictions_csv(os, pred, truth ? &*truth : nullptr);
  }
  if (samples) {
    auto os = open_out(dir / "samples.csv");
    write_samples_csv(os, pred);
  }
  json scores{{"n_predicted", pred.size()}, {"alpha", o.alpha}};
  json methods = json::object();
  for (const auto& [theta, m] : pred.methods) methods[format_double(theta)] = std::string(method_name(m));
  scores["covariance_methods"] = methods;
  if (truth_m) {
    Dataset with_truth = lm.data;
    with_truth.truth = truth;
    const VectorXd res = residual_map(with_truth, pred);
    auto os = open_out(dir / "residuals.csv");
    os << "id,residual\n";
    for (Index i = 0; i < pred.size(); ++i) os << pred.ids[static_cast<std::size_t>(i)] << ',' << format_double(res[i]) << '\n';
    if (pred.size() >= 2) {
      scores["scores"] = to_json(score_predictions(*truth_m, pred.point, pred.samples, pred.lower, pred.upper, o.alpha));
    } else {
      warn("fewer than two predicted regions; scores skipped");
    }
  } else {
    warn("no truth given; residuals and scores skipped");
  }
  write_json(dir / "scores.json", scores);
  log_run(dir, "predict", {{"prediction_seconds", predict_seconds}, {"locations", pred.size()}, {"threads", o.threads}});
  std::cout << "predicted " << pred.size() << " regions in " << predict_seconds << " s\n";
  return 0;
}

// ----------------------------------------------------------------- compare

int cmd_compare(const std::string& design_path, const std::string& item, CLI::Option* seed_opt,
                const std::string& families, const std::string& tar_grid, const std::string& rho_grid,
                Index replicates, const Common& o) {
  const auto t0 = Clock::now();
  const SimulationDesign design = load_design(design_path, item, seed_opt, o.seed);
  std::vector<FitSpec> fits;
  std::vector<std::string> names = split_csv_line(families);
  if (families.empty()) {
    const bool simultaneous = design.family == Family::TarS || design.family == Family::Sar;
    names = simultaneous ? std::vector<std::string>{"tar-s", "sar"} : std::vector<std::string>{"tar-c", "car"};
  }
  for (const auto& name : names) {
    const Family f = parse_family(name);
    if (f == Family::NngpTar) throw Error(ErrorCode::Config, "nngp-tar is not available in lattice comparisons");
    std::vector<double> grid;
    if (uses_delta(f) && !tar_grid.empty()) grid = parse_grid_spec(tar_grid);
    if (!uses_delta(f) && !rho_grid.empty()) grid = parse_grid_spec(rho_grid);
    fits.push_back({f, grid});
  }
  StudyOptions so;
  so.draws = o.draws;
  so.alpha = o.alpha;
  so.prior = prior_config(o);
  so.neumann = neumann_config(o);
  so.threads = o.threads;
  const std::vector<StudyRow> rows = replicate_study(design, fits, replicates, so);
  const fs::path dir = prepare_out(o.out);
  {
    auto os = open_out(dir / "replicates.csv");
    write_study_wide(os, rows);
  }
  {
    auto os = open_out(dir / "metrics_long.csv");
    write_study_long(os, rows);
  }
  json medians = json::object();
  for (const FitSpec& f : fits) {
    json m = json::object();
    for (const auto& metric : study_metrics()) m[metric] = study_median(rows, f.family, metric);
    medians[std::string(family_name(f.family))] = m;
  }
  write_json(dir / "medians.json", medians);
  log_run(dir, "compare", {{"seconds", seconds_since(t0)}, {"replicates", replicates}});
  std::cout << medians.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- motivate

int cmd_motivate(Index side, Index replicates, double k, Index burn_in, Index thin, const Common& o) {
  const auto t0 = Clock::now();
  const MotivationResult r = motivation_experiment(side, replicates, k, o.seed, MotivationOptions{burn_in, thin});
  for (const auto& w : r.warnings) warn(w);
  const fs::path dir = prepare_out(o.out);
  {
    auto os = open_out(dir / "correlation.csv");
    write_matrix_csv(os, r.correlation);
  }
  log_run(dir, "motivate", {{"seconds", seconds_since(t0)}, {"sweeps", r.sweeps}});
  std::cout << "wrote " << r.correlation.rows() << " x " << r.correlation.cols() << " correlation matrix\n";
  return 0;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const std::string& item, const std::string& grid_text, Index bench_thetas, const Common& o) {
  if (item.size() != 1) throw Error(ErrorCode::Config, "--item must be one of a, b, c, d");
  SimulationDesign design = SimulationDesign::item(item[0]);
  design.seed = o.seed;
  const Dataset data = simulate_dataset(design);
  const std::vector<double> grid = parse_grid_spec(grid_text);
  const AdjacencyGraph g = build_grid_graph(design.rows, design.cols);
  const PrecisionModel model = PrecisionModel::areal(design.family, g, grid);
  const NeumannConfig cfg = neumann_config(o);

  auto t0 = Clock::now();
  const PosteriorDraws draws = sample_posterior(data, model, prior_config(o), o.draws, o.seed, SamplerOptions{o.threads});
  const double fit_seconds = seconds_since(t0);
  t0 = Clock::now();
  const PredictiveSummary pred = kriging_predict(data, model, draws, cfg, o.alpha, o.seed, KrigingOptions{o.threads, true});
  const double predict_seconds = seconds_since(t0);

  // A few evenly spaced grid values keep the dense baseline affordable.
  std::vector<double> subset;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(bench_thetas, 1)), grid.size());
  for (std::size_t i = 0; i < count; ++i) subset.push_back(grid[i * grid.size() / count]);
  const PrecisionModel sub = PrecisionModel::areal(design.family, g, subset);
  const KrigingBenchmark kb = benchmark_kriging(data, sub, cfg);

  const json out{{"family", std::string(family_name(design.family))},
                 {"regions", data.size()},
                 {"grid_size", grid.size()},
                 {"draws", o.draws},
                 {"fit_seconds", fit_seconds},
                 {"predicted_locations", pred.size()},
                 {"predict_seconds", predict_seconds},
                 {"kriging_terms",
                  {{"thetas", kb.thetas},
                   {"cached_seconds", kb.cached_seconds},
                   {"dense_seconds", kb.dense_seconds},
                   {"max_difference", kb.max_difference},
                   {"neumann_count", kb.neumann_count}}}};
  const fs::path dir = prepare_out(o.out);
  write_json(dir / "bench.json", out);
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated autoregressive models for areal data: simulation, fitting, prediction and comparison"};
  app.require_subcommand(1);
  Common o;

  auto* sim = app.add_subcommand("simulate", "simulate a lattice dataset");
  std::string design_path;
  std::string item = "b";
  sim->add_option("--design", design_path, "design JSON");
  sim->add_option("--item", item, "preset design a, b, c or d");
  auto* sim_seed = sim->add_option("--seed", o.seed, "RNG seed (overrides the design)");
  add_out(sim, o);

  auto* fit = app.add_subcommand("fit", "draw from the posterior");
  FitInputs in;
  fit->add_option("--data", in.data, "dataset CSV")->required();
  fit->add_option("--adjacency", in.adjacency, "edge list");
  fit->add_option("--coords", in.coords, "coordinates CSV (nngp-tar)");
  fit->add_option("--formula", in.formula, "formula JSON for raw tabular data");
  fit->add_option("--family", in.family, "tar-c, tar-s, car, sar or nngp-tar");
  fit->add_option("--grid,--rho-grid", in.grid, "delta or rho grid: list or start:stop:step");
  fit->add_option("--neighbors", in.neighbors, "neighbour cap for nngp-tar")->check(CLI::PositiveNumber);
  fit->add_option("--phi", in.phi, "exponential correlation decay for nngp-tar");
  add_prior(fit, o);
  add_seed(fit, o);
  add_threads(fit, o);
  add_out(fit, o);

  auto* pred = app.add_subcommand("predict", "Kriging prediction at missing regions");
  std::string fit_dir;
  std::string truth_path;
  bool samples = false;
  pred->add_option("--fit", fit_dir, "directory written by fit")->required();
  pred->add_option("--truth", truth_path, "truth CSV for scoring");
  pred->add_flag("--samples", samples, "also write the predictive sample matrix");
  add_predict_opts(pred, o);
  add_seed(pred, o);
  add_threads(pred, o);
  add_out(pred, o);

  auto* cmp = app.add_subcommand("compare", "replicated model comparison");
  std::string families;
  std::string tar_grid;
  std::string rho_grid;
  Index replicates = 20;
  cmp->add_option("--design", design_path, "design JSON");
  cmp->add_option("--item", item, "preset design a, b, c or d");
  auto* cmp_seed = cmp->add_option("--seed", o.seed, "RNG seed (overrides the design)");
  cmp->add_option("--families", families, "comma-separated families to fit");
  cmp->add_option("--grid", tar_grid, "delta grid for the TAR families");
  cmp->add_option("--rho-grid", rho_grid, "rho grid for car and sar");
  cmp->add_option("--replicates", replicates, "number of replicates")->check(CLI::PositiveNumber);
  add_prior(cmp, o);
  add_predict_opts(cmp, o);
  add_threads(cmp, o);
  add_out(cmp, o);

  auto* mot = app.add_subcommand("motivate", "truncated Gibbs correlation experiment");
  Index side = 10;
  Index mot_replicates = 1000;
  double k = 0.5;
  Index burn_in = 100;
  Index thin = 10;
  mot->add_option("--side", side, "lattice side length");
  mot->add_option("--replicates", mot_replicates, "retained Gibbs states");
  mot->add_option("-k", k, "constraint bound");
  mot->add_option("--burn-in", burn_in, "discarded sweeps");
  mot->add_option("--thin", thin, "sweeps between retained states");
  add_seed(mot, o);
  add_out(mot, o);

  auto* bench = app.add_subcommand("bench", "time fitting, prediction and the covariance routes");
  std::string bench_grid = "0.1:10:0.1";
  Index bench_thetas = 5;
  bench->add_option("--item", item, "preset design");
  bench->add_option("--grid", bench_grid, "delta or rho grid");
  bench->add_option("--bench-thetas", bench_thetas, "grid values in the cached vs dense comparison");
  add_prior(bench, o);
  add_predict_opts(bench, o);
  add_seed(bench, o);
  add_threads(bench, o);
  add_out(bench, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(design_path, item, sim_seed, o);
    if (*fit) return cmd_fit(in, o);
    if (*pred) return cmd_predict(fit_dir, truth_path, samples, o);
    if (*cmp) return cmd_compare(design_path, item, cmp_seed, families, tar_grid, rho_grid, replicates, o);
    if (*mot) return cmd_motivate(side, mot_replicates, k, burn_in, thin, o);
    if (*bench) return cmd_bench(item, bench_grid, bench_thetas, o);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tarsp/csv.hpp"
#include "tarsp/graph.hpp"
#include "tarsp/sampler.hpp"

namespace tarsp {

/// One `i j` pair per line, 0-based; `#` starts a comment. Throws Ingestion
/// with the line number on anything else.
std::vector<Edge> read_edge_list(std::istream& is, const std::string& source = "<edges>");
void write_edge_list(std::ostream& os, const AdjacencyGraph& g);
/// Vertex count implied by an edge list: largest index + 1.
Index edge_list_size(const std::vector<Edge>& edges);

/// CSV with header `id,x,y`; ids must be exactly 0..n-1 in any order.
std::vector<Point> read_coordinates(std::istream& is, const std::string& source = "<coords>");

/// `id,y,<covariates>...`, y written as NA at missing regions.
void write_dataset_csv(std::ostream& os, const Dataset& d);
/// `id,observed` with 0/1 entries.
void write_mask_csv(std::ostream& os, const Dataset& d);
/// `id,truth`.
void write_truth_csv(std::ostream& os, const VectorXd& truth);

/// Reads write_dataset_csv output: rows sorted by id, NA responses marked
/// missing, every other column a covariate.
Dataset read_dataset_csv(std::istream& is, const std::string& source = "<dataset>");
VectorXd read_truth_csv(std::istream& is, Index n, const std::string& source = "<truth>");

/// Model formula for raw tabular data.
struct FormulaSpec {
  std::string response;
  bool log_response = false;
  std::vector<std::string> covariates;
  std::optional<std::string> categorical;
  std::string reference_level;
  /// Column holding 0-based region ids; rows are used in file order when empty.
  std::string id_column = "id";
  bool intercept = true;
};

FormulaSpec formula_from_json(const nlohmann::json& j);

/// Builds X = [1 | numeric covariates | reference-coded dummies] with
/// dummies for the non-reference levels in sorted order, log-transforms the
/// response on request and places row k at region id k. Empty or NA
/// responses become missing regions. `n` is the adjacency size.
Dataset ingest_dataset(const CsvTable& table, Index n, const FormulaSpec& spec);

/// Grid values from `v1,v2,...` or `start:stop:step` (stop included when
/// it lies on the step lattice). Throws Config when empty or malformed.
std::vector<double> parse_grid_spec(std::string_view text);

/// Dense matrix as headerless CSV, full precision.
void write_matrix_csv(std::ostream& os, const MatrixXd& m);

}  // namespace tarsp

#include "tarsp/io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "tarsp/error.hpp"

namespace tarsp {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::Ingestion, source + ":" + std::to_string(line) + ": " + what);
}

bool is_na(std::string_view f) { return f.empty() || f == "NA" || f == "na" || f == "NaN" || f == "nan"; }

// Position of every row by its id column, checking ids are exactly 0..n-1.
std::vector<std::size_t> rows_by_id(const CsvTable& t, long id_col, Index n, const std::string& source) {
  if (static_cast<Index>(t.rows.size()) != n) {
    throw Error(ErrorCode::Ingestion, source + ": " + std::to_string(t.rows.size()) + " rows for " +
                                          std::to_string(n) + " regions");
  }
  std::vector<std::size_t> at(static_cast<std::size_t>(n), std::numeric_limits<std::size_t>::max());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& f = t.rows[r][static_cast<std::size_t>(id_col)];
    double v = 0.0;
    if (!parse_double(f, v) || v != std::floor(v) || v < 0 || v >= static_cast<double>(n)) {
      fail(source, r + 2, "id '" + f + "' is not an integer in [0, " + std::to_string(n) + ")");
    }
    auto& slot = at[static_cast<std::size_t>(v)];
    if (slot != std::numeric_limits<std::size_t>::max()) fail(source, r + 2, "duplicate id " + f);
    slot = r;
  }
  return at;
}

}  // namespace

std::vector<Edge> read_edge_list(std::istream& is, const std::string& source) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long long i = 0;
    long long j = 0;
    if (!(ss >> i)) {
      std::string rest;
      ss.clear();
      if (ss >> rest) fail(source, no, "expected two integer indices");
      continue;
    }
    std::string rest;
    if (!(ss >> j) || (ss >> rest)) fail(source, no, "expected two integer indices");
    if (i < 0 || j < 0) fail(source, no, "negative index");
    edges.emplace_back(static_cast<Index>(i), static_cast<Index>(j));
  }
  return edges;
}

void write_edge_list(std::ostream& os, const AdjacencyGraph& g) {
  for (const Edge& e : g.edges()) os << e.first << ' ' << e.second << '\n';
}

Index edge_list_size(const std::vector<Edge>& edges) {
  Index n = 0;
  for (const Edge& e : edges) n = std::max({n, e.first + 1, e.second + 1});
  return n;
}

std::vector<Point> read_coordinates(std::istream& is, const std::string& source) {
  const CsvTable t = read_csv(is, source);
  const long id = t.column("id");
  const long xc = t.column("x");
  const long yc = t.column("y");
  if (id < 0 || xc < 0 || yc < 0) throw Error(ErrorCode::Ingestion, source + ": header must contain id,x,y");
  const Index n = static_cast<Index>(t.rows.size());
  const auto at = rows_by_id(t, id, n, source);
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const auto& row = t.rows[at[static_cast<std::size_t>(k)]];
    Point& p = pts[static_cast<std::size_t>(k)];
    if (!parse_double(row[static_cast<std::size_t>(xc)], p.x) || !parse_double(row[static_cast<std::size_t>(yc)], p.y)) {
      fail(source, at[static_cast<std::size_t>(k)] + 2, "non-numeric coordinate");
    }
  }
  return pts;
}

void write_dataset_csv(std::ostream& os, const Dataset& d) {
  os << "id,y";
  for (const auto& name : d.column_names) os << ',' << name;
  os << '\n';
  for (Index i = 0; i < d.size(); ++i) {
    os << i << ',' << (d.observed[static_cast<std::size_t>(i)] ? format_double(d.y[i]) : std::string("NA"));
    for (Index j = 0; j < d.x.cols(); ++j) os << ',' << format_double(d.x(i, j));
    os << '\n';
  }
}

void write_mask_csv(std::ostream& os, const Dataset& d) {
  os << "id,observed\n";
  for (Index i = 0; i < d.size(); ++i) os << i << ',' << (d.observed[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
}

void write_truth_csv(std::ostream& os, const VectorXd& truth) {
  os << "id,truth\n";
  for (Index i = 0; i < truth.size(); ++i) os << i << ',' << format_double(truth[i]) << '\n';
}

Dataset read_dataset_csv(std::istream& is, const std::string& source) {
  const CsvTable t = read_csv(is, source);
  FormulaSpec spec;
  spec.response = "y";
  spec.intercept = false;
  for (const auto& h : t.header) {
    if (h != "id" && h != "y") spec.covariates.push_back(h);
  }
  return ingest_dataset(t, static_cast<Index>(t.rows.size()), spec);
}

VectorXd read_truth_csv(std::istream& is, Index n, const std::string& source) {
  const CsvTable t = read_csv(is, source);
  const long id = t.column("id");
  const long tc = t.column("truth");
  if (id < 0 || tc < 0) throw Error(ErrorCode::Ingestion, source + ": header must contain id,truth");
  const auto at = rows_by_id(t, id, n, source);
  VectorXd truth(n);
  for (Index k = 0; k < n; ++k) {
    if (!parse_double(t.rows[at[static_cast<std::size_t>(k)]][static_cast<std::size_t>(tc)], truth[k])) {
      fail(source, at[static_cast<std::size_t>(k)] + 2, "non-numeric truth value");
    }
  }
  return truth;
}

FormulaSpec formula_from_json(const nlohmann::json& j) {
  try {
    FormulaSpec f;
    f.response = j.at("response").get<std::string>();
    f.log_response = j.value("log_response", false);
    f.covariates = j.value("covariates", std::vector<std::string>{});
    if (j.contains("categorical") && !j.at("categorical").is_null()) {
      f.categorical = j.at("categorical").get<std::string>();
      f.reference_level = j.at("reference").get<std::string>();
    }
    f.id_column = j.value("id_column", std::string("id"));
    f.intercept = j.value("intercept", true);
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed formula: ") + e.what());
  }
}

Dataset ingest_dataset(const CsvTable& table, Index n, const FormulaSpec& spec) {
  auto col = [&](const std::string& name) {
    const long c = table.column(name);
    if (c < 0) throw Error(ErrorCode::Ingestion, "unknown column '" + name + "'");
    return static_cast<std::size_t>(c);
  };
  const std::size_t yc = col(spec.response);
  std::vector<std::size_t> xc;
  for (const auto& c : spec.covariates) xc.push_back(col(c));

  std::vector<std::size_t> at;
  if (!spec.id_column.empty() && table.column(spec.id_column) >= 0) {
    at = rows_by_id(table, table.column(spec.id_column), n, "data");
  } else {
    if (static_cast<Index>(table.rows.size()) != n) {
      throw Error(ErrorCode::Ingestion, "data: " + std::to_string(table.rows.size()) + " rows for " +
                                            std::to_string(n) + " regions and no id column");
    }
    at.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < at.size(); ++k) at[k] = k;
  }

  std::vector<std::string> levels;
  std::size_t cc = 0;
  if (spec.categorical) {
    cc = col(*spec.categorical);
    std::set<std::string> seen;
    for (const auto& row : table.rows) seen.insert(row[cc]);
    if (!seen.count(spec.reference_level)) {
      throw Error(ErrorCode::Ingestion, "reference level '" + spec.reference_level + "' does not occur in column '" +
                                            *spec.categorical + "'");
    }
    for (const auto& l : seen) {
      if (l != spec.reference_level) levels.push_back(l);
    }
  }

  const Index p = (spec.intercept ? 1 : 0) + static_cast<Index>(xc.size() + levels.size());
  Dataset d;
  d.y.resize(n);
  d.x.resize(n, p);
  d.observed.assign(static_cast<std::size_t>(n), true);
  if (spec.intercept) d.column_names.push_back("intercept");
  for (const auto& c : spec.covariates) d.column_names.push_back(c);
  for (const auto& l : levels) d.column_names.push_back(l);

  for (Index k = 0; k < n; ++k) {
    const std::size_t r = at[static_cast<std::size_t>(k)];
    const auto& row = table.rows[r];
    const std::size_t line = r + 2;
    const std::string& yf = row[yc];
    if (is_na(yf)) {
      d.observed[static_cast<std::size_t>(k)] = false;
      d.y[k] = std::numeric_limits<double>::quiet_NaN();
    } else {
      double v = 0.0;
      if (!parse_double(yf, v)) fail("data", line, "non-numeric response '" + yf + "' in column '" + spec.response + "'");
      if (spec.log_response) {
        if (!(v > 0.0)) fail("data", line, "response " + yf + " must be > 0 for the log transform");
        v = std::log(v);
      }
      d.y[k] = v;
    }
    Index j = 0;
    if (spec.intercept) d.x(k, j++) = 1.0;
    for (std::size_t c = 0; c < xc.size(); ++c) {
      double v = 0.0;
      if (!parse_double(row[xc[c]], v)) {
        fail("data", line, "non-numeric value '" + row[xc[c]] + "' in covariate '" + spec.covariates[c] + "'");
      }
      d.x(k, j++) = v;
    }
    for (const auto& l : levels) d.x(k, j++) = row[cc] == l ? 1.0 : 0.0;
  }
  return d;
}

std::vector<double> parse_grid_spec(std::string_view text) {
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::Config, "grid '" + std::string(text) + "': " + why);
  };
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    std::string colon(text);
    std::replace(colon.begin(), colon.end(), ':', ',');
    const auto parts = split_csv_line(colon);
    double start = 0.0, stop = 0.0, step = 0.0;
    if (parts.size() != 3 || !parse_double(parts[0], start) || !parse_double(parts[1], stop) ||
        !parse_double(parts[2], step)) {
      throw bad("expected start:stop:step");
    }
    if (!(step > 0.0) || stop < start) throw bad("need step > 0 and stop >= start");
    const double count = std::floor((stop - start) / step + 1e-9);
    if (count > 1e6) throw bad("too many values");
    // Computed from the index so the values do not drift with accumulated rounding.
    for (long k = 0; k <= static_cast<long>(count); ++k) out.push_back(start + static_cast<double>(k) * step);
  } else {
    for (const auto& f : split_csv_line(text)) {
      double v = 0.0;
      if (!parse_double(f, v)) throw bad("'" + f + "' is not a number");
      out.push_back(v);
    }
  }
  if (out.empty()) throw bad("no values");
  for (double v : out) {
    if (!std::isfinite(v)) throw bad("non-finite value");
  }
  return out;
}

void write_matrix_csv(std::ostream& os, const MatrixXd& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

}  // namespace tarsp

#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "vimkit/coarsened.hpp"
#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"

namespace vimkit {

struct IngestOptions {
  std::string outcome_column;
  std::optional<std::string> treatment_column;  // -> TreatmentDataset
  std::optional<std::string> missing_column;    // -> MissingnessDataset
};

struct IngestedData {
  std::variant<Dataset, TreatmentDataset, MissingnessDataset> data;
  std::vector<std::string> feature_names;  // column order preserved
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t data_row,
                         const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw DataError("non-numeric cell '" + cell + "' at row " +
                    std::to_string(data_row) + ", column '" + column + "'");
  return value;
}

}  // namespace detail

// Reads a headered UTF-8 CSV with numeric cells into a dataset. Feature
// column order is preserved. A declared treatment column (0/1) yields a
// TreatmentDataset; a declared missingness indicator yields a
// MissingnessDataset whose outcome cells may be empty only where the
// indicator is 0 (the masked outcome is 0 there by definition). Rows are
// reported 1-based, counting data rows below the header.
inline IngestedData ingest_csv(const std::string& path, const IngestOptions& opt) {
  if (opt.treatment_column && opt.missing_column)
    throw ConfigError("declare either a treatment column or a missingness column, not both");

  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input file '" + path + "'");
  const std::vector<std::string> header = detail::split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    throw ConfigError("column '" + name + "' not found in header of '" + path + "'");
  };
  const int outcome_col = column_of(opt.outcome_column);
  const int treatment_col = opt.treatment_column ? column_of(*opt.treatment_column) : -1;
  const int missing_col = opt.missing_column ? column_of(*opt.missing_column) : -1;
  if (treatment_col == outcome_col || missing_col == outcome_col)
    throw ConfigError("role columns must be distinct from the outcome column");

  std::vector<std::vector<double>> rows;
  std::vector<double> deltas;  // parsed early so empty outcomes can be checked
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++data_row;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(data_row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    double delta = 1.0;
    if (missing_col >= 0)
      delta = detail::parse_cell(cells[static_cast<std::size_t>(missing_col)],
                                 data_row, header[static_cast<std::size_t>(missing_col)]);
    std::vector<double> parsed(cells.size(), 0.0);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (static_cast<int>(j) == missing_col) {
        parsed[j] = delta;
        continue;
      }
      if (cells[j].empty()) {
        if (static_cast<int>(j) == outcome_col && missing_col >= 0 && delta == 0.0) {
          parsed[j] = 0.0;  // U = Delta * Y
          continue;
        }
        throw DataError("empty cell at row " + std::to_string(data_row) +
                        ", column '" + header[j] + "'" +
                        (static_cast<int>(j) == outcome_col && missing_col >= 0
                             ? " where the missingness indicator is 1"
                             : ""));
      }
      parsed[j] = detail::parse_cell(cells[j], data_row, header[j]);
    }
    if (missing_col >= 0 && delta == 0.0)
      parsed[static_cast<std::size_t>(outcome_col)] = 0.0;
    deltas.push_back(delta);
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) throw DataError("no data rows in '" + path + "'");

  std::vector<int> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) == outcome_col || static_cast<int>(j) == treatment_col ||
        static_cast<int>(j) == missing_col)
      continue;
    feature_cols.push_back(static_cast<int>(j));
    feature_names.push_back(header[j]);
  }
  if (feature_cols.empty()) throw DataError("no feature columns in '" + path + "'");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(feature_cols.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j)
      x(i, j) = row[static_cast<std::size_t>(feature_cols[static_cast<std::size_t>(j)])];
    y(i) = row[static_cast<std::size_t>(outcome_col)];
  }

  IngestedData out;
  out.feature_names = std::move(feature_names);
  if (treatment_col >= 0) {
    Eigen::VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i)
      a(i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(treatment_col)];
    TreatmentDataset td{std::move(x), std::move(a), std::move(y)};
    td.validate();
    out.data = std::move(td);
  } else if (missing_col >= 0) {
    Eigen::VectorXd delta(n);
    for (Eigen::Index i = 0; i < n; ++i) delta(i) = deltas[static_cast<std::size_t>(i)];
    MissingnessDataset md{std::move(x), std::move(delta), std::move(y)};
    md.validate();
    out.data = std::move(md);
  } else {
    out.data = make_dataset(std::move(x), std::move(y));
  }
  return out;
}

inline Dataset ingest_csv(const std::string& path, const std::string& outcome_column) {
  IngestOptions opt;
  opt.outcome_column = outcome_column;
  return std::get<Dataset>(ingest_csv(path, opt).data);
}

}  // namespace vimkit

#pragma once

// Minimal RFC-4180 reader for data tables: header row required, quoted
// fields with doubled-quote escapes, no embedded newlines. Cells stay as
// text until a numeric column is requested.

#include <Eigen/Dense>

#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "hetsem/error.hpp"
#include "hetsem/weights.hpp"

namespace hetsem {

namespace detail {

inline std::vector<std::string> parse_csv_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && trim(field).empty()) {
      quoted = was_quoted = true;
      field.clear();
    } else if (ch == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  require(!quoted, ErrorCode::Parse, "line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." ||
         cell == "null";
}

}  // namespace detail

class DataTable {
 public:
  static DataTable parse(std::istream& in) {
    DataTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      auto rec = detail::parse_csv_record(line, line_no);
      if (t.header_.empty()) {
        t.header_ = std::move(rec);
        continue;
      }
      require(rec.size() == t.header_.size(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": expected " +
                  std::to_string(t.header_.size()) + " fields, found " +
                  std::to_string(rec.size()));
      t.cells_.push_back(std::move(rec));
      t.line_numbers_.push_back(line_no);
    }
    require(!t.header_.empty(), ErrorCode::Parse, "data file is empty (header row required)");
    return t;
  }

  static DataTable load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Parse, "cannot open data file '" + path + "'");
    return parse(in);
  }

  std::size_t rows() const noexcept { return cells_.size(); }
  const std::vector<std::string>& columns() const noexcept { return header_; }

  bool has_column(const std::string& name) const {
    for (const auto& h : header_)
      if (h == name) return true;
    return false;
  }

  // Missing cells are rejected with the offending file line numbers.
  Eigen::VectorXd numeric(const std::string& name) const {
    std::size_t col = header_.size();
    for (std::size_t j = 0; j < header_.size(); ++j)
      if (header_[j] == name) col = j;
    require(col < header_.size(), ErrorCode::Parse, "missing column '" + name + "'");
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows()));
    std::string missing;
    int n_missing = 0;
    for (std::size_t i = 0; i < rows(); ++i) {
      const std::string& cell = cells_[i][col];
      if (detail::is_missing(cell)) {
        if (n_missing++ < 10) missing += (missing.empty() ? "" : ",") + std::to_string(line_numbers_[i]);
        continue;
      }
      v[static_cast<Eigen::Index>(i)] = detail::parse_double(cell, line_numbers_[i]);
    }
    require(n_missing == 0, ErrorCode::Parse,
            "column '" + name + "' has " + std::to_string(n_missing) +
                " missing value(s) at line(s) " + missing + (n_missing > 10 ? ",..." : ""));
    return v;
  }

  Eigen::MatrixXd numeric(const std::vector<std::string>& names) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j)
      m.col(static_cast<Eigen::Index>(j)) = numeric(names[j]);
    return m;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
  std::vector<std::size_t> line_numbers_;
};

}  // namespace hetsem

#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiersel/marginals.hpp"

namespace hiersel {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  }
  bool has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }
};

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
/// Blank lines are skipped; every record must match the header width.
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false, any = false;
  std::size_t line = 1, record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        if (record.size() != table.header.size())
          throw DataError("line " + std::to_string(record_line) + ": expected " + std::to_string(table.header.size()) +
                          " fields, found " + std::to_string(record.size()));
        table.rows.push_back(std::move(record));
        table.line_numbers.push_back(record_line);
      }
    }
    record.clear();
    any = false;
  };

  char c;
  while (in.get(c)) {
    if (!any) {
      record_line = line;
      any = true;
    }
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty())
          throw DataError("line " + std::to_string(line) + ": stray quote inside unquoted field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw DataError("line " + std::to_string(record_line) + ": unterminated quoted field");
  if (any) end_record();
  if (table.header.empty()) throw DataError("empty CSV: header row required");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in);
}

inline double parse_number(const std::string& raw, std::size_t line, const std::string& column) {
  std::string s = raw;
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if (s.empty()) throw DataError("line " + std::to_string(line) + ": missing value in column '" + column + "'");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": non-numeric value '" + raw + "' in column '" + column + "'");
  return v;
}

/// Builds a Dataset: `response` is y, every other column is a main effect in header order.
/// With `mains` given, exactly those columns are used, in that order.
inline Dataset dataset_from_csv(const CsvTable& table, const std::string& response,
                                const std::vector<std::string>& mains = {}) {
  if (!table.has_column(response)) throw DataError("response column '" + response + "' not found in header");
  const auto yc = table.column(response);
  std::vector<std::size_t> xc;
  Dataset d;
  d.response = response;
  if (mains.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (c != yc) {
        xc.push_back(c);
        d.names.push_back(table.header[c]);
      }
  } else {
    for (const auto& m : mains) {
      xc.push_back(table.column(m));
      d.names.push_back(m);
    }
  }
  if (table.rows.empty()) throw DataError("no data rows");
  if (xc.empty()) throw DataError("no predictor columns");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  d.y.resize(n);
  d.x.resize(n, static_cast<Eigen::Index>(xc.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    const auto line = table.line_numbers[static_cast<std::size_t>(r)];
    d.y(r) = parse_number(row[yc], line, response);
    for (std::size_t j = 0; j < xc.size(); ++j)
      d.x(r, static_cast<Eigen::Index>(j)) = parse_number(row[xc[j]], line, table.header[xc[j]]);
  }
  return d;
}

/// Predictor matrix only (for new data), optionally with the response if present.
inline MatrixXd matrix_from_csv(const CsvTable& table, const std::vector<std::string>& mains) {
  if (table.rows.empty()) throw DataError("no data rows");
  MatrixXd x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(mains.size()));
  std::vector<std::size_t> cols;
  for (const auto& m : mains) cols.push_back(table.column(m));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          parse_number(table.rows[r][cols[j]], table.line_numbers[r], mains[j]);
  return x;
}

inline void write_csv_field(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    write_csv_field(out, fields[i]);
  }
  out << '\n';
}

}  // namespace hiersel

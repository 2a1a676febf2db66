// CSV tables and dataset-specific cleaning recipes. Parsing is header-based
// with quoted-field support; malformed rows are collected into a reject
// report instead of aborting the run.
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairdcov/core.hpp"

namespace fairdcov {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t col_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw SchemaError("missing column: " + name);
  }

  bool has_column(const std::string& name) const {
    for (const auto& c : columns)
      if (c == name) return true;
    return false;
  }
};

namespace detail {

inline std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace detail

struct CsvReadResult {
  Table table;
  std::vector<std::size_t> rejected_lines;  // 1-based line numbers of malformed rows
};

inline CsvReadResult read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("read_csv: cannot open " + path);
  CsvReadResult out;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("read_csv: empty file " + path);
  out.table.columns = detail::parse_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::parse_csv_line(line);
    if (fields.size() != out.table.columns.size()) {
      out.rejected_lines.push_back(line_no);
      continue;
    }
    out.table.rows.push_back(std::move(fields));
  }
  return out;
}

inline void write_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << detail::csv_escape(table.columns[i]);
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << detail::csv_escape(row[i]);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Cleaning recipes
// ---------------------------------------------------------------------------

enum class Recipe { generic, compas, pg15, synthetic };

inline Recipe recipe_from_string(const std::string& s) {
  if (s == "generic") return Recipe::generic;
  if (s == "compas") return Recipe::compas;
  if (s == "pg15") return Recipe::pg15;
  if (s == "synthetic") return Recipe::synthetic;
  throw ConfigError("unknown recipe: " + s);
}

inline const char* to_string(Recipe r) {
  switch (r) {
    case Recipe::generic: return "generic";
    case Recipe::compas: return "compas";
    case Recipe::pg15: return "pg15";
    case Recipe::synthetic: return "synthetic";
  }
  return "?";
}

namespace detail {

inline double to_number(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(std::string(what) + ": not a number: '" + s + "'");
  }
}

// ProPublica cleaning: keep rows with a matched case (charge within 30 days
// of arrest), a known recidivism flag, a non-traffic charge, and a usable
// score; merge Asian and Native American into the Other ethnicity class.
inline Table clean_compas(const Table& raw) {
  const std::size_t days = raw.col_index("days_b_screening_arrest");
  const std::size_t is_recid = raw.col_index("is_recid");
  const std::size_t degree = raw.col_index("c_charge_degree");
  const std::size_t score = raw.col_index("score_text");
  const std::size_t race = raw.col_index("race");
  Table out;
  out.columns = raw.columns;
  for (const auto& row : raw.rows) {
    if (row[days].empty()) continue;
    double d;
    try {
      d = to_number(row[days], "days_b_screening_arrest");
    } catch (const SchemaError&) {
      continue;
    }
    if (d < -30.0 || d > 30.0) continue;
    if (row[is_recid] == "-1") continue;
    if (row[degree] == "O") continue;
    if (row[score] == "N/A" || row[score].empty()) continue;
    auto cleaned = row;
    if (cleaned[race] == "Asian" || cleaned[race] == "Native American")
      cleaned[race] = "Other";
    out.rows.push_back(std::move(cleaned));
  }
  return out;
}

// Removes the leading block of records that are exact duplicates of a later
// record and carry a zero claim count.
inline Table clean_pg15(const Table& raw, const std::string& response_column) {
  const std::size_t resp = raw.col_index(response_column);
  std::size_t drop = 0;
  for (; drop < raw.rows.size(); ++drop) {
    const auto& row = raw.rows[drop];
    if (to_number(row[resp], "pg15 response") != 0.0) break;
    bool duplicate = false;
    for (std::size_t j = drop + 1; j < raw.rows.size() && !duplicate; ++j)
      duplicate = (raw.rows[j] == row);
    if (!duplicate) break;
  }
  Table out;
  out.columns = raw.columns;
  out.rows.assign(raw.rows.begin() + static_cast<std::ptrdiff_t>(drop), raw.rows.end());
  return out;
}

}  // namespace detail

// Parse + recipe in one step. The response column is needed by the pg15
// recipe to identify the duplicated zero-claim block.
struct IngestResult {
  Table table;
  std::vector<std::size_t> rejected_lines;
  std::size_t recipe_dropped = 0;
};

inline IngestResult ingest_csv(const std::string& path, Recipe recipe,
                               const std::string& response_column) {
  CsvReadResult raw = read_csv(path);
  IngestResult out;
  out.rejected_lines = std::move(raw.rejected_lines);
  const std::size_t before = raw.table.rows.size();
  switch (recipe) {
    case Recipe::compas:
      out.table = detail::clean_compas(raw.table);
      break;
    case Recipe::pg15:
      out.table = detail::clean_pg15(raw.table, response_column);
      break;
    case Recipe::generic:
    case Recipe::synthetic:
      out.table = std::move(raw.table);
      break;
  }
  out.recipe_dropped = before - out.table.rows.size();
  return out;
}

}  // namespace fairdcov

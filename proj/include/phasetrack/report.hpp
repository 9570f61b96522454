#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace phasetrack::report {

/// Locale-independent formatting at 12 significant digits ('.' decimal
/// separator, enough to diff against analytic values at the 1e-10 level).
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

using Meta = std::vector<std::pair<std::string, std::string>>;
using Cell = nlohmann::json;  // string or number
using Row = std::vector<Cell>;

inline std::string cell_text(const Cell& c) {
  if (c.is_string()) return c.get<std::string>();
  return fmt(c.get<double>());
}

/// RFC-4180-style CSV with a '#' comment header recording the resolved
/// configuration, a header row, and fixed column order.
inline void write_csv(std::ostream& os, const Meta& meta,
                      const std::vector<std::string>& columns,
                      const std::vector<Row>& rows) {
  for (const auto& [key, value] : meta) os << "# " << key << "=" << value << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    os << (i ? "," : "") << columns[i];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << cell_text(row[i]);
    os << "\n";
  }
}

/// JSON equivalent; the comment header becomes a "meta" object.
inline void write_json(std::ostream& os, const Meta& meta,
                       const std::vector<std::string>& columns,
                       const std::vector<Row>& rows) {
  nlohmann::json doc;
  for (const auto& [key, value] : meta) doc["meta"][key] = value;
  doc["columns"] = columns;
  doc["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& c : row) {
      if (!c.is_string() && std::isnan(c.get<double>()))
        r.push_back(nullptr);  // JSON has no NaN literal
      else
        r.push_back(c);
    }
    doc["rows"].push_back(std::move(r));
  }
  os << doc.dump(2) << "\n";
}

}  // namespace phasetrack::report

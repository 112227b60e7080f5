#pragma once

#include "ssda/types.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ssda::io {

/// Fixed 17-significant-digit rendering used by every CSV and config writer.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  // strtod, not stod: subnormals set ERANGE but are valid round-trip output.
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end == begin || std::isspace(static_cast<unsigned char>(s.front())))
    throw Error("not a number: '" + s + "'");
  if (static_cast<std::size_t>(end - begin) != s.size()) throw Error("trailing characters in number: '" + s + "'");
  if (std::isinf(v)) throw Error("number out of range: '" + s + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Flat `key = value` file with `#` comments. Later keys override earlier ones.
/// Returns entries in file order; duplicates are kept so callers can decide.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

/// "rows cols v00 v01 ..." (row-major).
inline std::string format_matrix(const Matrix& m) {
  std::string s = std::to_string(m.rows()) + " " + std::to_string(m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) s += " " + fmt(m(i, j));
  return s;
}

inline Matrix parse_matrix(const std::string& s) {
  std::istringstream in(s);
  long rows = -1, cols = -1;
  in >> rows >> cols;
  if (!in || rows < 0 || cols < 0) throw Error("malformed matrix header: '" + s.substr(0, 40) + "'");
  Matrix m(rows, cols);
  std::string tok;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      if (!(in >> tok)) throw Error("matrix has fewer entries than its header declares");
      m(i, j) = parse_double(tok);
    }
  if (in >> tok) throw Error("matrix has more entries than its header declares");
  return m;
}

inline std::string format_vector(const Vector& v) {
  std::string s = std::to_string(v.size());
  for (Index i = 0; i < v.size(); ++i) s += " " + fmt(v(i));
  return s;
}

inline Vector parse_vector(const std::string& s) {
  std::istringstream in(s);
  long n = -1;
  in >> n;
  if (!in || n < 0) throw Error("malformed vector header");
  Vector v(n);
  std::string tok;
  for (Index i = 0; i < n; ++i) {
    if (!(in >> tok)) throw Error("vector has fewer entries than its header declares");
    v(i) = parse_double(tok);
  }
  if (in >> tok) throw Error("vector has more entries than its header declares");
  return v;
}

}  // namespace ssda::io

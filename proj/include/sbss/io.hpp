#pragma once

// CSV ingestion and emission. Input files carry a header row with coordinate
// columns named x,y[,z] followed by at least one value column; parse errors
// report path and line number. Numbers are written in shortest round-trip
// form so identical runs produce identical bytes.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "sbss/errors.hpp"
#include "sbss/sample.hpp"

namespace sbss {

struct LoadedSample {
  SpatialSample sample;
  std::vector<std::string> value_names;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    std::size_t b = f.find_first_not_of(" \t");
    std::size_t e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

inline double parse_csv_double(const std::string& token, const std::string& path,
                               std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ValidationError(path + ":" + std::to_string(line_no) + ": cannot parse '" + token +
                          "' in column " + column + " as a number");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace detail

inline LoadedSample read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ValidationError(path + ":1: file is empty");

  const std::vector<std::string> header = detail::split_csv_line(lines[0]);
  static const char* coord_names[3] = {"x", "y", "z"};
  std::size_t d = 0;
  while (d < header.size() && d < 3 && header[d] == coord_names[d]) ++d;
  if (d < 1) {
    throw ValidationError(path + ":1: header must start with coordinate columns x,y[,z]");
  }
  if (header.size() <= d) {
    throw ValidationError(path + ":1: no value columns after the coordinates");
  }
  const std::size_t cols = header.size();
  const std::size_t p = cols - d;

  const std::size_t n = lines.size() - 1;
  if (n < 2) throw ValidationError(path + ": need at least 2 data rows");
  Matrix coords(static_cast<Index>(n), static_cast<Index>(d));
  Matrix values(static_cast<Index>(n), static_cast<Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 2;
    const std::vector<std::string> fields = detail::split_csv_line(lines[i + 1]);
    if (fields.size() != cols) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(cols) + " fields, got " +
                            std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < d; ++c) {
      coords(static_cast<Index>(i), static_cast<Index>(c)) =
          detail::parse_csv_double(fields[c], path, line_no, header[c]);
    }
    for (std::size_t c = d; c < cols; ++c) {
      values(static_cast<Index>(i), static_cast<Index>(c - d)) =
          detail::parse_csv_double(fields[c], path, line_no, header[c]);
    }
  }

  LoadedSample out{SpatialSample{LocationSet(std::move(coords)), std::move(values)},
                   std::vector<std::string>(header.begin() + static_cast<std::ptrdiff_t>(d),
                                            header.end())};
  return out;
}

inline void write_csv(const std::string& path, const LocationSet& loc, const Matrix& values,
                      const std::vector<std::string>& value_names) {
  if (values.rows() != loc.n()) {
    throw ValidationError("write_csv: one value row per location required");
  }
  if (static_cast<Index>(value_names.size()) != values.cols()) {
    throw ValidationError("write_csv: one name per value column required");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path + ": cannot open file for writing");
  static const char* coord_names[3] = {"x", "y", "z"};
  for (int c = 0; c < loc.dim(); ++c) {
    if (c) out << ',';
    out << coord_names[c];
  }
  for (const auto& name : value_names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < loc.n(); ++i) {
    for (Index c = 0; c < loc.dim(); ++c) {
      if (c) out << ',';
      out << detail::format_double(loc.coords()(i, c));
    }
    for (Index c = 0; c < values.cols(); ++c) {
      out << ',' << detail::format_double(values(i, c));
    }
    out << '\n';
  }
  if (!out) throw ValidationError(path + ": write failed");
}

inline void write_csv(const std::string& path, const SpatialSample& sample,
                      std::vector<std::string> value_names = {}) {
  if (value_names.empty()) {
    for (Index c = 0; c < sample.p(); ++c) value_names.push_back("v" + std::to_string(c + 1));
  }
  write_csv(path, sample.loc, sample.values, value_names);
}

// Latent components labeled IC.1..IC.p in descending pseudo-eigenvalue order.
inline void write_latent_csv(const std::string& path, const LocationSet& loc,
                             const Matrix& latent) {
  std::vector<std::string> names;
  for (Index c = 0; c < latent.cols(); ++c) names.push_back("IC." + std::to_string(c + 1));
  write_csv(path, loc, latent, names);
}

}  // namespace sbss

#pragma once

// Labeled datasets, their CSV form (header "y,x0,...,x{D-1}") and seeded
// synthetic Gaussian-blob generators in the unit square.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "altpgd/errors.hpp"
#include "altpgd/losses.hpp"
#include "altpgd/rng.hpp"

namespace altpgd {

struct LabeledExample {
  Vector x;
  std::size_t y = 0;
};

struct Dataset {
  std::string name;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  void validate() const {
    if (dim == 0) throw ShapeError("dataset dimension must be positive");
    if (classes < 2) throw ShapeError("dataset needs at least 2 classes");
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].x.size() != dim)
        throw ShapeError("example " + std::to_string(i) + " has wrong dimension");
      if (examples[i].y >= classes)
        throw RangeError("example " + std::to_string(i) + " label out of range");
    }
  }

  Dataset subset(std::size_t first, std::size_t count) const {
    Dataset out{name, dim, classes, {}};
    const std::size_t end = std::min(examples.size(), first + count);
    for (std::size_t i = first; i < end; ++i) out.examples.push_back(examples[i]);
    return out;
  }
};

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  os << 'y';
  for (std::size_t j = 0; j < ds.dim; ++j) os << ",x" << j;
  os << '\n';
  for (const auto& ex : ds.examples) {
    os << ex.y;
    for (double v : ex.x) os << ',' << format_real(v);
    os << '\n';
  }
}

inline void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_dataset_csv(os, ds);
  if (!os) throw Error("failed writing " + path.string());
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view s, std::size_t line) {
  s = trim(s);
  // strtod accepts the full decimal/exponent syntax across libstdc++ versions
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size())
    throw FormatError("line " + std::to_string(line) + ": bad number '" + tmp + "'");
  return v;
}

}  // namespace detail

/// Reads the CSV form. The class count is max(y)+1 unless `classes` is given.
inline Dataset read_dataset_csv(std::istream& is, std::string name = "dataset",
                                std::size_t classes = 0) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty dataset file");
  const auto header = detail::split_commas(line);
  if (header.size() < 2 || detail::trim(header[0]) != "y")
    throw FormatError("dataset header must start with 'y,x0'");
  for (std::size_t j = 1; j < header.size(); ++j)
    if (detail::trim(header[j]) != "x" + std::to_string(j - 1))
      throw FormatError("unexpected header column '" + std::string(header[j]) + "'");

  Dataset ds;
  ds.name = std::move(name);
  ds.dim = header.size() - 1;
  std::size_t max_label = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " columns");
    LabeledExample ex;
    const auto ycell = detail::trim(cells[0]);
    std::size_t y = 0;
    const auto [ptr, ec] = std::from_chars(ycell.data(), ycell.data() + ycell.size(), y);
    if (ec != std::errc{} || ptr != ycell.data() + ycell.size())
      throw FormatError("line " + std::to_string(lineno) + ": bad label");
    ex.y = y;
    ex.x.reserve(ds.dim);
    for (std::size_t j = 1; j < cells.size(); ++j) ex.x.push_back(detail::parse_real(cells[j], lineno));
    max_label = std::max(max_label, y);
    ds.examples.push_back(std::move(ex));
  }
  ds.classes = classes ? classes : std::max<std::size_t>(2, max_label + 1);
  ds.validate();
  return ds;
}

inline Dataset load_dataset_csv(const std::filesystem::path& path, std::size_t classes = 0) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  return read_dataset_csv(is, path.stem().string(), classes);
}

/// Isotropic Gaussian blobs, `per_class` points around each center, clipped to [0,1]^D.
/// Examples are interleaved by class (0,1,...,C-1,0,1,...).
inline Dataset make_blobs(const std::vector<Vector>& centers, double stddev, std::size_t per_class,
                          std::uint64_t seed, std::string name = "blobs") {
  if (centers.size() < 2) throw ConfigError("need at least two blob centers");
  Dataset ds;
  ds.name = std::move(name);
  ds.dim = centers.front().size();
  ds.classes = centers.size();
  Rng rng(seed);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < centers.size(); ++c) {
      LabeledExample ex;
      ex.y = c;
      for (double mu : centers[c]) ex.x.push_back(std::clamp(mu + stddev * normal01(rng), 0.0, 1.0));
      ds.examples.push_back(std::move(ex));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace altpgd

#pragma once

// Tabular data: delimited text ingestion and the in-memory FeatureTable.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "pairwhite/error.hpp"

namespace pairwhite {

using Index = Eigen::Index;

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

// Raw delimited table: header plus string cells stored column-major.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, delim)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && (line.back() == delim)) out.emplace_back();
  return out;
}

inline bool is_missing(const std::string& cell) {
  std::string_view v(cell);
  while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
  while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
  return v.empty() || v == "NA" || v == "NaN" || v == "nan" || v == "null";
}

}  // namespace detail

// Rejects ragged rows, duplicate header names and missing values.
inline CsvTable read_csv(std::istream& in, char delim = ',') {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("table is empty: no header row");
  t.header = detail::split_line(line, delim);
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : t.header) {
      if (h.empty()) throw DataError("table header contains an empty column name");
      if (!seen.insert(h).second)
        throw DataError("table header repeats column '" + h + "'");
    }
  }
  t.columns.assign(t.header.size(), {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_line(line, delim);
    if (cells.size() != t.header.size()) {
      std::ostringstream os;
      os << "line " << line_no << ": expected " << t.header.size()
         << " cells, found " << cells.size();
      throw DataError(os.str());
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (detail::is_missing(cells[j])) {
        std::ostringstream os;
        os << "line " << line_no << ": missing value in column '" << t.header[j]
           << "' (missing values are not supported)";
        throw DataError(os.str());
      }
      t.columns[j].push_back(std::move(cells[j]));
    }
  }
  return t;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open table '" + path.string() + "'");
  const char delim = path.extension() == ".tsv" ? '\t' : ',';
  try {
    return read_csv(in, delim);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct Covariate {
  std::string name;
  std::vector<std::string> values;

  friend bool operator==(const Covariate&, const Covariate&) = default;
};

// n subjects x d named feature columns, binary labels, and the non-feature
// covariate columns (confounds) kept as raw text.
struct FeatureTable {
  std::string label_name = "label";
  std::vector<int> labels;
  std::vector<Covariate> covariates;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd features;

  Index rows() const { return features.rows(); }
  Index dims() const { return features.cols(); }

  const Covariate& covariate(std::string_view name) const {
    for (const auto& c : covariates)
      if (c.name == name) return c;
    throw ConfigError("unknown covariate column '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    if (name == label_name) return true;
    for (const auto& c : covariates)
      if (c.name == name) return true;
    return std::find(feature_names.begin(), feature_names.end(), name) !=
           feature_names.end();
  }

  // Covariate parsed as numbers; the label column is accepted as well.
  Eigen::VectorXd numeric(std::string_view name) const {
    Eigen::VectorXd v(rows());
    if (name == label_name) {
      for (Index i = 0; i < rows(); ++i) v[i] = labels[static_cast<std::size_t>(i)];
      return v;
    }
    const auto& c = covariate(name);
    for (Index i = 0; i < rows(); ++i) {
      auto x = parse_double(c.values[static_cast<std::size_t>(i)]);
      if (!x || !std::isfinite(*x))
        throw DataError("column '" + c.name + "' row " + std::to_string(i + 1) +
                        ": '" + c.values[static_cast<std::size_t>(i)] +
                        "' is not a finite number");
      v[i] = *x;
    }
    return v;
  }

  FeatureTable take_rows(const std::vector<Index>& idx) const {
    FeatureTable out;
    out.label_name = label_name;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Index>(idx.size()), dims());
    out.labels.reserve(idx.size());
    for (const auto& c : covariates) out.covariates.push_back({c.name, {}});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Index i = idx[k];
      out.features.row(static_cast<Index>(k)) = features.row(i);
      out.labels.push_back(labels[static_cast<std::size_t>(i)]);
      for (std::size_t c = 0; c < covariates.size(); ++c)
        out.covariates[c].values.push_back(
            covariates[c].values[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  friend bool operator==(const FeatureTable& a, const FeatureTable& b) {
    return a.label_name == b.label_name && a.labels == b.labels &&
           a.covariates == b.covariates && a.feature_names == b.feature_names &&
           a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features;
  }
};

// Splits a raw table into label, named covariates and features. Every
// column that is neither the label nor a covariate becomes a feature.
inline FeatureTable to_feature_table(const CsvTable& raw, const std::string& label,
                                     const std::vector<std::string>& covariates) {
  FeatureTable t;
  t.label_name = label;
  auto li = raw.find(label);
  if (!li) throw ConfigError("label column '" + label + "' not found in table");
  std::unordered_set<std::string> non_feature{label};
  for (const auto& c : covariates) {
    auto ci = raw.find(c);
    if (!ci) throw ConfigError("covariate column '" + c + "' not found in table");
    if (!non_feature.insert(c).second)
      throw ConfigError("column '" + c + "' listed twice");
    t.covariates.push_back({c, raw.columns[*ci]});
  }
  const auto n = raw.rows();
  for (std::size_t i = 0; i < n; ++i) {
    auto v = parse_double(raw.columns[*li][i]);
    if (!v || (*v != 0.0 && *v != 1.0))
      throw DataError("label column '" + label + "' row " + std::to_string(i + 1) +
                      ": '" + raw.columns[*li][i] + "' is not 0 or 1");
    t.labels.push_back(static_cast<int>(*v));
  }
  std::vector<std::size_t> feat_cols;
  for (std::size_t j = 0; j < raw.header.size(); ++j)
    if (!non_feature.count(raw.header[j])) feat_cols.push_back(j);
  t.features.resize(static_cast<Index>(n), static_cast<Index>(feat_cols.size()));
  for (std::size_t k = 0; k < feat_cols.size(); ++k) {
    const auto j = feat_cols[k];
    t.feature_names.push_back(raw.header[j]);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = parse_double(raw.columns[j][i]);
      if (!v || !std::isfinite(*v))
        throw DataError("feature column '" + raw.header[j] + "' row " +
                        std::to_string(i + 1) + ": '" + raw.columns[j][i] +
                        "' is not a finite number");
      t.features(static_cast<Index>(i), static_cast<Index>(k)) = *v;
    }
  }
  return t;
}

// Column order: label, covariates, features.
inline void write_feature_table(std::ostream& out, const FeatureTable& t,
                                char delim = ',') {
  out << t.label_name;
  for (const auto& c : t.covariates) out << delim << c.name;
  for (const auto& f : t.feature_names) out << delim << f;
  out << '\n';
  for (Index i = 0; i < t.rows(); ++i) {
    out << t.labels[static_cast<std::size_t>(i)];
    for (const auto& c : t.covariates) out << delim << c.values[static_cast<std::size_t>(i)];
    for (Index j = 0; j < t.dims(); ++j) out << delim << format_double(t.features(i, j));
    out << '\n';
  }
}

inline FeatureTable read_feature_table(std::istream& in, const std::string& label,
                                       const std::vector<std::string>& covariates,
                                       char delim = ',') {
  return to_feature_table(read_csv(in, delim), label, covariates);
}

}  // namespace pairwhite

#pragma once

// Run configuration document (JSON). Relative paths are resolved against the
// directory holding the config file.
//
//   {
//     "table": "cohort.csv",
//     "label": "label",
//     "confounds": {"continuous": ["age"], "categorical": ["sex", "site"],
//                   "protected": ["label"]},
//     "manifest": "pairs.json",            // or "naming": {...}
//     "alpha": {"left-right": 0.3, "gm-csf": 1.0},
//     "folds": 10, "inner_folds": 5,
//     "c_grid": [0.001, 0.01, 0.1, 1, 10],
//     "seed": 0, "out": "results", "baseline": true, "top_k": 7,
//     "t_test": "paired",
//     "correlation_regions": ["Amygdala", "Hippocampus"]
//   }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/cv.hpp"
#include "pairwhite/error.hpp"
#include "pairwhite/manifest.hpp"
#include "pairwhite/preprocess.hpp"
#include "pairwhite/stats.hpp"

namespace pairwhite {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path table;
  std::string label = "label";
  ConfoundSpec confounds{{"age"}, {"sex", "site"}, {"label"}};
  std::optional<fs::path> manifest;
  NamingConvention naming;
  std::map<std::string, double> alpha_overrides;
  int folds = 10;
  int inner_folds = 5;
  std::vector<double> c_grid = default_c_grid();
  std::uint64_t seed = 0;
  fs::path out = "results";
  bool baseline = true;
  std::size_t top_k = 7;
  TTestMode t_test = TTestMode::paired;
  std::vector<std::string> correlation_regions{"Amygdala", "Hippocampus", "Putamen",
                                               "AnteriorCingulateGyrus"};

  // Non-feature columns of the table: label plus every confound.
  std::vector<std::string> covariate_columns() const {
    std::vector<std::string> out;
    for (const auto* g : {&confounds.continuous, &confounds.categorical, &confounds.protected_columns})
      for (const auto& c : *g)
        if (c != label && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    return out;
  }

  void validate() const {
    if (table.empty()) throw ConfigError("config: 'table' is required");
    if (!fs::exists(table)) throw ConfigError("config: table '" + table.string() + "' does not exist");
    if (manifest && !fs::exists(*manifest))
      throw ConfigError("config: manifest '" + manifest->string() + "' does not exist");
    if (folds < 2) throw ConfigError("config: folds must be at least 2");
    if (inner_folds < 2) throw ConfigError("config: inner_folds must be at least 2");
    check_c_grid(c_grid);
    for (const auto& [label, a] : alpha_overrides) check_alpha(a);
    if (top_k == 0) throw ConfigError("config: top_k must be positive");
  }
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

inline NamingConvention naming_from_json(const nlohmann::json& j) {
  NamingConvention n;
  if (!j.is_object()) throw ConfigError("config: 'naming' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "left_prefix") n.left_prefix = json_get<std::string>(v, k);
    else if (k == "right_prefix") n.right_prefix = json_get<std::string>(v, k);
    else if (k == "gm_suffix") n.gm_suffix = json_get<std::string>(v, k);
    else if (k == "csf_suffix") n.csf_suffix = json_get<std::string>(v, k);
    else if (k == "left_right_label") n.left_right_label = json_get<std::string>(v, k);
    else if (k == "gm_csf_label") n.gm_csf_label = json_get<std::string>(v, k);
    else if (k == "alpha_left_right") n.alpha_left_right = json_get<double>(v, k);
    else if (k == "alpha_gm_csf") n.alpha_gm_csf = json_get<double>(v, k);
    else throw ConfigError("config: unknown naming key '" + k + "'");
  }
  check_alpha(n.alpha_left_right);
  check_alpha(n.alpha_gm_csf);
  return n;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text, const fs::path& base_dir = {}) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  RunConfig c;
  bool have_manifest = false, have_naming = false;
  for (const auto& [k, v] : j.items()) {
    if (k == "table") c.table = resolve(detail::json_get<std::string>(v, k));
    else if (k == "label") c.label = detail::json_get<std::string>(v, k);
    else if (k == "confounds") {
      if (!v.is_object()) throw ConfigError("config: 'confounds' must be an object");
      ConfoundSpec s;
      for (const auto& [ck, cv] : v.items()) {
        auto names = detail::json_get<std::vector<std::string>>(cv, ck);
        if (ck == "continuous") s.continuous = names;
        else if (ck == "categorical") s.categorical = names;
        else if (ck == "protected") s.protected_columns = names;
        else throw ConfigError("config: unknown confounds key '" + ck + "'");
      }
      c.confounds = s;
    } else if (k == "manifest") {
      c.manifest = resolve(detail::json_get<std::string>(v, k));
      have_manifest = true;
    } else if (k == "naming") {
      c.naming = detail::naming_from_json(v);
      have_naming = true;
    } else if (k == "alpha") c.alpha_overrides = detail::json_get<std::map<std::string, double>>(v, k);
    else if (k == "folds") c.folds = detail::json_get<int>(v, k);
    else if (k == "inner_folds") c.inner_folds = detail::json_get<int>(v, k);
    else if (k == "c_grid") c.c_grid = detail::json_get<std::vector<double>>(v, k);
    else if (k == "seed") c.seed = detail::json_get<std::uint64_t>(v, k);
    else if (k == "out") c.out = resolve(detail::json_get<std::string>(v, k));
    else if (k == "baseline") c.baseline = detail::json_get<bool>(v, k);
    else if (k == "top_k") c.top_k = detail::json_get<std::size_t>(v, k);
    else if (k == "t_test") {
      const auto m = detail::json_get<std::string>(v, k);
      if (m == "paired") c.t_test = TTestMode::paired;
      else if (m == "two-sample") c.t_test = TTestMode::two_sample;
      else throw ConfigError("config: t_test must be 'paired' or 'two-sample'");
    } else if (k == "correlation_regions")
      c.correlation_regions = detail::json_get<std::vector<std::string>>(v, k);
    else throw ConfigError("config: unknown key '" + k + "'");
  }
  if (have_manifest && have_naming)
    throw ConfigError("config: give either 'manifest' or 'naming', not both");
  return c;
}

inline std::string read_text_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

}  // namespace pairwhite

#pragma once

// Implementations behind the `pairwhite` subcommands.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/config.hpp"
#include "pairwhite/cv.hpp"
#include "pairwhite/manifest.hpp"
#include "pairwhite/synth.hpp"
#include "pairwhite/table.hpp"
#include "pairwhite/whitener.hpp"

namespace pairwhite {

// Owns an output directory for one command: holds a lock file while running
// and deletes everything written if the command does not commit.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    lock_ = dir_ / ".pairwhite.lock";
    std::FILE* f = std::fopen(lock_.c_str(), "wx");
    if (!f)
      throw DataError("output directory '" + dir_.string() +
                      "' is locked by another run (remove " + lock_.string() + " if stale)");
    std::fclose(f);
  }

  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    std::error_code ec;
    if (!committed_)
      for (const auto& p : written_) fs::remove(p, ec);
    fs::remove(lock_, ec);
  }

  const fs::path& path() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    written_.push_back(p);
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw DataError("failed writing '" + p.string() + "'");
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  fs::path lock_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// "76.39 ± 3.88" from fractions.
inline std::string percent_mean_std(const MeanStd& m) {
  return fixed(100.0 * m.mean, 2) + " ± " + fixed(100.0 * m.std, 2);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out = "cohort";
};

inline void cmd_synth(const SynthArgs& args, std::ostream& log = std::cout) {
  CohortSpec spec = default_bd_like_spec();
  if (args.config) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(*args.config));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("malformed cohort spec: ") + e.what());
    }
    spec = spec_from_json(j, spec);
  }
  if (args.seed) spec.seed = *args.seed;
  spec.validate();
  const auto cohort = generate(spec);

  OutputDir out(args.out);
  std::ostringstream table;
  write_feature_table(table, cohort.table);
  out.write("cohort.csv", table.str());
  out.write("ground_truth.json", cohort.truth.to_json(spec).dump(2) + "\n");
  out.commit();
  log << "wrote " << cohort.table.rows() << " subjects x " << cohort.table.dims()
      << " features to " << (args.out / "cohort.csv").string() << "\n";
}

// ---------------------------------------------------------------- run

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<bool> baseline;
  std::optional<int> folds;
  std::optional<double> alpha_lr;
  std::optional<double> alpha_gmcsf;
};

inline void apply_overrides(RunConfig& c, const RunOverrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.baseline) c.baseline = *o.baseline;
  if (o.folds) c.folds = *o.folds;
  if (o.alpha_lr) c.alpha_overrides[c.naming.left_right_label] = *o.alpha_lr;
  if (o.alpha_gmcsf) c.alpha_overrides[c.naming.gm_csf_label] = *o.alpha_gmcsf;
}

struct LoadedManifest {
  PairManifest manifest;
  std::vector<UnpairedFeature> unpaired;
};

inline LoadedManifest resolve_manifest(const RunConfig& c, const std::vector<std::string>& names) {
  LoadedManifest lm;
  if (c.manifest) {
    lm.manifest = parse_manifest(read_text_file(*c.manifest), names);
  } else {
    auto d = derive_manifest_from_naming(names, c.naming);
    lm.manifest = std::move(d.manifest);
    lm.unpaired = std::move(d.unpaired);
  }
  for (const auto& [label, alpha] : c.alpha_overrides) lm.manifest = lm.manifest.with_alpha(label, alpha);
  return lm;
}

namespace detail {

inline double column_corr(const Eigen::MatrixXd& x, Index a, Index b) {
  double sa = 0, sb = 0, r = 0;
  pair_moments(x, a, b, sa, sb, r);
  return r;
}

inline std::string weights_tsv(const TopWeights& top) {
  std::ostringstream os;
  os << "rank\tfeature\tmean\tstd\tweight\n";
  for (std::size_t i = 0; i < top.rows.size(); ++i) {
    const auto& r = top.rows[i];
    os << i + 1 << '\t' << r.feature << '\t' << format_double(r.mean) << '\t'
       << format_double(r.std) << '\t' << fixed(r.mean, 3) << " ± " << fixed(r.std, 3)
       << '\n';
  }
  return os.str();
}

inline std::string matrix_tsv(const std::vector<std::string>& names, const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << "feature";
  for (const auto& n : names) os << '\t' << n;
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    os << names[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) os << '\t' << format_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = c.transpose() * c;
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  for (Index i = 0; i < cov.rows(); ++i)
    for (Index j = 0; j < cov.cols(); ++j) cov(i, j) /= sd[i] * sd[j];
  return cov;
}

}  // namespace detail

struct RunOutcome {
  CvReport whitened;
  std::optional<CvReport> baseline;
  std::vector<PairedTestResult> tests;
};

inline RunOutcome cmd_run(RunConfig cfg, std::ostream& log = std::cout) {
  cfg.validate();
  const auto raw = read_csv_file(cfg.table);
  const auto table = to_feature_table(raw, cfg.label, cfg.covariate_columns());
  cfg.confounds.validate(table);
  const auto lm = resolve_manifest(cfg, table.feature_names);
  const auto folds = stratified_kfold(table.labels, cfg.folds, cfg.seed);

  PipelineOptions opt;
  opt.confounds = cfg.confounds;
  opt.c_grid = cfg.c_grid;
  opt.inner_folds = cfg.inner_folds;

  OutputDir out(cfg.out);
  RunOutcome res{run_pipeline(table, lm.manifest, opt, folds), std::nullopt, {}};
  log << "whitened arm: ROC-AUC " << percent_mean_std(mean_std(res.whitened.metric("roc_auc")))
      << "\n";
  if (cfg.baseline) {
    res.baseline = run_pipeline(table, std::nullopt, opt, folds);
    log << "baseline arm: ROC-AUC " << percent_mean_std(mean_std(res.baseline->metric("roc_auc")))
        << "\n";
    for (const char* m : {"roc_auc", "balanced_accuracy"})
      res.tests.push_back(compare_arms(res.whitened, *res.baseline, m, cfg.t_test));
  }

  out.write("manifest.json", serialize_manifest(lm.manifest));
  {
    std::ostringstream os;
    os << "feature\tno_left_right_partner\tno_gm_csf_partner\n";
    for (const auto& u : lm.unpaired)
      os << u.name << '\t' << u.no_left_right_partner << '\t' << u.no_gm_csf_partner << '\n';
    out.write("unpaired.tsv", os.str());
  }
  {
    std::ostringstream os;
    os << "row\tfold\n";
    for (std::size_t i = 0; i < folds.fold.size(); ++i) os << i << '\t' << folds.fold[i] + 1 << '\n';
    out.write("folds.tsv", os.str());
  }
  out.write("report_whitened.json", report_to_json(res.whitened).dump(1) + "\n");
  out.write("top_weights_whitened.tsv", detail::weights_tsv(top_k_weights(res.whitened, cfg.top_k)));
  if (res.baseline) {
    out.write("report_baseline.json", report_to_json(*res.baseline).dump(1) + "\n");
    out.write("top_weights_baseline.tsv",
              detail::weights_tsv(top_k_weights(*res.baseline, cfg.top_k)));
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : res.tests) jt.push_back(test_to_json(t));
    out.write("paired_tests.json", jt.dump(2) + "\n");
  }

  // Training-set correlations of every declared pair, before whitening and
  // at the whitener output, for every fold.
  {
    std::ostringstream os;
    os << "fold\tstage\talpha\tfirst\tsecond\tr_before\tr_stage_input\tr_after\n";
    for (const auto& fr : res.whitened.fold_results) {
      const auto train = table.take_rows(folds.train_rows(fr.fold));
      const Eigen::MatrixXd x = fr.fit.scaler.transform(fr.fit.residualizer.apply(train));
      const Eigen::MatrixXd z = fr.fit.whitener->transform(x);
      const auto& stages = fr.fit.whitener->stages();
      for (std::size_t s = 0; s < stages.size(); ++s)
        for (const auto& p : stages[s].pairs)
          os << fr.fold + 1 << '\t' << stages[s].label << '\t' << format_double(stages[s].alpha)
             << '\t' << table.feature_names[static_cast<std::size_t>(p.first)] << '\t'
             << table.feature_names[static_cast<std::size_t>(p.second)] << '\t'
             << format_double(detail::column_corr(x, p.first, p.second)) << '\t'
             << format_double(p.r) << '\t'
             << format_double(detail::column_corr(z, p.first, p.second)) << '\n';
    }
    out.write("pair_correlations.tsv", os.str());
  }

  // First-fold correlation matrices for the selected regions.
  {
    const auto& fr = res.whitened.fold_results.front();
    std::vector<Index> cols;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < table.feature_names.size(); ++j)
      for (const auto& r : cfg.correlation_regions)
        if (table.feature_names[j].find("_" + r + "_") != std::string::npos) {
          cols.push_back(static_cast<Index>(j));
          names.push_back(table.feature_names[j]);
          break;
        }
    if (!cols.empty()) {
      const auto train = table.take_rows(folds.train_rows(0));
      const Eigen::MatrixXd x = fr.fit.scaler.transform(fr.fit.residualizer.apply(train));
      const Eigen::MatrixXd z = fr.fit.whitener->transform(x);
      Eigen::MatrixXd xs(x.rows(), static_cast<Index>(cols.size())), zs(z.rows(), xs.cols());
      for (std::size_t k = 0; k < cols.size(); ++k) {
        xs.col(static_cast<Index>(k)) = x.col(cols[k]);
        zs.col(static_cast<Index>(k)) = z.col(cols[k]);
      }
      out.write("correlation_before.tsv", detail::matrix_tsv(names, detail::correlation_matrix(xs)));
      out.write("correlation_after.tsv", detail::matrix_tsv(names, detail::correlation_matrix(zs)));
    }
    out.write("whitener_fold1.json", fr.fit.whitener->to_json().dump(1) + "\n");
  }

  nlohmann::json run = {{"table", cfg.table.string()},
                        {"seed", cfg.seed},
                        {"folds", cfg.folds},
                        {"inner_folds", cfg.inner_folds},
                        {"c_grid", cfg.c_grid},
                        {"baseline", cfg.baseline},
                        {"top_k", cfg.top_k},
                        {"t_test", cfg.t_test == TTestMode::paired ? "paired" : "two-sample"},
                        {"manifest_hash", manifest_hash(lm.manifest)}};
  out.write("run.json", run.dump(2) + "\n");
  out.commit();
  log << "results written to " << cfg.out.string() << "\n";
  return res;
}

// ---------------------------------------------------------------- report

inline std::string render_report(const fs::path& dir) {
  const std::vector<std::string> expected{"report_whitened.json", "report_baseline.json",
                                          "paired_tests.json"};
  if (!fs::exists(dir / "report_whitened.json") && !fs::exists(dir / "report_baseline.json")) {
    std::ostringstream os;
    os << "no results found in '" << dir.string() << "'; expected files:";
    for (const auto& e : expected) os << " " << e;
    throw DataError(os.str());
  }
  auto load = [&](const std::string& name) -> std::optional<nlohmann::json> {
    if (!fs::exists(dir / name)) return std::nullopt;
    try {
      return nlohmann::json::parse(read_text_file(dir / name));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt results file '" + (dir / name).string() + "': " + e.what());
    }
  };

  std::ostringstream os;
  struct Arm {
    std::string title;
    nlohmann::json j;
  };
  std::vector<Arm> arms;
  if (auto j = load("report_baseline.json")) arms.push_back({"Original", *j});
  if (auto j = load("report_whitened.json")) arms.push_back({"Whitened", *j});

  try {
    const auto k = arms.front().j.at("folds").at("k").get<int>();
    os << "Classification performance (%, mean ± std across " << k << " CV folds)\n";
    os << std::left << std::setw(10) << "" << std::setw(18) << "ROC-AUC" << "BAcc\n";
    for (const auto& a : arms) {
      std::vector<double> auc, bacc;
      for (const auto& f : a.j.at("per_fold")) {
        auc.push_back(f.at("roc_auc").get<double>());
        bacc.push_back(f.at("balanced_accuracy").get<double>());
      }
      os << std::left << std::setw(10) << a.title << std::setw(18)
         << percent_mean_std(mean_std(auc)) << percent_mean_std(mean_std(bacc)) << "\n";
    }

    os << "\nSelected C per fold\n";
    for (const auto& a : arms) {
      std::map<double, int> counts;
      for (const auto& f : a.j.at("per_fold")) counts[f.at("selected_C").get<double>()]++;
      os << std::left << std::setw(10) << a.title;
      bool first = true;
      for (const auto& [c, n] : counts) {
        os << (first ? "" : ", ") << "C=" << format_double(c) << " x" << n;
        first = false;
      }
      os << "\n";
    }

    if (auto tests = load("paired_tests.json")) {
      os << "\nWhitened vs. original across folds\n";
      for (const auto& t : *tests) {
        const auto metric = t.at("metric").get<std::string>();
        os << std::left << std::setw(19) << (metric == "roc_auc" ? "ROC-AUC" : "BAcc")
           << t.at("mode").get<std::string>() << " t(" << format_double(t.at("df").get<double>())
           << ") = " << fixed(t.at("t").get<double>(), 3)
           << ", p = " << fixed(t.at("p").get<double>(), 4) << ": "
           << t.at("conclusion").get<std::string>() << "\n";
      }
    }

    for (const auto& a : arms) {
      const auto names = a.j.at("features").get<std::vector<std::string>>();
      const auto mean = a.j.at("weights").at("mean").get<std::vector<double>>();
      const auto sd = a.j.at("weights").at("std").get<std::vector<double>>();
      const auto top = top_k_weights(names, Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size())),
                                     Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Index>(sd.size())), 7);
      os << "\nTop " << top.rows.size() << " features, " << a.title
         << " (feature-space weight, mean ± std)\n";
      for (const auto& r : top.rows)
        os << "  " << std::left << std::setw(36) << r.feature << std::right
           << (r.mean < 0 ? "" : " ") << fixed(r.mean, 3) << " ± " << fixed(r.std, 3) << "\n";
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt results in '" + dir.string() + "': " + e.what());
  }
  return os.str();
}

inline std::string cmd_report(const fs::path& dir, std::ostream& log = std::cout) {
  const auto text = render_report(dir);
  {
    std::ofstream out(dir / "summary.txt", std::ios::binary);
    out << text;
    if (!out) throw DataError("failed writing summary.txt");
  }
  log << text;
  return text;
}

// ---------------------------------------------------------------- whiten

struct WhitenFitArgs {
  fs::path table;
  std::optional<fs::path> manifest;
  std::vector<std::string> non_features{"label", "age", "sex", "site"};
  bool standardize = false;
  std::optional<double> alpha_lr;
  std::optional<double> alpha_gmcsf;
  fs::path out = "whitener.json";
};

inline std::vector<std::size_t> feature_columns(const CsvTable& raw,
                                                const std::vector<std::string>& non_features) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < raw.header.size(); ++j)
    if (std::find(non_features.begin(), non_features.end(), raw.header[j]) == non_features.end())
      cols.push_back(j);
  return cols;
}

inline Eigen::MatrixXd numeric_block(const CsvTable& raw, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd x(static_cast<Index>(raw.rows()), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (std::size_t i = 0; i < raw.rows(); ++i) {
      auto v = parse_double(raw.columns[cols[k]][i]);
      if (!v || !std::isfinite(*v))
        throw DataError("column '" + raw.header[cols[k]] + "' row " + std::to_string(i + 1) +
                        " is not a finite number");
      x(static_cast<Index>(i), static_cast<Index>(k)) = *v;
    }
  return x;
}

inline void cmd_whiten_fit(const WhitenFitArgs& args, std::ostream& log = std::cout) {
  const auto raw = read_csv_file(args.table);
  const auto cols = feature_columns(raw, args.non_features);
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(raw.header[c]);
  Eigen::MatrixXd x = numeric_block(raw, cols);

  RunConfig c;
  c.manifest = args.manifest;
  if (args.alpha_lr) c.alpha_overrides[c.naming.left_right_label] = *args.alpha_lr;
  if (args.alpha_gmcsf) c.alpha_overrides[c.naming.gm_csf_label] = *args.alpha_gmcsf;
  const auto lm = resolve_manifest(c, names);

  nlohmann::json artifact = {{"format", "pairwhite-whiten-artifact"}, {"version", 1}, {"features", names}};
  if (args.standardize) {
    const auto sc = fit_scaler(x, names);
    x = sc.transform(x);
    const auto& m = sc.mean();
    const auto& s = sc.stddev();
    artifact["input_scaler"] = {{"mean", std::vector<double>(m.data(), m.data() + m.size())},
                                {"std", std::vector<double>(s.data(), s.data() + s.size())}};
  } else {
    artifact["input_scaler"] = nullptr;
  }
  const auto w = fit_whitener(x, lm.manifest);
  artifact["whitener"] = w.to_json();
  std::ofstream out(args.out, std::ios::binary);
  out << artifact.dump(1) << "\n";
  if (!out) throw DataError("failed writing '" + args.out.string() + "'");
  log << "fitted " << lm.manifest.pair_count() << " pairs over " << names.size()
      << " features -> " << args.out.string() << "\n";
}

inline void cmd_whiten_apply(const fs::path& table, const fs::path& artifact_path,
                             const fs::path& out_path, std::ostream& log = std::cout) {
  nlohmann::json a;
  try {
    a = nlohmann::json::parse(read_text_file(artifact_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed whiten artifact: ") + e.what());
  }
  if (!a.is_object() || a.value("format", "") != "pairwhite-whiten-artifact" || a.value("version", 0) != 1)
    throw ConfigError("'" + artifact_path.string() + "' is not a version-1 whiten artifact");
  const auto names = a.at("features").get<std::vector<std::string>>();
  const auto w = FittedWhitener::from_json(a.at("whitener"));
  if (w.dims() != static_cast<Index>(names.size()))
    throw ConfigError("whiten artifact: feature list does not match whitener size");

  auto raw = read_csv_file(table);
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto j = raw.find(n);
    if (!j) throw DataError("table lacks feature column '" + n + "'");
    cols.push_back(*j);
  }
  Eigen::MatrixXd x = numeric_block(raw, cols);
  if (!a.at("input_scaler").is_null()) {
    auto m = a.at("input_scaler").at("mean").get<std::vector<double>>();
    auto s = a.at("input_scaler").at("std").get<std::vector<double>>();
    const auto d = static_cast<Index>(names.size());
    x = FittedScaler::from_stats(Eigen::Map<Eigen::RowVectorXd>(m.data(), d),
                                 Eigen::Map<Eigen::RowVectorXd>(s.data(), d))
            .transform(x);
  }
  const Eigen::MatrixXd z = w.transform(x);
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (std::size_t i = 0; i < raw.rows(); ++i)
      raw.columns[cols[k]][i] = format_double(z(static_cast<Index>(i), static_cast<Index>(k)));

  std::ofstream out(out_path, std::ios::binary);
  const char delim = out_path.extension() == ".tsv" ? '\t' : ',';
  for (std::size_t j = 0; j < raw.header.size(); ++j) out << (j ? std::string(1, delim) : "") << raw.header[j];
  out << '\n';
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < raw.header.size(); ++j)
      out << (j ? std::string(1, delim) : "") << raw.columns[j][i];
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + out_path.string() + "'");
  log << "whitened " << raw.rows() << " rows -> " << out_path.string() << "\n";
}

}  // namespace pairwhite

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "pairwhite/commands.hpp"

using namespace pairwhite;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pairwhite_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Runs the CLI binary; returns its exit status.
int cli(const std::string& args) {
  const char* exe = std::getenv("PAIRWHITE_CLI");
  if (!exe) return -1;
  const int rc = std::system((std::string(exe) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kSmallSpec = R"({"n_subjects": 150, "region_names": ["Amygdala", "Hippocampus", "Putamen"],
  "site_count": 3, "site_offsets": [-0.2, 0, 0.2],
  "effects": [{"column": "L_Hippocampus_GM", "shift": -0.9}], "seed": 5})";

// Writes a small cohort and a matching run config under `dir`.
fs::path small_run(const fs::path& dir, const std::string& extra = "") {
  write_file(dir / "spec.json", kSmallSpec);
  SynthArgs s;
  s.config = dir / "spec.json";
  s.out = dir / "cohort";
  std::ostringstream log;
  cmd_synth(s, log);
  write_file(dir / "run.json", R"({"table": "cohort/cohort.csv", "folds": 3, "inner_folds": 3,
    "c_grid": [0.01, 1], "out": "results", "correlation_regions": ["Amygdala"])" + extra + "}");
  return dir / "run.json";
}

}  // namespace

TEST(Config, ParsesAndResolvesPaths) {
  const auto c = parse_run_config(R"({"table": "t.csv", "folds": 5, "t_test": "two-sample",
      "alpha": {"left-right": 0.5}})", "/data");
  EXPECT_EQ(c.table, fs::path("/data/t.csv"));
  EXPECT_EQ(c.folds, 5);
  EXPECT_EQ(c.t_test, TTestMode::two_sample);
  EXPECT_EQ(c.alpha_overrides.at("left-right"), 0.5);
  EXPECT_EQ(c.c_grid, default_c_grid());
}

TEST(Config, RejectsUnknownAndConflictingKeys) {
  EXPECT_THROW(parse_run_config(R"({"tabel": "t.csv"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"manifest": "m.json", "naming": {}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"naming": {"prefix": "L"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"folds": "ten"})"), ConfigError);
  EXPECT_THROW(parse_run_config("{"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"t_test": "welch"})"), ConfigError);
}

TEST(Table, WriteReadRoundTrip) {
  CohortSpec s;
  s.n_subjects = 30;
  s.region_names = {"Amygdala"};
  s.site_count = 2;
  const auto c = generate(s);
  std::ostringstream os;
  write_feature_table(os, c.table);
  std::istringstream is(os.str());
  const auto back = to_feature_table(read_csv(is), "label", {"age", "sex", "site"});
  EXPECT_EQ(back, c.table);
}

TEST(Table, RejectsMissingAndRagged) {
  std::istringstream missing("label,a\n1,NA\n0,2\n");
  EXPECT_THROW(read_csv(missing), DataError);
  std::istringstream ragged("label,a\n1\n");
  EXPECT_THROW(read_csv(ragged), DataError);
  std::istringstream dup("a,a\n1,2\n");
  EXPECT_THROW(read_csv(dup), DataError);
}

TEST(Synth, OutputIsByteIdenticalForSameSeed) {
  const auto d = scratch("synth");
  write_file(d / "spec.json", kSmallSpec);
  ASSERT_EQ(cli("synth --config " + (d / "spec.json").string() + " --out " + (d / "a").string()), 0);
  ASSERT_EQ(cli("synth --config " + (d / "spec.json").string() + " --out " + (d / "b").string()), 0);
  EXPECT_EQ(read_text_file(d / "a/cohort.csv"), read_text_file(d / "b/cohort.csv"));
  EXPECT_EQ(read_text_file(d / "a/ground_truth.json"), read_text_file(d / "b/ground_truth.json"));
  ASSERT_EQ(cli("synth --config " + (d / "spec.json").string() + " --seed 9 --out " + (d / "c").string()), 0);
  EXPECT_NE(read_text_file(d / "a/cohort.csv"), read_text_file(d / "c/cohort.csv"));
}

TEST(Synth, BadSpecExitsWithConfigStatus) {
  const auto d = scratch("badspec");
  write_file(d / "spec.json", R"({"prevalence": 1.5})");
  EXPECT_EQ(cli("synth --config " + (d / "spec.json").string() + " --out " + (d / "o").string()), 2);
  EXPECT_FALSE(fs::exists(d / "o/cohort.csv"));
  EXPECT_EQ(cli("run"), 2);
  EXPECT_EQ(cli("report " + (d / "nothing").string()), 3);
}

TEST(Run, WritesResultsAndReport) {
  const auto d = scratch("run");
  const auto cfg_path = small_run(d);
  std::ostringstream log;
  const auto res = cmd_run(load_run_config(cfg_path), log);
  ASSERT_TRUE(res.baseline.has_value());
  EXPECT_EQ(res.tests.size(), 2u);
  for (const char* f : {"manifest.json", "unpaired.tsv", "folds.tsv", "report_whitened.json",
                        "report_baseline.json", "paired_tests.json", "top_weights_whitened.tsv",
                        "pair_correlations.tsv", "correlation_before.tsv",
                        "correlation_after.tsv", "whitener_fold1.json", "run.json"})
    EXPECT_TRUE(fs::exists(d / "results" / f)) << f;
  EXPECT_FALSE(fs::exists(d / "results/.pairwhite.lock"));

  const auto text = render_report(d / "results");
  EXPECT_NE(text.find("mean ± std across 3 CV folds"), std::string::npos);
  EXPECT_NE(text.find("Whitened"), std::string::npos);
  EXPECT_NE(text.find("Original"), std::string::npos);
  EXPECT_NE(text.find("paired t(2)"), std::string::npos);
  EXPECT_EQ(text, render_report(d / "results"));
  // Percentages carry two decimals.
  const auto auc = mean_std(res.whitened.metric("roc_auc"));
  EXPECT_NE(text.find(percent_mean_std(auc)), std::string::npos);
}

TEST(Run, CliRunIsReproducible) {
  const auto d = scratch("runcli");
  const auto cfg = small_run(d, R"(, "baseline": false)");
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (d / "r1").string()), 0);
  ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (d / "r2").string()), 0);
  EXPECT_EQ(read_text_file(d / "r1/report_whitened.json"), read_text_file(d / "r2/report_whitened.json"));
  EXPECT_FALSE(fs::exists(d / "r1/report_baseline.json"));
  ASSERT_EQ(cli("report " + (d / "r1").string()), 0);
  EXPECT_TRUE(fs::exists(d / "r1/summary.txt"));
}

TEST(Run, ReportOnEmptyDirectoryListsExpectedFiles) {
  const auto d = scratch("empty");
  try {
    render_report(d);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("report_whitened.json"), std::string::npos);
  }
}

TEST(Run, LockedOutputDirectoryIsRefused) {
  const auto d = scratch("locked");
  const auto cfg = small_run(d);
  fs::create_directories(d / "results");
  write_file(d / "results/.pairwhite.lock", "");
  std::ostringstream log;
  EXPECT_THROW(cmd_run(load_run_config(cfg), log), DataError);
}

TEST(Whiten, FitThenApplyMatchesLibrary) {
  const auto d = scratch("whiten");
  write_file(d / "spec.json", kSmallSpec);
  ASSERT_EQ(cli("synth --config " + (d / "spec.json").string() + " --out " + (d / "c").string()), 0);
  const auto table = (d / "c/cohort.csv").string();
  ASSERT_EQ(cli("whiten fit --table " + table + " --standardize --out " + (d / "w.json").string()), 0);
  ASSERT_EQ(cli("whiten apply --table " + table + " --whitener " + (d / "w.json").string() +
                " --out " + (d / "z.csv").string()),
            0);

  const auto z = to_feature_table(read_csv_file(d / "z.csv"), "label", {"age", "sex", "site"});
  const auto x = to_feature_table(read_csv_file(table), "label", {"age", "sex", "site"});
  const auto m = derive_manifest_from_naming(x.feature_names).manifest;
  const auto s = fit_scaler(x.features);
  const auto w = fit_whitener(s.transform(x.features), m);
  EXPECT_LT((w.transform(s.transform(x.features)) - z.features).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(z.covariates, x.covariates);

  // Unstandardized input is refused by the whitener.
  EXPECT_EQ(cli("whiten fit --table " + table + " --out " + (d / "w2.json").string()), 3);
  EXPECT_EQ(cli("whiten apply --table " + table + " --whitener " + table + " --out " +
                (d / "z2.csv").string()),
            2);
}

// pairwhite: pairwise ZCA-cor whitening pipeline.
//
//   pairwhite synth  [--config spec.json] [--seed N] --out DIR
//   pairwhite run    --config run.json [--seed N] [--out DIR] [--baseline|--no-baseline]
//                    [--folds K] [--alpha-lr A] [--alpha-gmcsf A]
//   pairwhite report DIR
//   pairwhite whiten fit   --table T.csv [--manifest M.json] [--standardize] --out W.json
//   pairwhite whiten apply --table T.csv --whitener W.json --out Z.csv
//
// Exit status: 0 success, 2 invalid configuration, 3 runtime failure.

#include <iostream>

#include "CLI11.hpp"
#include "pairwhite/commands.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace pairwhite;
  CLI::App app{"Pairwise ZCA-cor whitening for interpretable linear classifiers"};
  app.require_subcommand(1);

  SynthArgs synth;
  std::string synth_config;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic ROI cohort");
  synth_cmd->add_option("--config", synth_config, "Cohort spec (JSON); defaults to the BD-like spec");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();

  std::string run_config;
  RunOverrides ov;
  std::string run_out;
  bool baseline = false, no_baseline = false;
  auto* run_cmd = app.add_subcommand("run", "Cross-validate whitened (and baseline) pipelines");
  run_cmd->add_option("--config", run_config, "Run configuration (JSON)")->required();
  run_cmd->add_option("--seed", ov.seed, "Fold assignment seed");
  run_cmd->add_option("--out", run_out, "Results directory");
  auto* b1 = run_cmd->add_flag("--baseline", baseline, "Also run the unwhitened arm");
  run_cmd->add_flag("--no-baseline", no_baseline, "Skip the unwhitened arm")->excludes(b1);
  run_cmd->add_option("--folds", ov.folds, "Outer CV folds");
  run_cmd->add_option("--alpha-lr", ov.alpha_lr, "Alpha for the left-right stage");
  run_cmd->add_option("--alpha-gmcsf", ov.alpha_gmcsf, "Alpha for the GM-CSF stage");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Summarize a results directory");
  report_cmd->add_option("dir", report_dir, "Results directory")->required();

  auto* whiten_cmd = app.add_subcommand("whiten", "Fit or apply a standalone whitener");
  whiten_cmd->require_subcommand(1);
  WhitenFitArgs wfit;
  std::string wfit_manifest;
  auto* wfit_cmd = whiten_cmd->add_subcommand("fit", "Fit a whitener on a table");
  wfit_cmd->add_option("--table", wfit.table, "Input table")->required();
  wfit_cmd->add_option("--manifest", wfit_manifest, "Pair manifest; default derives pairs from L_/R_ and _GM/_CSF names");
  wfit_cmd->add_option("--non-features", wfit.non_features, "Columns that are not features")
      ->delimiter(',')
      ->capture_default_str();
  wfit_cmd->add_flag("--standardize", wfit.standardize, "Fit and store a standardizer first");
  wfit_cmd->add_option("--alpha-lr", wfit.alpha_lr, "Alpha for the left-right stage");
  wfit_cmd->add_option("--alpha-gmcsf", wfit.alpha_gmcsf, "Alpha for the GM-CSF stage");
  wfit_cmd->add_option("--out", wfit.out, "Artifact path")->capture_default_str();
  std::string wapply_table, wapply_artifact, wapply_out;
  auto* wapply_cmd = whiten_cmd->add_subcommand("apply", "Apply a fitted whitener to a table");
  wapply_cmd->add_option("--table", wapply_table, "Input table")->required();
  wapply_cmd->add_option("--whitener", wapply_artifact, "Artifact from `whiten fit`")->required();
  wapply_cmd->add_option("--out", wapply_out, "Output table")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  try {
    if (*synth_cmd) {
      if (!synth_config.empty()) synth.config = synth_config;
      cmd_synth(synth);
    } else if (*run_cmd) {
      auto cfg = load_run_config(run_config);
      if (!run_out.empty()) ov.out = run_out;
      if (baseline) ov.baseline = true;
      if (no_baseline) ov.baseline = false;
      apply_overrides(cfg, ov);
      cmd_run(cfg);
    } else if (*report_cmd) {
      cmd_report(report_dir);
    } else if (*wfit_cmd) {
      if (!wfit_manifest.empty()) wfit.manifest = wfit_manifest;
      cmd_whiten_fit(wfit);
    } else if (*wapply_cmd) {
      cmd_whiten_apply(wapply_table, wapply_artifact, wapply_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "pairwhite: configuration error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "pairwhite: error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return 0;
}

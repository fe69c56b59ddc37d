#include "cuskip/cli.hpp"

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cuskip/error.hpp"
#include "cuskip/pipeline.hpp"

namespace cuskip::cli {

namespace {

namespace fs = std::filesystem;
using namespace cuskip::pipeline;

void add_encoder_options(CLI::App* cmd, EncoderConfig& encoder) {
  cmd->add_option("--lambda-scale", encoder.lambda_scale, "lambda = scale * 2^((QP-12)/3)")->capture_default_str();
  cmd->add_option("--search-range", encoder.search_range, "full-pel motion search range")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cuskip: decision-tree split skipping for a toy block encoder", "cuskip"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "synthesise raw sequences from a spec file");
  generate->add_option("--spec", gen.spec, "sequence spec file")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_flag("--force", gen.force, "overwrite existing outputs");

  ExtractOptions ext;
  auto* extract = app.add_subcommand("extract", "full-RDO encodes and per-CU feature dataset");
  extract->add_option("--sequences", ext.sequences, "sequence stems, headers or directories")->required();
  extract->add_option("--qps", ext.qps, "base QPs")->delimiter(',')->capture_default_str();
  extract->add_option("--out", ext.out, "output directory")->required();
  extract->add_option("--threads", ext.threads, "worker threads (0 = all cores)");
  extract->add_flag("--force", ext.force, "overwrite existing outputs");
  add_encoder_options(extract, ext.encoder);

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "grow one tree per CU depth and cross-validate");
  train->add_option("--dataset", tr.dataset, "dataset.csv from extract")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr.out, "output directory")->required();
  train->add_option("--max-depth", tr.constraints.max_depth, "maximum tree depth")->capture_default_str();
  train->add_option("--min-leaf-fraction", tr.constraints.min_leaf_fraction, "minimum leaf size as a fraction")
      ->capture_default_str();
  train->add_option("--bins", tr.constraints.bin_count, "quantile bins for RDC and Bits (0 = off)")
      ->capture_default_str();
  train->add_option("--folds", tr.folds, "cross-validation folds")->capture_default_str();
  train->add_option("--seed", tr.seed, "fold shuffle seed")->capture_default_str();
  train->add_option("--threads", tr.threads, "worker threads (0 = all cores)");
  train->add_flag("--force", tr.force, "overwrite existing outputs");

  PruneOptions pr;
  auto* prune = app.add_subcommand("prune", "harvest skip criteria from trained models");
  prune->add_option("--models", pr.models, "directory with model_d*.json")->required()->check(CLI::ExistingDirectory);
  prune->add_option("--out", pr.out, "output directory")->required();
  prune->add_option("--min-accuracy", pr.thresholds.min_accuracy, "percent")->capture_default_str();
  prune->add_option("--min-coverage", pr.thresholds.min_coverage, "percent")->capture_default_str();
  prune->add_option("--run-id", pr.run_id, "identifier recorded in the criteria file");
  prune->add_flag("--force", pr.force, "overwrite existing outputs");

  BenchOptions be;
  fs::path criteria;
  auto* bench = app.add_subcommand("bench", "anchor vs criteria-enabled encodes on held-out sequences");
  bench->add_option("--sequences", be.sequences, "sequence stems, headers or directories")->required();
  bench->add_option("--criteria", criteria, "criteria.tsv from prune (omit for an anchor-only run)")
      ->check(CLI::ExistingFile);
  bench->add_option("--qps", be.qps, "base QPs")->delimiter(',')->capture_default_str();
  bench->add_option("--out", be.out, "output directory")->required();
  bench->add_option("--threads", be.threads, "worker threads (0 = all cores)");
  bench->add_flag("--force", be.force, "overwrite existing outputs");
  add_encoder_options(bench, be.encoder);

  CorrelateOptions co;
  auto* correlate = app.add_subcommand("correlate", "feature/label correlation table per CU depth");
  correlate->add_option("--dataset", co.dataset, "dataset.csv from extract")->required()->check(CLI::ExistingFile);
  correlate->add_option("--out", co.out, "output directory")->required();
  correlate->add_flag("--force", co.force, "overwrite existing outputs");

  fs::path manifest;
  fs::path rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "re-execute a manifest and verify its outputs");
  rerun_cmd->add_option("manifest", manifest, "manifest.json of a previous run")->required()->check(CLI::ExistingFile);
  rerun_cmd->add_option("--out", rerun_out, "output directory (default: <run dir>-rerun)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  std::vector<std::string> argv{"cuskip"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    if (*generate) return cmd_generate(gen, err, argv).exit_code;
    if (*extract) return cmd_extract(ext, err, argv).exit_code;
    if (*train) return cmd_train(tr, err, argv).exit_code;
    if (*prune) return cmd_prune(pr, err, argv).exit_code;
    if (*bench) {
      if (!criteria.empty()) be.criteria = criteria;
      return cmd_bench(be, out, argv).exit_code;
    }
    if (*correlate) return cmd_correlate(co, out, argv).exit_code;
    if (*rerun_cmd) {
      std::optional<fs::path> o;
      if (!rerun_out.empty()) o = rerun_out;
      return rerun(manifest, o, err).exit_code;
    }
  } catch (const OutputExists& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace cuskip::cli

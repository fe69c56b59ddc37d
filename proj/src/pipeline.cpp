#include "cuskip/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cuskip/bench.hpp"
#include "cuskip/error.hpp"
#include "cuskip/features.hpp"
#include "cuskip/parallel.hpp"
#include "cuskip/sequence.hpp"

namespace cuskip::pipeline {

namespace {

using nlohmann::ordered_json;

fs::path absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

struct OutputFile {
  std::string name;
  bool volatile_content = false;
};

// Creates `out` and refuses to clobber any of the named files without force.
void prepare_output(const fs::path& out, const std::vector<OutputFile>& files, bool force) {
  std::vector<std::string> existing;
  for (const auto& f : files)
    if (fs::exists(out / f.name)) existing.push_back((out / f.name).string());
  if (fs::exists(out / "manifest.json")) existing.push_back((out / "manifest.json").string());
  if (!existing.empty() && !force) {
    std::string list;
    for (const auto& e : existing) list += "\n  " + e;
    throw OutputExists("refusing to overwrite existing output (pass --force to replace):" + list);
  }
  fs::create_directories(out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Outcome finish(const std::string& command, std::vector<std::string> argv, ordered_json config,
               const std::vector<fs::path>& inputs, const fs::path& out, const std::vector<OutputFile>& outputs,
               int exit_code) {
  Outcome outcome;
  outcome.exit_code = exit_code;
  RunManifest& m = outcome.manifest;
  m.command = command;
  m.argv = std::move(argv);
  m.config = std::move(config);
  for (const auto& in : inputs) m.inputs.push_back(describe_file(in, {}, false));
  for (const auto& f : outputs) {
    m.outputs.push_back(describe_file(out / f.name, out, f.volatile_content));
    outcome.outputs.push_back(out / f.name);
  }
  m.write(out / "manifest.json");
  outcome.outputs.push_back(out / "manifest.json");
  return outcome;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(absolute_path(p).string());
  return out;
}

std::vector<fs::path> paths_from(const ordered_json& j) {
  std::vector<fs::path> out;
  for (const auto& s : j) out.emplace_back(s.get<std::string>());
  return out;
}

ordered_json encoder_json(const EncoderConfig& e) {
  return {{"lambda_scale", e.lambda_scale}, {"search_range", e.search_range}};
}

EncoderConfig encoder_from(const ordered_json& j) {
  EncoderConfig e;
  e.lambda_scale = j.at("lambda_scale").get<double>();
  e.search_range = j.at("search_range").get<int>();
  return e;
}

void check_qps(const std::vector<int>& qps) {
  if (qps.empty()) throw DomainError("QP list is empty");
  for (int qp : qps)
    if (qp < 0 || qp > 47) throw DomainError("base QP " + std::to_string(qp) + " outside 0..47");
}

std::vector<fs::path> sequence_files(const std::vector<fs::path>& stems) {
  std::vector<fs::path> files;
  for (const auto& s : stems) {
    files.push_back(header_path(s));
    files.push_back(raw_path(s));
  }
  return files;
}

std::vector<Sequence> load_sequences(const std::vector<fs::path>& stems) {
  std::vector<Sequence> out;
  std::set<std::string> ids;
  for (const auto& s : stems) {
    out.push_back(read_sequence(s));
    if (!ids.insert(out.back().id).second) throw DomainError("sequence id '" + out.back().id + "' given twice");
  }
  return out;
}

std::string model_name(int depth) { return "model_d" + std::to_string(depth) + ".json"; }

}  // namespace

std::vector<fs::path> resolve_sequence_stems(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> stems;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in))
        if (entry.path().extension() == ".hdr") found.push_back(absolute_path(entry.path()).replace_extension());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw DomainError("no sequences (*.hdr) in directory " + in.string());
      stems.insert(stems.end(), found.begin(), found.end());
    } else {
      fs::path stem = absolute_path(in);
      if (stem.extension() == ".hdr" || stem.extension() == ".y") stem.replace_extension();
      if (!fs::exists(header_path(stem))) throw DomainError("no sequence header " + header_path(stem).string());
      stems.push_back(stem);
    }
  }
  if (stems.empty()) throw DomainError("no sequences given");
  return stems;
}

Outcome cmd_generate(const GenerateOptions& options, std::ostream& log, std::vector<std::string> argv) {
  const auto specs = load_sequence_specs(options.spec.string());
  if (specs.empty()) throw DomainError(options.spec.string() + ": no sequences specified");
  std::vector<OutputFile> files;
  std::set<std::string> ids;
  for (const auto& spec : specs) {
    spec.validate();
    if (!ids.insert(spec.id()).second) throw DomainError("duplicate sequence id '" + spec.id() + "'");
    files.push_back({spec.id() + ".hdr"});
    files.push_back({spec.id() + ".y"});
  }
  prepare_output(options.out, files, options.force);
  for (const auto& spec : specs) {
    write_sequence(options.out / spec.id(), generate_sequence(spec));
    log << "generated " << spec.id() << " (" << archetype_name(spec.archetype) << ", " << spec.width << "x"
        << spec.height << ", " << spec.frames << " frames)\n";
  }
  ordered_json config = {{"spec", absolute_path(options.spec).string()}, {"out", absolute_path(options.out).string()}};
  return finish("generate", std::move(argv), config, {options.spec}, options.out, files, kOk);
}

Outcome cmd_extract(const ExtractOptions& options, std::ostream& log, std::vector<std::string> argv) {
  check_qps(options.qps);
  options.encoder.validate();
  const auto stems = resolve_sequence_stems(options.sequences);
  const std::vector<OutputFile> files{{"dataset.csv"}};
  prepare_output(options.out, files, options.force);
  const auto sequences = load_sequences(stems);

  const std::size_t nq = options.qps.size();
  std::vector<Dataset> parts(sequences.size() * nq);
  parallel_for(parts.size(), options.threads, [&](std::size_t u) {
    const Sequence& seq = sequences[u / nq];
    EncoderConfig enc = options.encoder;
    enc.base_qp = options.qps[u % nq];
    parts[u] = collect_samples(encode_sequence(seq, enc), seq.id, enc.base_qp);
  });
  const Dataset dataset = Dataset::merge(std::move(parts));
  export_dataset(dataset, (options.out / "dataset.csv").string());
  const auto counts = dataset.depth_counts();
  log << "extracted " << dataset.samples.size() << " samples from " << sequences.size() << " sequence(s) x " << nq
      << " QP(s) (depth 0/1/2: " << counts[0] << "/" << counts[1] << "/" << counts[2] << ")\n";

  ordered_json qps = options.qps;
  ordered_json config = {{"sequences", path_strings(stems)},
                         {"qps", qps},
                         {"encoder", encoder_json(options.encoder)},
                         {"out", absolute_path(options.out).string()},
                         {"threads", options.threads}};
  return finish("extract", std::move(argv), config, sequence_files(stems), options.out, files, kOk);
}

Outcome cmd_train(const TrainOptions& options, std::ostream& log, std::vector<std::string> argv) {
  options.constraints.validate();
  if (options.folds < 2) throw DomainError("fold count must be at least 2");
  const Dataset dataset = import_dataset(options.dataset.string());

  std::array<std::vector<Sample>, 3> per_depth;
  for (int d = 0; d < 3; ++d) per_depth[d] = dataset.at_depth(d);
  std::vector<OutputFile> files;
  for (int d = 0; d < 3; ++d)
    if (!per_depth[d].empty()) files.push_back({model_name(d)});
  files.push_back({"kfold.txt"});
  files.push_back({"kfold.csv"});
  if (files.size() == 2) throw DomainError(options.dataset.string() + ": dataset holds no samples");
  prepare_output(options.out, files, options.force);

  std::array<std::optional<DecisionTree>, 3> trees;
  std::array<std::optional<CrossValidationReport>, 3> reports;
  parallel_for(3, options.threads, [&](std::size_t d) {
    if (per_depth[d].empty()) return;
    trees[d] = grow_tree(per_depth[d], static_cast<int>(d), options.constraints);
    if (per_depth[d].size() >= static_cast<std::size_t>(options.folds))
      reports[d] = kfold_validate(per_depth[d], static_cast<int>(d), options.constraints,
                                  {options.folds, options.seed});
  });

  std::ostringstream text, csv;
  text << "k-fold cross-validation: k = " << options.folds << ", seed = " << options.seed << "\n";
  text << "constraints: max depth " << options.constraints.max_depth << ", min leaf fraction "
       << format_number(options.constraints.min_leaf_fraction) << ", bins " << options.constraints.bin_count << "\n\n";
  text << "depth  samples  nodes  tree depth  fold accuracies                                  mean\n";
  csv << "depth,fold,train_size,validation_size,correct,accuracy\n";
  for (int d = 0; d < 3; ++d) {
    if (!trees[d]) {
      log << "warning: no depth-" << d << " samples; no model trained for depth " << d << "\n";
      continue;
    }
    if (per_depth[d].size() < kSmallDatasetWarning)
      log << "warning: depth-" << d << " dataset has only " << per_depth[d].size()
          << " samples; model trained but statistics will be coarse\n";
    save_tree(*trees[d], (options.out / model_name(d)).string());
    char head[96];
    std::snprintf(head, sizeof head, "%-6d %-8zu %-6zu %-11d ", d, per_depth[d].size(), trees[d]->nodes.size(),
                  trees[d]->depth());
    text << head;
    if (!reports[d]) {
      text << "(too few samples for " << options.folds << " folds)\n";
      log << "warning: depth-" << d << " has fewer samples than folds; cross-validation skipped\n";
      continue;
    }
    std::string accs;
    for (std::size_t f = 0; f < reports[d]->folds.size(); ++f) {
      const FoldResult& r = reports[d]->folds[f];
      char cell[16];
      std::snprintf(cell, sizeof cell, "%.4f ", r.accuracy);
      accs += cell;
      csv << d << ',' << f << ',' << r.train_size << ',' << r.validation_size << ',' << r.correct << ','
          << format_number(r.accuracy) << '\n';
    }
    char tail[96];
    std::snprintf(tail, sizeof tail, "%-48s %.4f\n", accs.c_str(), reports[d]->mean_accuracy);
    text << tail;
    log << "depth " << d << ": " << trees[d]->nodes.size() << " nodes, mean validation accuracy "
        << reports[d]->mean_accuracy << "\n";
  }
  write_text(options.out / "kfold.txt", text.str());
  write_text(options.out / "kfold.csv", csv.str());

  ordered_json config = {{"dataset", absolute_path(options.dataset).string()},
                         {"out", absolute_path(options.out).string()},
                         {"max_depth", options.constraints.max_depth},
                         {"min_leaf_fraction", options.constraints.min_leaf_fraction},
                         {"bins", options.constraints.bin_count},
                         {"folds", options.folds},
                         {"seed", options.seed},
                         {"threads", options.threads}};
  return finish("train", std::move(argv), config, {options.dataset}, options.out, files, kOk);
}

Outcome cmd_prune(const PruneOptions& options, std::ostream& log, std::vector<std::string> argv) {
  options.thresholds.validate();
  std::array<std::optional<DecisionTree>, 3> trees;
  std::vector<fs::path> inputs;
  for (int d = 0; d < 3; ++d) {
    const fs::path p = options.models / model_name(d);
    if (!fs::exists(p)) continue;
    trees[d] = load_tree(p.string());
    if (trees[d]->cu_depth != d) throw ConfigError(p.string() + ": model is for depth " + std::to_string(trees[d]->cu_depth));
    inputs.push_back(p);
  }
  if (inputs.empty()) throw DomainError("no model_d*.json files in " + options.models.string());

  std::vector<OutputFile> files{{"criteria.tsv"}, {"harvested.tsv"}};
  for (int d = 0; d < 3; ++d)
    if (trees[d]) {
      files.push_back({"plot_d" + std::to_string(d) + ".csv"});
      files.push_back({"plot_d" + std::to_string(d) + ".dat"});
    }
  prepare_output(options.out, files, options.force);

  BundleProvenance provenance;
  provenance.min_accuracy = options.thresholds.min_accuracy;
  provenance.min_coverage = options.thresholds.min_coverage;
  provenance.run_id = options.run_id;
  if (provenance.run_id.empty()) {
    std::string key;
    for (const auto& p : inputs) key += hex64(fnv1a64_file(p));
    key += format_number(options.thresholds.min_accuracy) + "/" + format_number(options.thresholds.min_coverage);
    provenance.run_id =
        "prune-" + hex64(fnv1a64({reinterpret_cast<const unsigned char*>(key.data()), key.size()})).substr(0, 12);
  }
  std::set<std::string> training;
  for (const auto& t : trees)
    if (t) training.insert(t->training_sequences.begin(), t->training_sequences.end());
  provenance.training_sequences.assign(training.begin(), training.end());

  std::array<std::vector<SkipCriterion>, 3> harvested;
  std::vector<SkipCriterion> all;
  for (int d = 0; d < 3; ++d) {
    if (!trees[d]) continue;
    harvested[d] = harvest_criteria(*trees[d], options.thresholds);
    all.insert(all.end(), harvested[d].begin(), harvested[d].end());
    const auto rows = threshold_plot_data(*trees[d]);
    write_text(options.out / ("plot_d" + std::to_string(d) + ".csv"), plot_data_csv(rows));
    write_text(options.out / ("plot_d" + std::to_string(d) + ".dat"), plot_data_gnuplot(rows, options.thresholds));
  }
  std::vector<SkipCriterion> selected;
  for (const auto& c : select_per_depth(harvested))
    if (c) selected.push_back(*c);
  write_criteria_file((options.out / "criteria.tsv").string(), selected, provenance);
  write_criteria_file((options.out / "harvested.tsv").string(), all, provenance);

  int exit_code = kOk;
  if (selected.empty()) {
    log << "no tree node reached accuracy >= " << format_number(options.thresholds.min_accuracy)
        << "% with coverage >= " << format_number(options.thresholds.min_coverage)
        << "%; lower the thresholds (see the plot_d*.dat files)\n";
    exit_code = kEmptyPruning;
  }
  for (const auto& c : selected)
    log << "depth " << c.cu_depth << ": " << c.conjunction() << "  (accuracy " << 100.0 * c.accuracy()
        << "%, coverage " << 100.0 * c.coverage() << "%)\n";

  ordered_json config = {{"models", absolute_path(options.models).string()},
                         {"out", absolute_path(options.out).string()},
                         {"min_accuracy", options.thresholds.min_accuracy},
                         {"min_coverage", options.thresholds.min_coverage},
                         {"run_id", options.run_id}};
  return finish("prune", std::move(argv), config, inputs, options.out, files, exit_code);
}

Outcome cmd_bench(const BenchOptions& options, std::ostream& log, std::vector<std::string> argv) {
  check_qps(options.qps);
  options.encoder.validate();
  const auto stems = resolve_sequence_stems(options.sequences);
  std::optional<CriteriaBundle> bundle;
  if (options.criteria) bundle = load_criteria_bundle(options.criteria->string());
  const std::vector<OutputFile> files{
      {"report.txt", true}, {"report.csv"}, {"rd_points.csv"}, {"timing.csv", true}};
  prepare_output(options.out, files, options.force);
  const auto sequences = load_sequences(stems);

  BenchConfig config;
  config.qps = options.qps;
  config.encoder = options.encoder;
  config.threads = options.threads;
  const BenchReport report = run_benchmark(sequences, config, bundle ? &*bundle : nullptr);
  write_text(options.out / "report.txt", report.to_text());
  write_text(options.out / "report.csv", report.to_csv());
  write_text(options.out / "rd_points.csv", report.points_csv());
  write_text(options.out / "timing.csv", report.timing_csv());
  log << report.to_text();

  std::vector<fs::path> inputs = sequence_files(stems);
  if (options.criteria) inputs.push_back(*options.criteria);
  ordered_json qps = options.qps;
  ordered_json jconfig = {{"sequences", path_strings(stems)},
                          {"criteria", options.criteria ? absolute_path(*options.criteria).string() : ""},
                          {"qps", qps},
                          {"encoder", encoder_json(options.encoder)},
                          {"out", absolute_path(options.out).string()},
                          {"threads", options.threads}};
  return finish("bench", std::move(argv), jconfig, inputs, options.out, files, kOk);
}

Outcome cmd_correlate(const CorrelateOptions& options, std::ostream& log, std::vector<std::string> argv) {
  const Dataset dataset = import_dataset(options.dataset.string());
  const std::vector<OutputFile> files{{"correlation.txt"}, {"correlation.csv"}};
  prepare_output(options.out, files, options.force);
  const CorrelationTable table = correlation_table(dataset);
  write_text(options.out / "correlation.txt", table.to_text());
  write_text(options.out / "correlation.csv", table.to_grid());
  log << table.to_text();
  ordered_json config = {{"dataset", absolute_path(options.dataset).string()},
                         {"out", absolute_path(options.out).string()}};
  return finish("correlate", std::move(argv), config, {options.dataset}, options.out, files, kOk);
}

RerunResult rerun(const fs::path& manifest_path, std::optional<fs::path> out, std::ostream& log) {
  const RunManifest m = RunManifest::read(manifest_path);
  const ordered_json& c = m.config;
  RerunResult result;
  result.out = out ? *out : fs::path(absolute_path(manifest_path).parent_path().string() + "-rerun");
  std::vector<std::string> argv{"rerun", manifest_path.string()};

  Outcome outcome;
  try {
    if (m.command == "generate") {
      outcome = cmd_generate({c.at("spec").get<std::string>(), result.out, true}, log, argv);
    } else if (m.command == "extract") {
      ExtractOptions o;
      o.sequences = paths_from(c.at("sequences"));
      o.qps = c.at("qps").get<std::vector<int>>();
      o.encoder = encoder_from(c.at("encoder"));
      o.threads = c.at("threads").get<unsigned>();
      o.out = result.out;
      o.force = true;
      outcome = cmd_extract(o, log, argv);
    } else if (m.command == "train") {
      TrainOptions o;
      o.dataset = c.at("dataset").get<std::string>();
      o.constraints.max_depth = c.at("max_depth").get<int>();
      o.constraints.min_leaf_fraction = c.at("min_leaf_fraction").get<double>();
      o.constraints.bin_count = c.at("bins").get<int>();
      o.folds = c.at("folds").get<int>();
      o.seed = c.at("seed").get<std::uint64_t>();
      o.threads = c.at("threads").get<unsigned>();
      o.out = result.out;
      o.force = true;
      outcome = cmd_train(o, log, argv);
    } else if (m.command == "prune") {
      PruneOptions o;
      o.models = c.at("models").get<std::string>();
      o.thresholds = {c.at("min_accuracy").get<double>(), c.at("min_coverage").get<double>()};
      o.run_id = c.at("run_id").get<std::string>();
      o.out = result.out;
      o.force = true;
      outcome = cmd_prune(o, log, argv);
    } else if (m.command == "bench") {
      BenchOptions o;
      o.sequences = paths_from(c.at("sequences"));
      const auto criteria = c.at("criteria").get<std::string>();
      if (!criteria.empty()) o.criteria = criteria;
      o.qps = c.at("qps").get<std::vector<int>>();
      o.encoder = encoder_from(c.at("encoder"));
      o.threads = c.at("threads").get<unsigned>();
      o.out = result.out;
      o.force = true;
      outcome = cmd_bench(o, log, argv);
    } else if (m.command == "correlate") {
      outcome = cmd_correlate({c.at("dataset").get<std::string>(), result.out, true}, log, argv);
    } else {
      throw ConfigError(manifest_path.string() + ": unknown command '" + m.command + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest_path.string() + ": incomplete config: " + e.what());
  }

  std::map<std::string, const ManifestFile*> fresh;
  for (const auto& f : outcome.manifest.outputs) fresh[f.path] = &f;
  for (const auto& f : m.outputs) {
    if (f.volatile_content) continue;
    const auto it = fresh.find(f.path);
    if (it == fresh.end())
      result.mismatches.push_back(f.path + " (missing)");
    else if (it->second->fnv1a64 != f.fnv1a64)
      result.mismatches.push_back(f.path + " (" + f.fnv1a64 + " != " + it->second->fnv1a64 + ")");
  }
  result.exit_code = result.mismatches.empty() ? outcome.exit_code : kRerunMismatch;
  if (result.mismatches.empty()) {
    log << "rerun of '" << m.command << "' reproduced all " << m.outputs.size() << " outputs (volatile files excepted)"
        << " in " << result.out.string() << "\n";
  } else {
    for (const auto& mm : result.mismatches) log << "mismatch: " << mm << "\n";
  }
  return result;
}

}  // namespace cuskip::pipeline

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cuskip/bench.hpp"
#include "cuskip/cart.hpp"
#include "cuskip/cli.hpp"
#include "cuskip/codec.hpp"
#include "cuskip/features.hpp"
#include "cuskip/pruning.hpp"
#include "cuskip/sequence.hpp"
#include "cuskip/skip_runtime.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cuskip;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

// ---------------------------------------------------------------------------
// Shared end-to-end run

const char* kTrainSpec =
    "[train-mixed-1]\narchetype = mixed\nseed = 101\n"
    "[train-mixed-2]\narchetype = mixed\nseed = 102\n"
    "[train-mixed-3]\narchetype = mixed\nseed = 103\n"
    "[train-mixed-4]\narchetype = mixed\nseed = 104\n"
    "[train-texture]\narchetype = moving-texture\nseed = 105\n"
    "[train-noise]\narchetype = noise\nseed = 106\n";

const char* kTestSpec =
    "[heldout-mixed-1]\narchetype = mixed\nseed = 201\n"
    "[heldout-mixed-2]\narchetype = mixed\nseed = 202\n"
    "[heldout-mixed-3]\narchetype = mixed\nseed = 203\n";

const char* kStages[] = {"train_seq", "test_seq", "dataset", "models", "criteria", "bench", "correlation"};

struct PipelineRun {
  fs::path root;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
};

PipelineRun run_pipeline(const fs::path& root) {
  PipelineRun run;
  run.root = root;
  const auto start = std::chrono::steady_clock::now();
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "train.spec") << kTrainSpec;
  std::ofstream(root / "test.spec") << kTestSpec;
  const std::string r = root.string();
  const std::vector<std::vector<std::string>> steps = {
      {"generate", "--spec", r + "/train.spec", "--out", r + "/train_seq"},
      {"generate", "--spec", r + "/test.spec", "--out", r + "/test_seq"},
      {"extract", "--sequences", r + "/train_seq", "--qps", "22,27,32,37", "--out", r + "/dataset"},
      {"train", "--dataset", r + "/dataset/dataset.csv", "--out", r + "/models"},
      {"prune", "--models", r + "/models", "--out", r + "/criteria", "--min-accuracy", "97", "--min-coverage", "17"},
      {"bench", "--sequences", r + "/test_seq", "--criteria", r + "/criteria/criteria.tsv", "--qps", "22,27,32,37",
       "--out", r + "/bench"},
      {"correlate", "--dataset", r + "/dataset/dataset.csv", "--out", r + "/correlation"},
  };
  for (const auto& step : steps) {
    std::string err;
    const int code = cli(step, &err);
    if (code != 0) {
      run.error = step[0] + " exited " + std::to_string(code) + ": " + err;
      return run;
    }
  }
  run.ok = true;
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

PipelineRun& shared_pipeline() {
  static PipelineRun run = run_pipeline(fs::temp_directory_path() / "cuskip_acceptance" / "run1");
  return run;
}

// ---------------------------------------------------------------------------

Verdict gini_oracle() {
  synth::Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t a = rng.below(1000000), b = rng.below(1000000) + (a == 0);
    worst = std::max(worst, std::abs(gini_impurity({a, b}) - oracle::gini(a, b)));
  }
  const bool half = gini_impurity({50, 50}) == 0.5;
  const bool pure = gini_impurity({100, 0}) == 0.0 && gini_impurity({0, 100}) == 0.0;
  return {worst <= 1e-12 && half && pure,
          fmt("max |err| %.2e over 10000 pairs, (50,50) -> %s, pure -> %s", worst, half ? "0.5" : "WRONG",
              pure ? "0" : "WRONG")};
}

Verdict cart_oracle() {
  synth::Rng rng(2);
  int root_matches = 0, nodes_checked = 0, nodes_failed = 0;
  std::string first_problem;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.below(181);
    std::vector<FeatureId> pool(kAllFeatures.begin(), kAllFeatures.end());
    for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[rng.below(i + 1)]);
    pool.resize(1 + rng.below(4));

    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i) {
      auto f = synth::random_features(rng);
      if (trial % 2) {
        f.bits = rng.range(0, 15);
        f.rdc = rng.range(0, 40) * 2.5;
      }
      double p = 0.3;
      for (FeatureId id : pool) p += 0.3 * (f.value(id) > synth::random_features(rng).value(id) ? 1 : -1) / pool.size();
      samples.push_back(synth::make_sample(f, 1, rng.chance(std::clamp(p, 0.05, 0.95)), static_cast<int>(i)));
    }
    TrainConstraints c;
    const DecisionTree tree = grow_tree(samples, 1, c, pool);
    const TrainingView view = make_training_view(samples, c);
    const auto want = oracle::brute_force_split(view, pool, c.min_leaf(n));
    const TreeNode& root = tree.root();
    bool match;
    if (!want) {
      match = root.is_leaf();
    } else {
      match = !root.is_leaf() && root.rule->feature == want->feature && root.rule->threshold > want->below &&
              root.rule->threshold <= want->above &&
              oracle::weighted_impurity(tree.nodes[root.left].counts.not_split, tree.nodes[root.left].counts.split,
                                        tree.nodes[root.right].counts.not_split,
                                        tree.nodes[root.right].counts.split) == want->impurity;
    }
    root_matches += match;
    if (!match && first_problem.empty()) first_problem = fmt("; first root mismatch in dataset %d", trial);
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) continue;
      ++nodes_checked;
      const auto& l = tree.nodes[node.left].counts;
      const auto& r = tree.nodes[node.right].counts;
      if (!(oracle::weighted_impurity(l.not_split, l.split, r.not_split, r.split) <
            oracle::node_impurity(node.counts.not_split, node.counts.split)))
        ++nodes_failed;
    }
  }
  return {root_matches == 100 && nodes_failed == 0,
          fmt("root split matches brute force on %d/100 datasets; %d/%d internal nodes strictly lower weighted Gini%s",
              root_matches, nodes_checked - nodes_failed, nodes_checked, first_problem.c_str())};
}

Verdict constraints() {
  const auto samples = synth::noisy_dataset(100000, 0, 3);
  const DecisionTree tree = grow_tree(samples, 0);
  int deepest = 0;
  std::uint64_t smallest = ~0ull;
  for (const TreeNode& n : tree.nodes) {
    deepest = std::max(deepest, n.node_depth);
    if (n.is_leaf()) smallest = std::min(smallest, n.counts.total());
  }
  return {deepest <= 5 && smallest >= 100 && tree.nodes.size() > 1,
          fmt("%zu nodes, max node depth %d, smallest leaf %llu samples", tree.nodes.size(), deepest,
              static_cast<unsigned long long>(smallest))};
}

Verdict pruning_soundness() {
  const PipelineRun& run = shared_pipeline();
  if (!run.ok) return {false, "pipeline failed: " + run.error};
  const Dataset dataset = import_dataset((run.root / "dataset" / "dataset.csv").string());
  std::size_t recounted = 0, recount_bad = 0, grid_pairs = 0, grid_bad = 0;
  for (int d = 0; d < 3; ++d) {
    const DecisionTree tree = load_tree((run.root / "models" / ("model_d" + std::to_string(d) + ".json")).string());
    const auto samples = dataset.at_depth(d);
    // Every node that could be harvested at the loosest grid point.
    for (const SkipCriterion& c : harvest_criteria(tree, {60, 1})) {
      std::uint64_t covered = 0, not_split = 0;
      for (const Sample& s : samples)
        if (evaluate_criterion(c, s.features)) {
          ++covered;
          not_split += !s.label;
        }
      ++recounted;
      if (covered != c.covered || not_split != c.not_split || samples.size() != c.depth_total) ++recount_bad;
    }
    auto ids = [&](double a, double cov) {
      std::set<std::pair<int, std::uint64_t>> out;
      for (const auto& c : harvest_criteria(tree, {a, cov})) out.insert({c.source.node_depth, c.source.position});
      return out;
    };
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const double a = 60 + 4 * i, cov = 1 + 2 * j;
        const auto here = ids(a, cov);
        for (const auto& next : {std::pair{a + 4, cov}, std::pair{a, cov + 2}}) {
          if (next.first > 96 || next.second > 19) continue;
          const auto stricter = ids(next.first, next.second);
          ++grid_pairs;
          if (!std::includes(here.begin(), here.end(), stricter.begin(), stricter.end())) ++grid_bad;
        }
      }
  }
  return {recount_bad == 0 && recounted > 0 && grid_bad == 0,
          fmt("%zu criteria recounted from dataset.csv, %zu mismatches; %zu grid steps, %zu grew the harvest",
              recounted, recount_bad, grid_pairs, grid_bad)};
}

Verdict planted_rule() {
  const auto samples = synth::planted_dataset(30000, 5);
  const synth::PlantedRule rule;
  std::size_t inside = 0, inside_not_split = 0;
  for (const auto& s : samples)
    if (rule.holds(s.features)) {
      ++inside;
      inside_not_split += !s.label;
    }
  const double consistency = 100.0 * inside_not_split / inside;
  const double coverage = 100.0 * inside / samples.size();

  const DecisionTree tree = grow_tree(samples, 2);
  std::array<std::vector<SkipCriterion>, 3> harvested;
  harvested[2] = harvest_criteria(tree, {97, 17});
  const auto selected = select_per_depth(harvested);
  if (!selected[2])
    return {false, fmt("no depth-2 criterion at (97, 17); rule consistency %.2f%%, coverage %.2f%%", consistency,
                       coverage)};
  std::size_t disagreements = 0;
  for (const auto& s : samples) disagreements += evaluate_criterion(*selected[2], s.features) != rule.holds(s.features);
  const bool others_empty = !selected[0] && !selected[1];
  return {disagreements == 0 && others_empty && consistency >= 97.0 && coverage >= 20.0,
          fmt("planted rule %.2f%% consistent, %.2f%% coverage; selected depth-2 \"%s\" disagrees on %zu of %zu samples",
              consistency, coverage, selected[2]->conjunction().c_str(), disagreements, samples.size())};
}

Verdict end_to_end() {
  const PipelineRun& run = shared_pipeline();
  if (!run.ok) return {false, "pipeline failed: " + run.error};
  const std::string report = slurp(run.root / "bench" / "report.txt");
  const std::string csv = slurp(run.root / "bench" / "report.csv");
  // Overall row of report.csv: sequence,bd_rate_pct,anchor_me,test_me,me_delta,...
  const auto pos = csv.find("\noverall,");
  if (pos == std::string::npos) return {false, "report.csv has no overall row"};
  std::istringstream row(csv.substr(pos + 1));
  std::string name, bd, anchor_me, test_me, me_delta;
  std::getline(row, name, ',');
  std::getline(row, bd, ',');
  std::getline(row, anchor_me, ',');
  std::getline(row, test_me, ',');
  std::getline(row, me_delta, ',');
  if (bd == "n/a") return {false, "mean BD-rate undefined"};
  const double bd_v = std::stod(bd), delta_v = std::stod(me_delta);
  const bool reference = report.find("42.1%") != std::string::npos && report.find("0.7%") != std::string::npos;
  const auto bundle = load_criteria_bundle((run.root / "criteria" / "criteria.tsv").string());
  std::string crit;
  for (int d = 0; d < 3; ++d)
    if (const auto* c = bundle.for_depth(d)) crit += fmt(" d%d: %s;", d, c->conjunction().c_str());
  return {delta_v <= -20.0 && bd_v <= 3.0 && reference && run.seconds <= 600.0,
          fmt("mode evaluations %+.2f%% (%s -> %s), mean Y BD-rate %+.3f%%, reference values printed: %s; "
              "full pipeline %.1f s;%s",
              delta_v, anchor_me.c_str(), test_me.c_str(), bd_v, reference ? "yes" : "no", run.seconds, crit.c_str())};
}

Verdict bd_calculator() {
  const std::vector<RdPoint> a{{1000, 34.1, 37}, {1800, 36.9, 32}, {3300, 39.6, 27}, {6000, 42.0, 22}};
  const double same = bd_rate(a, a);
  auto doubled = a;
  for (auto& p : doubled) p.rate *= 2;
  const double twice = bd_rate(a, doubled);
  synth::Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::array<std::vector<RdPoint>, 2> curves;
    for (auto& c : curves) {
      double rate = 1000 + rng.unit() * 4000, q = 31 + rng.unit() * 3;
      for (int k = 0; k < 4; ++k) {
        c.push_back({rate, q, 37 - 5 * k});
        rate *= 1.3 + rng.unit();
        q += 1 + rng.unit() * 3;
      }
    }
    worst = std::max(worst, std::abs(bd_rate(curves[0], curves[1]) - oracle::bd_rate_quadrature(curves[0], curves[1])));
  }
  return {std::abs(same) == 0.0 && std::abs(twice - 100.0) <= 0.01 && worst <= 0.01,
          fmt("identical %.4f%%, 2x rate %+.4f%%, max |diff| vs quadrature %.2e%% over 100 curves", same, twice,
              worst)};
}

Verdict baseline_fidelity() {
  SequenceSpec spec;
  spec.archetype = Archetype::Mixed;
  spec.seed = 31;
  const Sequence seq = generate_sequence(spec);
  const CriteriaBundle empty;
  int identical = 0, total = 0;
  for (int qp : {22, 27, 32, 37}) {
    EncoderConfig cfg;
    cfg.base_qp = qp;
    const auto plain = encode_sequence(seq, cfg, nullptr);
    const auto with = encode_sequence(seq, cfg, &empty);
    bool same = plain.stats == with.stats && plain.frames.size() == with.frames.size();
    for (std::size_t i = 0; same && i < plain.frames.size(); ++i)
      same = plain.frames[i].ctus == with.frames[i].ctus && plain.frames[i].stats == with.frames[i].stats;
    identical += same;
    ++total;
  }
  return {identical == total, fmt("%d/%d QPs give identical CU trees and frame statistics", identical, total)};
}

Verdict determinism() {
  const PipelineRun& first = shared_pipeline();
  if (!first.ok) return {false, "pipeline failed: " + first.error};
  int reruns_ok = 0;
  std::string problems;
  for (const char* stage : kStages) {
    std::string err;
    const int code = cli({"rerun", (first.root / stage / "manifest.json").string(), "--out",
                          (first.root.parent_path() / "rerun" / stage).string()},
                         &err);
    if (code == 0)
      ++reruns_ok;
    else
      problems += fmt(" %s(exit %d)", stage, code);
  }
  // An independent second run of the whole chain.
  const PipelineRun second = run_pipeline(first.root.parent_path() / "run2");
  if (!second.ok) return {false, "second pipeline failed: " + second.error};
  int files = 0, differing = 0;
  const std::set<std::string> skip{"manifest.json", "report.txt", "timing.csv"};
  for (const char* stage : kStages)
    for (const auto& entry : fs::directory_iterator(first.root / stage)) {
      const std::string name = entry.path().filename().string();
      if (skip.count(name)) continue;
      ++files;
      if (slurp(entry.path()) != slurp(second.root / stage / name)) {
        ++differing;
        problems += " " + std::string(stage) + "/" + name;
      }
    }
  const int stages = static_cast<int>(std::size(kStages));
  return {reruns_ok == stages && differing == 0 && files > 0,
          fmt("%d/%d manifest reruns identical; second run: %d/%d output files identical%s", reruns_ok, stages,
              files - differing, files, problems.c_str())};
}

Verdict pearson_oracle() {
  synth::Rng rng(10);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(1000), y(1000);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = 1e3 * rng.unit() + (trial % 3) * 1e5;
      y[i] = trial % 2 ? double(rng.chance(0.2 + x[i] / 5e5)) : 0.7 * x[i] + 300 * rng.unit();
    }
    worst = std::max(worst, std::abs(pearson_correlation(x, y) - oracle::pearson_two_pass(x, y)));
  }
  Dataset d;
  d.samples = synth::noisy_dataset(600, 1, 4);
  const CorrelationTable t = correlation_table(d);
  const std::string grid = t.to_grid();
  const std::string header = grid.substr(0, grid.find('\n'));
  const bool order = header == "depth,SF,CBF,RDC,Bits,AND,QP,Lambda,QPO,PM,samples";
  const bool rows = std::count(grid.begin(), grid.end(), '\n') == 4 && t.r.size() == 3 && t.r[0].size() == 9;
  return {worst <= 1e-9 && order && rows,
          fmt("max |r - r_two_pass| %.2e over 50 column pairs; table %s, columns %s", worst,
              rows ? "3x9" : "WRONG SHAPE", order ? "SF CBF RDC Bits AND QP Lambda QPO PM" : "OUT OF ORDER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"Gini oracle", gini_oracle},
      {"CART oracle equivalence", cart_oracle},
      {"constraint compliance", constraints},
      {"pruning soundness", pruning_soundness},
      {"planted-rule recovery", planted_rule},
      {"end-to-end trade-off", end_to_end},
      {"BD-rate calculator", bd_calculator},
      {"baseline fidelity", baseline_fidelity},
      {"determinism", determinism},
      {"Pearson oracle", pearson_oracle},
  };
  const double limits[] = {1, 30, 60, 0, 0, 600, 0, 0, 0, 0};  // seconds, 0 = no limit
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limits[i] > 0 && secs > limits[i]) {
      v.pass = false;
      v.detail += fmt(" [over the %.0f s limit]", limits[i]);
    }
    failures += !v.pass;
    std::printf("%s %2zu %-26s %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / "cuskip_acceptance");
  std::printf("%s: %d of %zu criteria failed\n", failures ? "FAIL" : "PASS", failures, criteria.size());
  return failures ? 1 : 0;
}

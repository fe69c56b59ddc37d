#include "cuskip/cart.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cuskip/error.hpp"

namespace cuskip {

namespace {

__extension__ typedef __int128 Wide;

// Weighted child impurity scaled by N/2, kept as the exact fraction p / q so
// that candidates compare without rounding.
struct ImpurityKey {
  Wide p;
  Wide q;

  bool operator<(const ImpurityKey& other) const { return p * other.q < other.p * q; }
};

ImpurityKey node_key(const ClassCounts& c) {
  return {static_cast<Wide>(c.not_split) * static_cast<Wide>(c.split), static_cast<Wide>(c.total())};
}

ImpurityKey split_key(const ClassCounts& l, const ClassCounts& r) {
  const Wide nl = l.total(), nr = r.total();
  const Wide pl = static_cast<Wide>(l.not_split) * static_cast<Wide>(l.split);
  const Wide pr = static_cast<Wide>(r.not_split) * static_cast<Wide>(r.split);
  return {pl * nr + pr * nl, nl * nr};
}

double weighted_gini(const ClassCounts& l, const ClassCounts& r) {
  const double n = static_cast<double>(l.total() + r.total());
  return (static_cast<double>(l.total()) * gini_impurity(l) + static_cast<double>(r.total()) * gini_impurity(r)) / n;
}

ClassCounts count_rows(const TrainingView& view, std::span<const std::uint32_t> rows) {
  ClassCounts c;
  for (std::uint32_t r : rows) (view.labels[r] ? c.split : c.not_split) += 1;
  return c;
}

// Binned columns hold bin representatives (lower edges), so the cut sits on
// the upper one to route raw values the same way.
double threshold_between(bool binned, double lo, double hi) {
  if (binned) return hi;
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

void fill_statistics(TreeNode& node, std::uint64_t root_total) {
  node.majority_split = node.counts.split > node.counts.not_split;
  const std::uint64_t majority = node.majority_split ? node.counts.split : node.counts.not_split;
  node.accuracy = node.counts.total() ? static_cast<double>(majority) / node.counts.total() : 0.0;
  node.coverage = root_total ? static_cast<double>(node.counts.total()) / root_total : 0.0;
}

}  // namespace

double gini_impurity(const ClassCounts& counts) {
  const std::uint64_t n = counts.total();
  if (n == 0) throw DomainError("gini impurity of an empty node");
  const double p0 = static_cast<double>(counts.not_split) / n;
  const double p1 = static_cast<double>(counts.split) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

void TrainConstraints::validate() const {
  if (max_depth < 0) throw DomainError("max depth must be non-negative");
  if (!(min_leaf_fraction >= 0.0 && min_leaf_fraction < 1.0))
    throw DomainError("min leaf fraction must be in [0, 1)");
  if (bin_count != 0 && bin_count < 2) throw DomainError("bin count must be 0 or at least 2");
}

std::uint64_t TrainConstraints::min_leaf(std::uint64_t root_total) const {
  // The small slack keeps 0.001 * 100000 at 100 despite binary rounding.
  const double raw = min_leaf_fraction * static_cast<double>(root_total);
  const auto leaf = static_cast<std::uint64_t>(std::ceil(raw - 1e-9));
  return std::max<std::uint64_t>(leaf, 1);
}

bool is_binned_feature(FeatureId id) { return id == FeatureId::RDC || id == FeatureId::Bits; }

TrainingView make_training_view(std::span<const Sample> samples, const TrainConstraints& constraints) {
  TrainingView view;
  view.labels.reserve(samples.size());
  for (const Sample& s : samples) view.labels.push_back(s.label ? 1 : 0);
  for (FeatureId id : kAllFeatures) {
    auto& column = view.columns[static_cast<int>(id)];
    column.reserve(samples.size());
    for (const Sample& s : samples) column.push_back(s.features.value(id));
    if (constraints.bin_count >= 2 && is_binned_feature(id) && !column.empty()) {
      BinnedColumn binned = bin_continuous(column, constraints.bin_count);
      column = std::move(binned.values);
      view.bin_edges[static_cast<int>(id)] = std::move(binned.edges);
    }
  }
  return view;
}

std::optional<SplitCandidate> best_split(const TrainingView& view, std::span<const std::uint32_t> rows,
                                         std::span<const FeatureId> features, std::uint64_t min_leaf) {
  if (rows.empty()) return std::nullopt;
  const ClassCounts parent = count_rows(view, rows);
  if (parent.not_split == 0 || parent.split == 0) return std::nullopt;

  std::vector<FeatureId> order(features.begin(), features.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  std::optional<SplitCandidate> best;
  ImpurityKey best_key = node_key(parent);  // a split must beat the parent strictly
  std::vector<std::pair<double, std::uint8_t>> column(rows.size());

  for (FeatureId id : order) {
    const auto& values = view.columns[static_cast<int>(id)];
    const bool binned = !view.bin_edges[static_cast<int>(id)].empty();
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {values[rows[i]], view.labels[rows[i]]};
    std::sort(column.begin(), column.end());

    ClassCounts left;
    for (std::size_t i = 0; i + 1 < column.size(); ++i) {
      (column[i].second ? left.split : left.not_split) += 1;
      if (column[i].first == column[i + 1].first) continue;
      const ClassCounts right{parent.not_split - left.not_split, parent.split - left.split};
      if (left.total() < min_leaf || right.total() < min_leaf) continue;
      const ImpurityKey key = split_key(left, right);
      if (key < best_key) {
        best_key = key;
        best = SplitCandidate{{id, threshold_between(binned, column[i].first, column[i + 1].first)},
                              weighted_gini(left, right), left, right};
      }
    }
  }
  return best;
}

int DecisionTree::depth() const {
  int d = 0;
  for (const TreeNode& n : nodes) d = std::max(d, n.node_depth);
  return d;
}

std::vector<std::size_t> DecisionTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf()) out.push_back(i);
  return out;
}

std::vector<std::size_t> DecisionTree::path_to(std::size_t node) const {
  if (node >= nodes.size()) throw DomainError("node " + std::to_string(node) + " is not in the tree");
  std::vector<std::size_t> path;
  for (int i = static_cast<int>(node); i >= 0; i = nodes[i].parent) path.push_back(static_cast<std::size_t>(i));
  std::reverse(path.begin(), path.end());
  return path;
}

void DecisionTree::validate() const {
  if (nodes.empty()) throw DomainError("tree has no nodes");
  if (cu_depth < 0 || cu_depth > 2) throw DomainError("tree cu depth must be 0..2");
  const std::uint64_t total = root_total();
  const std::uint64_t min_leaf = constraints.min_leaf(total);
  if (root().parent != -1 || root().node_depth != 0) throw DomainError("malformed root");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (n.node_depth > constraints.max_depth) throw DomainError("node deeper than the depth limit");
    if (n.is_leaf()) {
      if (n.left != -1 || n.right != -1) throw DomainError("leaf with children");
      if (n.counts.total() < min_leaf && nodes.size() > 1) throw DomainError("leaf below the minimum size");
      continue;
    }
    if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= static_cast<int>(nodes.size()) ||
        n.right >= static_cast<int>(nodes.size()))
      throw DomainError("child index out of order");
    const TreeNode& l = nodes[n.left];
    const TreeNode& r = nodes[n.right];
    ClassCounts sum = l.counts;
    sum += r.counts;
    if (!(sum == n.counts)) throw DomainError("child counts do not add up to the parent");
    if (l.parent != static_cast<int>(i) || r.parent != static_cast<int>(i)) throw DomainError("bad parent link");
    if (l.node_depth != n.node_depth + 1 || r.node_depth != n.node_depth + 1) throw DomainError("bad node depth");
    if (l.position != 2 * n.position || r.position != 2 * n.position + 1) throw DomainError("bad node position");
    if (!(split_key(l.counts, r.counts) < node_key(n.counts)))
      throw DomainError("split does not lower impurity");
  }
}

DecisionTree grow_tree(std::span<const Sample> samples, int cu_depth, const TrainConstraints& constraints,
                       std::span<const FeatureId> features) {
  constraints.validate();
  if (samples.empty()) throw DomainError("cannot grow a tree from an empty sample set");
  if (cu_depth < 0 || cu_depth > 2) throw DomainError("tree cu depth must be 0..2");
  for (const Sample& s : samples)
    if (s.depth != cu_depth)
      throw DomainError("sample of depth " + std::to_string(s.depth) + " in a depth-" + std::to_string(cu_depth) +
                        " training set");

  DecisionTree tree;
  tree.cu_depth = cu_depth;
  tree.constraints = constraints;
  tree.features.assign(features.begin(), features.end());
  std::sort(tree.features.begin(), tree.features.end());
  tree.features.erase(std::unique(tree.features.begin(), tree.features.end()), tree.features.end());

  const TrainingView view = make_training_view(samples, constraints);
  tree.bin_edges = view.bin_edges;
  for (const Sample& s : samples) tree.training_sequences.push_back(s.provenance.sequence_id);
  std::sort(tree.training_sequences.begin(), tree.training_sequences.end());
  tree.training_sequences.erase(std::unique(tree.training_sequences.begin(), tree.training_sequences.end()),
                                tree.training_sequences.end());

  const std::uint64_t total = samples.size();
  const std::uint64_t min_leaf = constraints.min_leaf(total);

  std::vector<std::uint32_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0u);
  TreeNode root;
  root.counts = count_rows(view, all);
  tree.nodes.push_back(root);

  // Breadth-first growth stores nodes in level order as they are created.
  std::deque<std::pair<std::size_t, std::vector<std::uint32_t>>> queue;
  queue.emplace_back(0, std::move(all));
  while (!queue.empty()) {
    auto [index, rows] = std::move(queue.front());
    queue.pop_front();
    fill_statistics(tree.nodes[index], total);
    if (tree.nodes[index].node_depth >= constraints.max_depth) continue;
    const auto split = best_split(view, rows, tree.features, min_leaf);
    if (!split) continue;

    std::vector<std::uint32_t> left_rows, right_rows;
    const auto& column = view.columns[static_cast<int>(split->rule.feature)];
    for (std::uint32_t r : rows) (column[r] < split->rule.threshold ? left_rows : right_rows).push_back(r);

    TreeNode& parent = tree.nodes[index];
    parent.rule = split->rule;
    TreeNode left, right;
    left.parent = right.parent = static_cast<int>(index);
    left.node_depth = right.node_depth = parent.node_depth + 1;
    left.position = 2 * parent.position;
    right.position = 2 * parent.position + 1;
    left.counts = split->left;
    right.counts = split->right;
    parent.left = static_cast<int>(tree.nodes.size());
    parent.right = parent.left + 1;
    tree.nodes.push_back(left);
    tree.nodes.push_back(right);
    queue.emplace_back(tree.nodes.size() - 2, std::move(left_rows));
    queue.emplace_back(tree.nodes.size() - 1, std::move(right_rows));
  }
  return tree;
}

Prediction predict(const DecisionTree& tree, const FeatureVector& features) {
  std::size_t i = 0;
  while (!tree.nodes[i].is_leaf())
    i = static_cast<std::size_t>(tree.nodes[i].rule->goes_left(features) ? tree.nodes[i].left : tree.nodes[i].right);
  const TreeNode& leaf = tree.nodes[i];
  return {leaf.majority_split, i, leaf.accuracy, leaf.coverage};
}

bool reaches(const DecisionTree& tree, std::size_t node, const FeatureVector& features) {
  const auto path = tree.path_to(node);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const TreeNode& n = tree.nodes[path[k]];
    const bool left = n.rule->goes_left(features);
    if (static_cast<std::size_t>(left ? n.left : n.right) != path[k + 1]) return false;
  }
  return true;
}

CrossValidationReport kfold_validate(std::span<const Sample> samples, int cu_depth,
                                     const TrainConstraints& constraints, const CrossValidationConfig& config) {
  if (config.k < 2) throw DomainError("k-fold validation needs k >= 2");
  if (samples.size() < static_cast<std::size_t>(config.k))
    throw DomainError("k-fold validation needs at least k samples (" + std::to_string(samples.size()) + " < " +
                      std::to_string(config.k) + ")");

  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates on raw engine output; std distributions differ across
  // standard libraries.
  std::mt19937_64 rng(config.seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  CrossValidationReport report;
  report.cu_depth = cu_depth;
  report.fold_of.assign(n, 0);
  const std::size_t k = static_cast<std::size_t>(config.k);
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t pos = f * n / k; pos < (f + 1) * n / k; ++pos) report.fold_of[order[pos]] = static_cast<int>(f);

  double sum = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<Sample> train, held_out;
    for (std::size_t i = 0; i < n; ++i)
      (report.fold_of[i] == static_cast<int>(f) ? held_out : train).push_back(samples[i]);
    FoldResult result;
    result.train_size = train.size();
    result.validation_size = held_out.size();
    const DecisionTree tree = grow_tree(train, cu_depth, constraints);
    for (const Sample& s : held_out) result.correct += predict(tree, s.features).split == s.label;
    result.accuracy = static_cast<double>(result.correct) / static_cast<double>(held_out.size());
    sum += result.accuracy;
    report.folds.push_back(result);
  }
  report.mean_accuracy = sum / static_cast<double>(k);
  return report;
}

namespace {

using nlohmann::ordered_json;

ordered_json node_to_json(const DecisionTree& tree, std::size_t index) {
  const TreeNode& n = tree.nodes[index];
  ordered_json j;
  j["node_depth"] = n.node_depth;
  j["position"] = n.position;
  j["counts"] = {n.counts.not_split, n.counts.split};
  j["majority"] = n.majority_split ? "split" : "not-split";
  j["accuracy"] = n.accuracy;
  j["coverage"] = n.coverage;
  if (n.rule) {
    j["feature"] = std::string(feature_name(n.rule->feature));
    j["threshold"] = n.rule->threshold;
    j["left"] = node_to_json(tree, static_cast<std::size_t>(n.left));
    j["right"] = node_to_json(tree, static_cast<std::size_t>(n.right));
  }
  return j;
}

FeatureId feature_field(const ordered_json& j, const std::string& source) {
  const auto id = feature_from_name(j.get<std::string>());
  if (!id) throw ConfigError(source + ": unknown feature '" + j.get<std::string>() + "'");
  return *id;
}

}  // namespace

std::string tree_to_json(const DecisionTree& tree) {
  ordered_json j;
  j["format"] = "cuskip-tree v1";
  j["cu_depth"] = tree.cu_depth;
  j["constraints"] = {{"max_depth", tree.constraints.max_depth},
                      {"min_leaf_fraction", tree.constraints.min_leaf_fraction},
                      {"min_leaf", tree.constraints.min_leaf(tree.root_total())},
                      {"bin_count", tree.constraints.bin_count}};
  j["features"] = ordered_json::array();
  for (FeatureId id : tree.features) j["features"].push_back(std::string(feature_name(id)));
  j["bin_edges"] = ordered_json::object();
  for (FeatureId id : kAllFeatures)
    if (!tree.bin_edges[static_cast<int>(id)].empty())
      j["bin_edges"][std::string(feature_name(id))] = tree.bin_edges[static_cast<int>(id)];
  j["training_sequences"] = tree.training_sequences;
  j["root"] = node_to_json(tree, 0);
  return j.dump(1) + "\n";
}

DecisionTree tree_from_json(std::string_view text, const std::string& source) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 1, e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cuskip-tree v1") throw ConfigError(source + ": unsupported model format");
    DecisionTree tree;
    tree.cu_depth = j.at("cu_depth").get<int>();
    const auto& c = j.at("constraints");
    tree.constraints.max_depth = c.at("max_depth").get<int>();
    tree.constraints.min_leaf_fraction = c.at("min_leaf_fraction").get<double>();
    tree.constraints.bin_count = c.at("bin_count").get<int>();
    for (const auto& f : j.at("features")) tree.features.push_back(feature_field(f, source));
    for (const auto& [name, edges] : j.at("bin_edges").items())
      tree.bin_edges[static_cast<int>(feature_field(ordered_json(name), source))] = edges.get<std::vector<double>>();
    tree.training_sequences = j.at("training_sequences").get<std::vector<std::string>>();

    // Rebuild level order from the nested form.
    std::deque<std::pair<const ordered_json*, int>> queue{{&j.at("root"), -1}};
    while (!queue.empty()) {
      auto [node_json, parent] = queue.front();
      queue.pop_front();
      TreeNode n;
      n.parent = parent;
      n.node_depth = node_json->at("node_depth").get<int>();
      n.position = node_json->at("position").get<std::uint64_t>();
      n.counts = {node_json->at("counts").at(0).get<std::uint64_t>(), node_json->at("counts").at(1).get<std::uint64_t>()};
      n.majority_split = node_json->at("majority").get<std::string>() == "split";
      n.accuracy = node_json->at("accuracy").get<double>();
      n.coverage = node_json->at("coverage").get<double>();
      const int index = static_cast<int>(tree.nodes.size());
      if (parent >= 0) {
        TreeNode& p = tree.nodes[parent];
        (p.left < 0 ? p.left : p.right) = index;
      }
      if (node_json->contains("feature")) {
        n.rule = SplitRule{feature_field(node_json->at("feature"), source), node_json->at("threshold").get<double>()};
        queue.emplace_back(&node_json->at("left"), index);
        queue.emplace_back(&node_json->at("right"), index);
      }
      tree.nodes.push_back(n);
    }
    tree.validate();
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(source + ": malformed model: " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(source + ": inconsistent model: " + e.what());
  }
}

void save_tree(const DecisionTree& tree, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << tree_to_json(tree);
}

DecisionTree load_tree(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return tree_from_json(text.str(), path);
}

}  // namespace cuskip

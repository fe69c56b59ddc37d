#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cuskip/feature_vector.hpp"
#include "cuskip/features.hpp"

namespace cuskip {

struct ClassCounts {
  std::uint64_t not_split = 0;
  std::uint64_t split = 0;

  std::uint64_t total() const { return not_split + split; }
  ClassCounts& operator+=(const ClassCounts& other) {
    not_split += other.not_split;
    split += other.split;
    return *this;
  }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

// 1 - p0^2 - p1^2. Throws DomainError for an empty node.
double gini_impurity(const ClassCounts& counts);

struct TrainConstraints {
  int max_depth = 5;
  double min_leaf_fraction = 0.001;
  int bin_count = 32;  // quantile bins for RDC and Bits; 0 disables binning

  void validate() const;
  // ceil(min_leaf_fraction * root_total), at least 1.
  std::uint64_t min_leaf(std::uint64_t root_total) const;

  friend bool operator==(const TrainConstraints&, const TrainConstraints&) = default;
};

// Samples with value < threshold go left.
struct SplitRule {
  FeatureId feature = FeatureId::SF;
  double threshold = 0.0;

  bool goes_left(const FeatureVector& features) const { return features.value(feature) < threshold; }
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

struct SplitCandidate {
  SplitRule rule;
  double weighted_gini = 0.0;  // sample-weighted mean of the two child impurities
  ClassCounts left;
  ClassCounts right;
};

// Column-major training data. Binned features hold bin representatives,
// which are raw-domain values, so thresholds learned on them apply to raw
// features unchanged.
struct TrainingView {
  std::array<std::vector<double>, kFeatureCount> columns;
  std::vector<std::uint8_t> labels;  // 1 = split
  std::array<std::vector<double>, kFeatureCount> bin_edges;  // empty for unbinned features

  std::size_t size() const { return labels.size(); }
};

bool is_binned_feature(FeatureId id);
TrainingView make_training_view(std::span<const Sample> samples, const TrainConstraints& constraints);

// Lowest weighted child Gini over `features` and every threshold between
// consecutive distinct values of the rows. Absent when no admissible split
// strictly lowers impurity. Ties go to the lower feature id, then the lower
// threshold.
std::optional<SplitCandidate> best_split(const TrainingView& view, std::span<const std::uint32_t> rows,
                                         std::span<const FeatureId> features, std::uint64_t min_leaf);

struct TreeNode {
  std::optional<SplitRule> rule;  // absent for leaves
  int left = -1;
  int right = -1;
  int parent = -1;
  ClassCounts counts;
  int node_depth = 0;
  std::uint64_t position = 0;  // heap index within the level: children of p are 2p and 2p+1
  bool majority_split = false; // ties resolve to not-split
  double accuracy = 0.0;
  double coverage = 0.0;

  bool is_leaf() const { return !rule.has_value(); }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  int cu_depth = 0;
  TrainConstraints constraints;
  std::vector<FeatureId> features;  // candidate features used in training
  std::vector<TreeNode> nodes;      // breadth-first, left to right; nodes[0] is the root
  std::array<std::vector<double>, kFeatureCount> bin_edges;
  std::vector<std::string> training_sequences;

  const TreeNode& root() const { return nodes.front(); }
  std::uint64_t root_total() const { return nodes.front().counts.total(); }
  int depth() const;
  std::vector<std::size_t> leaves() const;
  // Indices from the root down to `node`; throws DomainError for a bad index.
  std::vector<std::size_t> path_to(std::size_t node) const;

  // Throws DomainError when a structural or statistical invariant fails.
  void validate() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

// Throws DomainError on an empty sample set or a sample of another depth.
DecisionTree grow_tree(std::span<const Sample> samples, int cu_depth, const TrainConstraints& constraints = {},
                       std::span<const FeatureId> features = kAllFeatures);

struct Prediction {
  bool split = false;
  std::size_t leaf = 0;
  double accuracy = 0.0;
  double coverage = 0.0;
};

Prediction predict(const DecisionTree& tree, const FeatureVector& features);
// True when `features` is routed through `node`.
bool reaches(const DecisionTree& tree, std::size_t node, const FeatureVector& features);

struct CrossValidationConfig {
  int k = 5;
  std::uint64_t seed = 1;
};

struct FoldResult {
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;

  friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

struct CrossValidationReport {
  int cu_depth = 0;
  std::vector<int> fold_of;  // fold index of each input sample
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;

  friend bool operator==(const CrossValidationReport&, const CrossValidationReport&) = default;
};

// Throws DomainError when fewer than k samples are given or k < 2.
CrossValidationReport kfold_validate(std::span<const Sample> samples, int cu_depth,
                                     const TrainConstraints& constraints, const CrossValidationConfig& config);

std::string tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(std::string_view text, const std::string& source = "<model>");
void save_tree(const DecisionTree& tree, const std::string& path);
DecisionTree load_tree(const std::string& path);

}  // namespace cuskip

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cuskip/cart.hpp"
#include "cuskip/skip_runtime.hpp"

namespace cuskip {

// Percentages; a node qualifies when accuracy >= min_accuracy and
// coverage >= min_coverage.
struct PruneThresholds {
  double min_accuracy = 97.0;
  double min_coverage = 17.0;

  // Throws DomainError unless both lie in (0, 100].
  void validate() const;
};

// Conjunction of the branch conditions from the root down to `node`, with
// bounds on the same feature merged. Integer features get integer bounds and
// collapse to an equality when a single value remains. The root yields an
// empty list. Throws DomainError when `node` is not in the tree.
std::vector<Predicate> path_conjunction(const DecisionTree& tree, std::size_t node);

// Majority not-split and both thresholds met. The root never qualifies: its
// conjunction is empty and would skip every CU of the depth.
bool node_qualifies(const DecisionTree& tree, std::size_t node, const PruneThresholds& thresholds);

SkipCriterion criterion_from_node(const DecisionTree& tree, std::size_t node);

// One criterion per qualifying node, in breadth-first order. Empty when the
// thresholds are too strict.
std::vector<SkipCriterion> harvest_criteria(const DecisionTree& tree, const PruneThresholds& thresholds);

struct PlotRow {
  std::size_t index = 0;  // breadth-first node order
  int node_depth = 0;
  std::uint64_t position = 0;
  std::uint64_t samples = 0;
  double coverage_pct = 0.0;
  double accuracy_pct = 0.0;
  bool majority_split = false;
};

std::vector<PlotRow> threshold_plot_data(const DecisionTree& tree);
// Comma-separated with a header row.
std::string plot_data_csv(const std::vector<PlotRow>& rows);
// Whitespace-separated columns with '#' comments, plottable with
//   plot "f.dat" using 1:5 with lines, "" using 1:6 with lines
std::string plot_data_gnuplot(const std::vector<PlotRow>& rows, const PruneThresholds& thresholds);

// Per depth, the criterion with the largest coverage; ties go to higher
// accuracy, then fewer predicates, then the earlier node.
std::array<std::optional<SkipCriterion>, 3> select_per_depth(const std::array<std::vector<SkipCriterion>, 3>& harvested);

}  // namespace cuskip

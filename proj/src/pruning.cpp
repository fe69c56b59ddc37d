#include "cuskip/pruning.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cuskip/error.hpp"

namespace cuskip {

namespace {

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();  // x >= lower
  double upper = std::numeric_limits<double>::infinity();   // x < upper
};

// Compare accuracies a/b and c/d exactly.
bool more_accurate(const SkipCriterion& a, const SkipCriterion& b) {
  return static_cast<long double>(a.not_split) * b.covered > static_cast<long double>(b.not_split) * a.covered;
}

}  // namespace

void PruneThresholds::validate() const {
  if (!(min_accuracy > 0.0 && min_accuracy <= 100.0)) throw DomainError("minimum accuracy must be in (0, 100]");
  if (!(min_coverage > 0.0 && min_coverage <= 100.0)) throw DomainError("minimum coverage must be in (0, 100]");
}

std::vector<Predicate> path_conjunction(const DecisionTree& tree, std::size_t node) {
  const auto path = tree.path_to(node);
  std::array<Bounds, kFeatureCount> bounds;
  std::array<bool, kFeatureCount> used{};
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const TreeNode& n = tree.nodes[path[k]];
    const int f = static_cast<int>(n.rule->feature);
    used[f] = true;
    if (static_cast<std::size_t>(n.left) == path[k + 1])
      bounds[f].upper = std::min(bounds[f].upper, n.rule->threshold);
    else
      bounds[f].lower = std::max(bounds[f].lower, n.rule->threshold);
  }

  std::vector<Predicate> out;
  for (FeatureId id : kAllFeatures) {
    const int f = static_cast<int>(id);
    if (!used[f]) continue;
    Bounds b = bounds[f];
    if (is_integer_valued(id)) {
      // x >= 1.5 means x >= 2 and x < 1.5 means x < 2 for integers.
      b.lower = std::ceil(b.lower);
      b.upper = std::ceil(b.upper);
      if (const auto domain = integer_domain(id)) {
        if (b.lower <= domain->lo) b.lower = -std::numeric_limits<double>::infinity();
        if (b.upper > domain->hi) b.upper = std::numeric_limits<double>::infinity();
        const double lo = std::max<double>(b.lower, domain->lo);
        const double hi = std::min<double>(b.upper - 1, domain->hi);
        if (lo == hi) {
          out.push_back({id, Comparator::Equal, lo});
          continue;
        }
      } else if (b.upper - b.lower == 1) {
        out.push_back({id, Comparator::Equal, b.lower});
        continue;
      }
    }
    if (std::isfinite(b.lower)) out.push_back({id, Comparator::GreaterEqual, b.lower});
    if (std::isfinite(b.upper)) out.push_back({id, Comparator::Less, b.upper});
  }
  return out;
}

bool node_qualifies(const DecisionTree& tree, std::size_t node, const PruneThresholds& thresholds) {
  if (node >= tree.nodes.size()) throw DomainError("node " + std::to_string(node) + " is not in the tree");
  if (node == 0) return false;
  const TreeNode& n = tree.nodes[node];
  if (n.majority_split) return false;
  const double covered = static_cast<double>(n.counts.total());
  const double not_split = static_cast<double>(n.counts.not_split);
  const double total = static_cast<double>(tree.root_total());
  return not_split * 100.0 >= thresholds.min_accuracy * covered && covered * 100.0 >= thresholds.min_coverage * total;
}

SkipCriterion criterion_from_node(const DecisionTree& tree, std::size_t node) {
  const TreeNode& n = tree.nodes.at(node);
  SkipCriterion c;
  c.cu_depth = tree.cu_depth;
  c.predicates = path_conjunction(tree, node);
  c.source = {n.node_depth, n.position};
  c.covered = n.counts.total();
  c.not_split = n.counts.not_split;
  c.depth_total = tree.root_total();
  return c;
}

std::vector<SkipCriterion> harvest_criteria(const DecisionTree& tree, const PruneThresholds& thresholds) {
  thresholds.validate();
  std::vector<SkipCriterion> out;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (node_qualifies(tree, i, thresholds)) out.push_back(criterion_from_node(tree, i));
  return out;
}

std::vector<PlotRow> threshold_plot_data(const DecisionTree& tree) {
  std::vector<PlotRow> rows;
  rows.reserve(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    rows.push_back({i, n.node_depth, n.position, n.counts.total(), 100.0 * n.coverage, 100.0 * n.accuracy,
                    n.majority_split});
  }
  return rows;
}

std::string plot_data_csv(const std::vector<PlotRow>& rows) {
  std::ostringstream out;
  out << "node,node_depth,position,samples,coverage_pct,accuracy_pct,majority\n";
  for (const PlotRow& r : rows)
    out << r.index << ',' << r.node_depth << ',' << r.position << ',' << r.samples << ','
        << format_number(r.coverage_pct) << ',' << format_number(r.accuracy_pct) << ','
        << (r.majority_split ? "split" : "not-split") << '\n';
  return out.str();
}

std::string plot_data_gnuplot(const std::vector<PlotRow>& rows, const PruneThresholds& thresholds) {
  std::ostringstream out;
  out << "# node ordering: breadth-first, left to right\n";
  out << "# thresholds: accuracy " << format_number(thresholds.min_accuracy) << "%, coverage "
      << format_number(thresholds.min_coverage) << "%\n";
  out << "# majority: 0 = not-split, 1 = split\n";
  out << "# node node_depth position samples coverage_pct accuracy_pct majority\n";
  char line[160];
  for (const PlotRow& r : rows) {
    std::snprintf(line, sizeof line, "%zu %d %llu %llu %.6f %.6f %d\n", r.index, r.node_depth,
                  static_cast<unsigned long long>(r.position), static_cast<unsigned long long>(r.samples),
                  r.coverage_pct, r.accuracy_pct, r.majority_split ? 1 : 0);
    out << line;
  }
  return out.str();
}

std::array<std::optional<SkipCriterion>, 3> select_per_depth(
    const std::array<std::vector<SkipCriterion>, 3>& harvested) {
  std::array<std::optional<SkipCriterion>, 3> out;
  for (int d = 0; d < 3; ++d) {
    const SkipCriterion* best = nullptr;
    for (const SkipCriterion& c : harvested[d]) {
      if (c.cu_depth != d) throw DomainError("criterion for depth " + std::to_string(c.cu_depth) + " in depth-" +
                                             std::to_string(d) + " list");
      if (!best) {
        best = &c;
        continue;
      }
      // Coverage compares on counts; all criteria of a depth share depth_total.
      if (c.covered != best->covered) {
        if (c.covered > best->covered) best = &c;
      } else if (more_accurate(c, *best)) {
        best = &c;
      } else if (!more_accurate(*best, c) && c.predicates.size() < best->predicates.size()) {
        best = &c;
      }
    }
    if (best) out[d] = *best;
  }
  return out;
}

}  // namespace cuskip

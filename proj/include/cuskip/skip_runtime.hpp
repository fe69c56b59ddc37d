#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cuskip/feature_vector.hpp"

namespace cuskip {

enum class Comparator { Less, GreaterEqual, Equal };

std::string_view comparator_symbol(Comparator op);

struct Predicate {
  FeatureId feature = FeatureId::Bits;
  Comparator op = Comparator::Less;
  double value = 0.0;

  bool holds(const FeatureVector& features) const;
  std::string to_string() const;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct SourceNode {
  int node_depth = 0;
  std::uint64_t position = 0;  // left-to-right index within its tree level

  friend bool operator==(const SourceNode&, const SourceNode&) = default;
};

// A conjunction of threshold predicates that, when it holds for a CU after
// the whole-CU tests, lets the encoder keep the CU unsplit without trying the
// four-way split.
struct SkipCriterion {
  int cu_depth = 0;
  std::vector<Predicate> predicates;
  SourceNode source;
  // Training statistics: samples reaching the source node, how many of them
  // were not split, and the size of the per-depth training set.
  std::uint64_t covered = 0;
  std::uint64_t not_split = 0;
  std::uint64_t depth_total = 0;

  double accuracy() const { return covered ? static_cast<double>(not_split) / covered : 0.0; }
  double coverage() const { return depth_total ? static_cast<double>(covered) / depth_total : 0.0; }

  // Human-readable conjunction, e.g. "Bits < 50 & PM = 0".
  std::string conjunction() const;

  friend bool operator==(const SkipCriterion&, const SkipCriterion&) = default;
};

// Parses "Bits < 50 & PM = 0" (',' is accepted as a conjunction separator
// too). Throws ConfigError on unknown feature names or malformed terms.
std::vector<Predicate> parse_conjunction(std::string_view text);

struct BundleProvenance {
  std::string run_id;
  double min_accuracy = 0.0;  // percent
  double min_coverage = 0.0;  // percent
  std::vector<std::string> training_sequences;

  friend bool operator==(const BundleProvenance&, const BundleProvenance&) = default;
};

// At most one criterion per CU depth 0..2. Immutable once loaded.
struct CriteriaBundle {
  std::array<std::optional<SkipCriterion>, 3> per_depth;
  BundleProvenance provenance;

  const SkipCriterion* for_depth(int depth) const;
  bool empty() const;
  std::size_t size() const;

  // Throws ConfigError if a criterion sits in the wrong slot.
  void validate() const;

  friend bool operator==(const CriteriaBundle&, const CriteriaBundle&) = default;
};

bool evaluate_criterion(const SkipCriterion& criterion, const FeatureVector& features);

enum class SkipDecision { SkipRecursion, Continue };

SkipDecision apply_skip(int cu_depth, const FeatureVector& features, const CriteriaBundle* bundle);

// Criteria file: '#' header lines carrying provenance, then one
// tab-separated row per criterion:
//   depth  criterion  accuracy_pct  coverage_pct  covered  not_split  depth_total
std::string format_criteria_file(const std::vector<SkipCriterion>& criteria, const BundleProvenance& provenance);
void write_criteria_file(const std::string& path, const std::vector<SkipCriterion>& criteria,
                         const BundleProvenance& provenance);

struct CriteriaFile {
  std::vector<SkipCriterion> criteria;
  BundleProvenance provenance;
};

CriteriaFile parse_criteria_file(std::string_view text, const std::string& source = "<criteria>");
CriteriaFile read_criteria_file(const std::string& path);

// Loads a criteria file into a bundle; more than one criterion for the same
// depth is a ConfigError.
CriteriaBundle load_criteria_bundle(const std::string& path);
CriteriaBundle make_bundle(const std::vector<SkipCriterion>& criteria, BundleProvenance provenance = {});

// Shortest round-trip decimal form, used wherever thresholds are written.
std::string format_number(double value);

}  // namespace cuskip

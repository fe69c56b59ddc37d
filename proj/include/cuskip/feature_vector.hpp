#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace cuskip {

// The nine per-CU features, in correlation-table column order. The numeric
// value of each enumerator is the feature id used by trees and criteria.
enum class FeatureId : int { SF = 0, CBF, RDC, Bits, AND, QP, Lambda, QPO, PM };

inline constexpr int kFeatureCount = 9;

inline constexpr std::array<FeatureId, kFeatureCount> kAllFeatures = {
    FeatureId::SF, FeatureId::CBF,    FeatureId::RDC, FeatureId::Bits, FeatureId::AND,
    FeatureId::QP, FeatureId::Lambda, FeatureId::QPO, FeatureId::PM};

std::string_view feature_name(FeatureId id);

// Case-insensitive. Accepts "λ" for Lambda and "RCD" as a spelling of RDC.
std::optional<FeatureId> feature_from_name(std::string_view name);

// Integer-valued features with a closed domain [lo, hi]; criteria on these
// are normalised to integer bounds or equalities.
struct IntegerDomain {
  int lo;
  int hi;
};
std::optional<IntegerDomain> integer_domain(FeatureId id);

// True for features that only take integer values (domain may be open).
bool is_integer_valued(FeatureId id);

struct FeatureVector {
  bool sf = false;                  // skip flag of the merge/skip test
  bool cbf = false;                 // luma coded block flag of the merge/skip test
  double rdc = 0.0;                 // RD cost J of the merge/skip test
  double bits = 0.0;                // rate of the merge/skip test
  double avg_neighbour_depth = 0.0; // AND, in [0, 3]
  int qp = 0;                       // effective QP
  double lambda = 0.0;
  int qpo = 1;                      // QP offset, 1..4
  int pm = 0;                       // partition mode of the best whole-CU inter candidate

  double value(FeatureId id) const;

  // Throws DomainError when an invariant is violated.
  void validate() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

}  // namespace cuskip

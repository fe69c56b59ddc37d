#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cuskip/codec.hpp"
#include "cuskip/feature_vector.hpp"

namespace cuskip {

struct Provenance {
  std::string sequence_id;
  int base_qp = 0;
  int frame_index = 0;
  int cu_x = 0;
  int cu_y = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
  friend auto operator<=>(const Provenance&, const Provenance&) = default;
};

// One CU decision: features harvested after the whole-CU tests and the
// full-RDO split decision as label.
struct Sample {
  FeatureVector features;
  int depth = 0;       // CU depth 0..2
  bool label = false;  // true = split
  Provenance provenance;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;

  std::vector<Sample> at_depth(int depth) const;
  std::array<std::size_t, 3> depth_counts() const;

  // Concatenates and sorts by (provenance, depth), so the result does not
  // depend on the order in which partial datasets arrive.
  static Dataset merge(std::vector<Dataset> parts);

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Mean of the available neighbour depths; `own_depth` when neither exists.
double average_neighbour_depth(std::optional<int> above, std::optional<int> left, int own_depth);

// Throws ContractViolation unless both whole-CU tests are present.
FeatureVector features_from_evaluation(const CuEvaluation& evaluation);
Sample extract_sample(const CuEvaluation& evaluation, bool full_rdo_label, Provenance provenance);

// Walks the final CU trees of a full-RDO encode and emits one sample per CU
// at depth 0..2, labelled with that CU's split flag.
std::vector<Sample> collect_samples(const EncodedFrame& frame, const std::string& sequence_id, int base_qp,
                                    int frame_index);
Dataset collect_samples(const EncodedSequence& encoded, const std::string& sequence_id, int base_qp);

// Pearson product-moment coefficient. Throws UndefinedResult when either
// column is constant or shorter than two values.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

struct CorrelationTable {
  // [cu depth][feature id]; signed coefficient, nullopt when undefined.
  std::array<std::array<std::optional<double>, kFeatureCount>, 3> r{};
  std::array<std::size_t, 3> sample_counts{};

  std::optional<double> abs_at(int depth, FeatureId id) const;

  // Aligned text with |r| values and "n/a" for undefined cells.
  std::string to_text() const;
  // Comma-separated grid with header row; signed r in a second block.
  std::string to_grid() const;
};

CorrelationTable correlation_table(const Dataset& dataset);

struct BinnedColumn {
  std::vector<double> values;  // each value replaced by its bin representative
  std::vector<double> edges;   // ascending; bin index = number of edges <= value

  std::size_t bin_of(double value) const;
};

// Equal-frequency bins with linearly interpolated quantile edges. When the
// column has no more distinct values than bins, each distinct value gets its
// own bin with edges at the midpoints. The representative of bin 0 is the
// column minimum, of bin i > 0 its lower edge.
BinnedColumn bin_continuous(std::span<const double> values, int bin_count);

// CSV with a header row; see kDatasetColumns for the layout.
extern const std::array<std::string_view, 16> kDatasetColumns;
std::string format_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text, const std::string& source = "<dataset>");
void export_dataset(const Dataset& dataset, const std::string& path);
Dataset import_dataset(const std::string& path);

}  // namespace cuskip

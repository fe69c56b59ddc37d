#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cuskip/feature_vector.hpp"
#include "cuskip/frame.hpp"
#include "cuskip/simd/pixel_kernels.hpp"
#include "cuskip/skip_runtime.hpp"

namespace cuskip {

inline constexpr int kMaxCuDepth = 3;

// J = D + lambda * R. Throws DomainError on negative distortion or rate, or
// non-positive lambda.
double rd_cost(double distortion, double bits, double lambda);

// lambda = scale * 2^((qp - 12) / 3). The integer part of the exponent is
// applied with ldexp so that QPs three steps apart differ by exactly 2x.
double lambda_from_qp(int qp, double scale = 0.57);

struct MotionVector {
  int x = 0;
  int y = 0;
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

struct CodingUnit {
  int x = 0;
  int y = 0;
  int depth = 0;

  int size() const { return kCtuSize >> depth; }
  // Throws DomainError unless depth is 0..3 and the origin is aligned.
  void validate() const;
  CodingUnit child(int index) const;

  friend bool operator==(const CodingUnit&, const CodingUnit&) = default;
};

enum class ModeKind { MergeSkip, InterWhole };

// pm values: 0 = 2Nx2N, 1 = 2NxN (top/bottom), 2 = Nx2N (left/right).
inline constexpr int kPartitionModes = 3;

struct ModeResult {
  ModeKind kind = ModeKind::MergeSkip;
  int pm = 0;
  std::uint64_t distortion = 0;
  std::uint32_t bits = 0;
  double rd_cost = 0.0;
  bool cbf = false;
  bool skip_flag = false;
  // One vector per prediction partition; pm 0 uses only the first.
  std::array<MotionVector, 2> motion{};

  friend bool operator==(const ModeResult&, const ModeResult&) = default;
};

struct EncoderConfig {
  int base_qp = 22;
  double lambda_scale = 0.57;
  int search_range = 4;  // full-pel search window, +/- pixels around zero

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Per-frame coding parameters derived from the config and the frame's QP offset.
struct CodingSetup {
  int qp = 0;
  int qp_offset = 1;
  double lambda = 0.0;
  int search_range = 4;
  simd::QuantParams quant;

  static CodingSetup make(const EncoderConfig& config, int qp_offset);
};

// Decisions already taken in the current frame, kept on a 4x4 grid: the depth
// and motion of the leaf covering each cell. Supplies the merge candidate and
// the neighbour depths for AND.
class NeighbourContext {
 public:
  struct Leaf {
    int depth;
    MotionVector motion;
  };

  NeighbourContext(int width, int height);

  std::optional<Leaf> left_of(const CodingUnit& cu) const;
  std::optional<Leaf> above_of(const CodingUnit& cu) const;

  // Left neighbour's motion, else the above neighbour's, else zero.
  MotionVector merge_candidate(const CodingUnit& cu) const;

  void record_leaf(const CodingUnit& cu, const ModeResult& mode);

 private:
  static constexpr int kGrid = 4;
  std::optional<Leaf> cell(int x, int y) const;

  int cols_;
  int rows_;
  std::vector<std::int8_t> depth_;
  std::vector<MotionVector> motion_;
};

struct RdoStats {
  std::uint64_t mode_evaluations = 0;   // merge/skip tests + inter partition-mode candidates
  std::uint64_t cus_evaluated = 0;      // partition_cu invocations
  std::uint64_t recursions_entered = 0; // four-way split trials started
  std::uint64_t skip_events = 0;        // criteria that fired

  RdoStats& operator+=(const RdoStats& other);
  friend bool operator==(const RdoStats&, const RdoStats&) = default;
};

struct CuTree {
  CodingUnit unit;
  bool split = false;
  std::vector<CuTree> children;  // exactly four when split
  ModeResult merge;              // merge/skip test result
  ModeResult inter;              // best whole-CU inter candidate
  ModeResult chosen_mode;        // cheaper of merge and inter; used when not split
  FeatureVector features;        // harvested after both whole-CU tests
  bool skipped_by_criterion = false;

  // Totals over the subtree, including split-flag bits.
  std::uint64_t distortion = 0;
  std::uint64_t bits = 0;
  double cost = 0.0;
  double whole_cost = 0.0;                // chosen_mode plus split flag
  std::optional<double> split_cost;       // present when the split was evaluated

  friend bool operator==(const CuTree&, const CuTree&) = default;
};

// State after both whole-CU tests of one CU, before any split decision.
struct CuEvaluation {
  CodingUnit unit;
  std::optional<ModeResult> merge;
  std::optional<ModeResult> inter;
  double avg_neighbour_depth = 0.0;
  int qp = 0;
  int qp_offset = 1;
  double lambda = 0.0;
};

ModeResult merge_skip_test(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference,
                           const NeighbourContext& context, const CodingSetup& setup);

ModeResult whole_cu_inter_test(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference,
                               const NeighbourContext& context, const CodingSetup& setup);

struct PartitionResult {
  CuTree tree;
  RdoStats stats;
};

// Full RDO of one CU and its quad-tree below it. With a criteria bundle, a
// criterion that holds for this CU's depth keeps it unsplit without trying
// the split. The chosen decision is recorded into `context`.
PartitionResult partition_cu(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference,
                             NeighbourContext& context, const CodingSetup& setup,
                             const CriteriaBundle* criteria = nullptr);

struct FrameStats {
  double total_rd_cost = 0.0;
  std::uint64_t total_bits = 0;
  std::uint64_t total_distortion = 0;
  RdoStats rdo;

  friend bool operator==(const FrameStats&, const FrameStats&) = default;
};

struct EncodedFrame {
  std::vector<CuTree> ctus;  // raster order
  FrameStats stats;
  CodingSetup setup;
};

EncodedFrame encode_frame(const Frame& frame, const Frame& reference, const EncoderConfig& config,
                          const CriteriaBundle* criteria = nullptr);

struct EncodedSequence {
  std::vector<EncodedFrame> frames;  // frames 1..n-1, each predicted from its predecessor
  FrameStats stats;                  // sum over frames
  std::uint64_t pixels = 0;          // luma samples coded
};

// Frame 0 serves only as the first reference.
EncodedSequence encode_sequence(const Sequence& sequence, const EncoderConfig& config,
                                const CriteriaBundle* criteria = nullptr);

double psnr(std::uint64_t distortion, std::uint64_t pixels);

// Leaf areas of a CTU tree tile it exactly; used by tests and sanity checks.
bool tiles_exactly(const CuTree& tree);

}  // namespace cuskip

#include "cuskip/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "cuskip/error.hpp"
#include "cuskip/features.hpp"

namespace cuskip {

namespace {

// Toy bit model. Header costs are fixed per mode; residual cost grows with
// the count and magnitude class of non-zero quantised samples.
constexpr std::uint32_t kSplitFlagBits = 1;
constexpr std::uint32_t kSkipBits = 2;             // skip flag + merge index
constexpr std::uint32_t kMergeResidualBits = 4;    // skip flag, merge flag, merge index, cbf
constexpr std::uint32_t kInterHeaderBits = 3;      // skip flag, merge flag, cbf
constexpr std::array<std::uint32_t, kPartitionModes> kPartitionModeBits = {1, 3, 3};
constexpr std::uint32_t kBitsPerCoefficient = 4;   // significance, position class, sign

std::uint32_t residual_bits(const simd::ResidualStats& r) {
  return kBitsPerCoefficient * r.nonzero + 2 * r.magnitude_log2;
}

// Signed Exp-Golomb length.
std::uint32_t signed_golomb_bits(int v) {
  const auto code = static_cast<std::uint32_t>(v > 0 ? 2 * v - 1 : -2 * v);
  return 2 * static_cast<std::uint32_t>(std::bit_width(code + 1) - 1) + 1;
}

std::uint32_t mvd_bits(MotionVector mv, MotionVector predictor) {
  return signed_golomb_bits(mv.x - predictor.x) + signed_golomb_bits(mv.y - predictor.y);
}

struct Rect {
  int x, y, w, h;
};

int partition_count(int pm) { return pm == 0 ? 1 : 2; }

Rect partition_rect(const CodingUnit& cu, int pm, int index) {
  const int s = cu.size();
  switch (pm) {
    case 1:
      return {cu.x, cu.y + index * s / 2, s, s / 2};
    case 2:
      return {cu.x + index * s / 2, cu.y, s / 2, s};
    default:
      return {cu.x, cu.y, s, s};
  }
}

void check_inputs(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference) {
  cu.validate();
  if (cu.x + cu.size() > frame.width || cu.y + cu.size() > frame.height)
    throw DomainError("CU at (" + std::to_string(cu.x) + "," + std::to_string(cu.y) + ") size " +
                      std::to_string(cu.size()) + " lies outside the frame");
  if (reference.width() != frame.width || reference.height() != frame.height)
    throw DomainError("reference dimensions differ from the current frame");
}

const std::uint8_t* source_at(const Frame& frame, int x, int y) { return frame.row(y) + x; }

ModeResult finish(ModeResult m, double lambda) {
  m.rd_cost = rd_cost(static_cast<double>(m.distortion), static_cast<double>(m.bits), lambda);
  return m;
}

MotionVector search_partition(const Rect& r, const Frame& frame, const PaddedPlane& reference,
                              MotionVector predictor, const CodingSetup& setup) {
  const auto& kernels = simd::active_kernels();
  const std::uint8_t* src = source_at(frame, r.x, r.y);
  MotionVector best{};
  double best_cost = std::numeric_limits<double>::infinity();
  for (int dy = -setup.search_range; dy <= setup.search_range; ++dy) {
    for (int dx = -setup.search_range; dx <= setup.search_range; ++dx) {
      const MotionVector mv{dx, dy};
      const std::uint64_t ssd =
          kernels.ssd(src, frame.stride(), reference.at(r.x + dx, r.y + dy), reference.stride(), r.w, r.h);
      const double cost = static_cast<double>(ssd) + setup.lambda * mvd_bits(mv, predictor);
      if (cost < best_cost) {
        best_cost = cost;
        best = mv;
      }
    }
  }
  return best;
}

}  // namespace

double rd_cost(double distortion, double bits, double lambda) {
  if (distortion < 0.0) throw DomainError("distortion must be non-negative");
  if (bits < 0.0) throw DomainError("rate must be non-negative");
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  return distortion + lambda * bits;
}

double lambda_from_qp(int qp, double scale) {
  if (qp < 0 || qp > 51) throw DomainError("QP must lie in [0, 51], got " + std::to_string(qp));
  if (!(scale > 0.0)) throw DomainError("lambda scale must be positive");
  static const std::array<double, 3> kThirdPowers = {1.0, std::cbrt(2.0), std::cbrt(4.0)};
  const int steps = qp - 12;
  const int whole = steps >= 0 ? steps / 3 : -((-steps + 2) / 3);
  const int rem = steps - 3 * whole;
  return std::ldexp(scale * kThirdPowers[rem], whole);
}

void CodingUnit::validate() const {
  if (depth < 0 || depth > kMaxCuDepth)
    throw DomainError("CU depth must lie in [0, 3], got " + std::to_string(depth));
  if (x < 0 || y < 0 || x % size() != 0 || y % size() != 0)
    throw DomainError("CU origin (" + std::to_string(x) + "," + std::to_string(y) + ") is not aligned to size " +
                      std::to_string(size()));
}

CodingUnit CodingUnit::child(int index) const {
  const int half = size() / 2;
  return {x + (index & 1) * half, y + (index >> 1) * half, depth + 1};
}

void EncoderConfig::validate() const {
  if (base_qp < 0 || base_qp + 4 > 51) throw DomainError("base QP must lie in [0, 47]");
  if (!(lambda_scale > 0.0)) throw DomainError("lambda scale must be positive");
  if (search_range < 0 || search_range > 16) throw DomainError("search range must lie in [0, 16]");
}

CodingSetup CodingSetup::make(const EncoderConfig& config, int qp_offset) {
  config.validate();
  if (qp_offset < 1 || qp_offset > 4) throw DomainError("qp_offset must lie in [1, 4]");
  CodingSetup setup;
  setup.qp = config.base_qp + qp_offset;
  setup.qp_offset = qp_offset;
  setup.lambda = lambda_from_qp(setup.qp, config.lambda_scale);
  setup.search_range = config.search_range;
  setup.quant = simd::quant_params_for_qp(setup.qp);
  return setup;
}

NeighbourContext::NeighbourContext(int width, int height)
    : cols_(width / kGrid),
      rows_(height / kGrid),
      depth_(static_cast<std::size_t>(cols_) * rows_, -1),
      motion_(static_cast<std::size_t>(cols_) * rows_) {}

std::optional<NeighbourContext::Leaf> NeighbourContext::cell(int x, int y) const {
  if (x < 0 || y < 0) return std::nullopt;
  const int cx = x / kGrid, cy = y / kGrid;
  if (cx >= cols_ || cy >= rows_) return std::nullopt;
  const auto i = static_cast<std::size_t>(cy) * cols_ + cx;
  if (depth_[i] < 0) return std::nullopt;
  return Leaf{depth_[i], motion_[i]};
}

std::optional<NeighbourContext::Leaf> NeighbourContext::left_of(const CodingUnit& cu) const {
  return cell(cu.x - 1, cu.y);
}

std::optional<NeighbourContext::Leaf> NeighbourContext::above_of(const CodingUnit& cu) const {
  return cell(cu.x, cu.y - 1);
}

MotionVector NeighbourContext::merge_candidate(const CodingUnit& cu) const {
  if (auto left = left_of(cu)) return left->motion;
  if (auto above = above_of(cu)) return above->motion;
  return {};
}

void NeighbourContext::record_leaf(const CodingUnit& cu, const ModeResult& mode) {
  for (int p = 0; p < partition_count(mode.pm); ++p) {
    const Rect r = partition_rect(cu, mode.pm, p);
    for (int y = r.y / kGrid; y < (r.y + r.h) / kGrid; ++y) {
      for (int x = r.x / kGrid; x < (r.x + r.w) / kGrid; ++x) {
        const auto i = static_cast<std::size_t>(y) * cols_ + x;
        depth_[i] = static_cast<std::int8_t>(cu.depth);
        motion_[i] = mode.motion[p];
      }
    }
  }
}

RdoStats& RdoStats::operator+=(const RdoStats& other) {
  mode_evaluations += other.mode_evaluations;
  cus_evaluated += other.cus_evaluated;
  recursions_entered += other.recursions_entered;
  skip_events += other.skip_events;
  return *this;
}

ModeResult merge_skip_test(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference,
                           const NeighbourContext& context, const CodingSetup& setup) {
  check_inputs(cu, frame, reference);
  const auto& kernels = simd::active_kernels();
  const MotionVector candidate = context.merge_candidate(cu);
  const int s = cu.size();
  const std::uint8_t* src = source_at(frame, cu.x, cu.y);
  const std::uint8_t* pred = reference.at(cu.x + candidate.x, cu.y + candidate.y);

  ModeResult skip;
  skip.kind = ModeKind::MergeSkip;
  skip.pm = 0;
  skip.motion = {candidate, candidate};
  skip.distortion = kernels.ssd(src, frame.stride(), pred, reference.stride(), s, s);
  skip.bits = kSkipBits;
  skip.skip_flag = true;
  skip.cbf = false;
  skip = finish(skip, setup.lambda);

  const simd::ResidualStats residual =
      kernels.quantize_residual(src, frame.stride(), pred, reference.stride(), s, s, setup.quant);
  if (residual.nonzero == 0) return skip;

  ModeResult merge = skip;
  merge.distortion = residual.distortion;
  merge.bits = kMergeResidualBits + residual_bits(residual);
  merge.skip_flag = false;
  merge.cbf = true;
  merge = finish(merge, setup.lambda);
  return merge.rd_cost < skip.rd_cost ? merge : skip;
}

ModeResult whole_cu_inter_test(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference,
                               const NeighbourContext& context, const CodingSetup& setup) {
  check_inputs(cu, frame, reference);
  if (setup.search_range > reference.margin()) throw DomainError("search range exceeds reference padding");
  const auto& kernels = simd::active_kernels();
  const MotionVector predictor = context.merge_candidate(cu);

  ModeResult best;
  best.rd_cost = std::numeric_limits<double>::infinity();
  for (int pm = 0; pm < kPartitionModes; ++pm) {
    ModeResult coded;
    coded.kind = ModeKind::InterWhole;
    coded.pm = pm;
    std::uint32_t header = kInterHeaderBits + kPartitionModeBits[pm];
    std::uint64_t prediction_ssd = 0;
    simd::ResidualStats residual;
    for (int p = 0; p < partition_count(pm); ++p) {
      const Rect r = partition_rect(cu, pm, p);
      const MotionVector mv = search_partition(r, frame, reference, predictor, setup);
      coded.motion[p] = mv;
      header += mvd_bits(mv, predictor);
      const std::uint8_t* src = source_at(frame, r.x, r.y);
      const std::uint8_t* pred = reference.at(r.x + mv.x, r.y + mv.y);
      prediction_ssd += kernels.ssd(src, frame.stride(), pred, reference.stride(), r.w, r.h);
      const simd::ResidualStats part =
          kernels.quantize_residual(src, frame.stride(), pred, reference.stride(), r.w, r.h, setup.quant);
      residual.distortion += part.distortion;
      residual.nonzero += part.nonzero;
      residual.magnitude_log2 += part.magnitude_log2;
    }
    if (pm == 0) coded.motion[1] = coded.motion[0];

    // Residual dropped (cbf = 0) versus coded.
    ModeResult candidate = coded;
    candidate.distortion = prediction_ssd;
    candidate.bits = header;
    candidate.cbf = false;
    candidate = finish(candidate, setup.lambda);
    if (residual.nonzero > 0) {
      coded.distortion = residual.distortion;
      coded.bits = header + residual_bits(residual);
      coded.cbf = true;
      coded = finish(coded, setup.lambda);
      if (coded.rd_cost < candidate.rd_cost) candidate = coded;
    }
    if (candidate.rd_cost < best.rd_cost) best = candidate;
  }
  return best;
}

PartitionResult partition_cu(const CodingUnit& cu, const Frame& frame, const PaddedPlane& reference,
                             NeighbourContext& context, const CodingSetup& setup, const CriteriaBundle* criteria) {
  PartitionResult out;
  RdoStats& stats = out.stats;
  CuTree& tree = out.tree;
  tree.unit = cu;
  ++stats.cus_evaluated;

  CuEvaluation evaluation;
  evaluation.unit = cu;
  evaluation.merge = merge_skip_test(cu, frame, reference, context, setup);
  ++stats.mode_evaluations;
  evaluation.inter = whole_cu_inter_test(cu, frame, reference, context, setup);
  stats.mode_evaluations += kPartitionModes;
  const auto above = context.above_of(cu);
  const auto left = context.left_of(cu);
  evaluation.avg_neighbour_depth =
      average_neighbour_depth(above ? std::optional<int>(above->depth) : std::nullopt,
                              left ? std::optional<int>(left->depth) : std::nullopt, cu.depth);
  evaluation.qp = setup.qp;
  evaluation.qp_offset = setup.qp_offset;
  evaluation.lambda = setup.lambda;

  tree.merge = *evaluation.merge;
  tree.inter = *evaluation.inter;
  tree.features = features_from_evaluation(evaluation);
  tree.chosen_mode = tree.merge.rd_cost <= tree.inter.rd_cost ? tree.merge : tree.inter;

  const bool can_split = cu.depth < kMaxCuDepth;
  const std::uint32_t flag_bits = can_split ? kSplitFlagBits : 0;
  tree.distortion = tree.chosen_mode.distortion;
  tree.bits = std::uint64_t{tree.chosen_mode.bits} + flag_bits;
  tree.whole_cost = rd_cost(static_cast<double>(tree.distortion), static_cast<double>(tree.bits), setup.lambda);
  tree.cost = tree.whole_cost;

  if (can_split && apply_skip(cu.depth, tree.features, criteria) == SkipDecision::SkipRecursion) {
    ++stats.skip_events;
    tree.skipped_by_criterion = true;
  } else if (can_split) {
    ++stats.recursions_entered;
    std::vector<CuTree> children;
    children.reserve(4);
    std::uint64_t split_distortion = 0;
    std::uint64_t split_bits = kSplitFlagBits;
    for (int i = 0; i < 4; ++i) {
      PartitionResult child = partition_cu(cu.child(i), frame, reference, context, setup, criteria);
      stats += child.stats;
      split_distortion += child.tree.distortion;
      split_bits += child.tree.bits;
      children.push_back(std::move(child.tree));
    }
    const double split_cost =
        rd_cost(static_cast<double>(split_distortion), static_cast<double>(split_bits), setup.lambda);
    tree.split_cost = split_cost;
    if (split_cost < tree.whole_cost) {
      tree.split = true;
      tree.children = std::move(children);
      tree.distortion = split_distortion;
      tree.bits = split_bits;
      tree.cost = split_cost;
      return out;
    }
  }
  context.record_leaf(cu, tree.chosen_mode);
  return out;
}

EncodedFrame encode_frame(const Frame& frame, const Frame& reference, const EncoderConfig& config,
                          const CriteriaBundle* criteria) {
  frame.validate();
  reference.validate();
  if (frame.width != reference.width || frame.height != reference.height)
    throw DomainError("frame and reference dimensions differ");

  EncodedFrame encoded;
  encoded.setup = CodingSetup::make(config, frame.qp_offset);
  const PaddedPlane padded(reference, config.search_range + 4);
  NeighbourContext context(frame.width, frame.height);
  for (int y = 0; y < frame.height; y += kCtuSize) {
    for (int x = 0; x < frame.width; x += kCtuSize) {
      PartitionResult r = partition_cu({x, y, 0}, frame, padded, context, encoded.setup, criteria);
      encoded.stats.rdo += r.stats;
      encoded.stats.total_bits += r.tree.bits;
      encoded.stats.total_distortion += r.tree.distortion;
      encoded.ctus.push_back(std::move(r.tree));
    }
  }
  encoded.stats.total_rd_cost = rd_cost(static_cast<double>(encoded.stats.total_distortion),
                                        static_cast<double>(encoded.stats.total_bits), encoded.setup.lambda);
  return encoded;
}

EncodedSequence encode_sequence(const Sequence& sequence, const EncoderConfig& config,
                                const CriteriaBundle* criteria) {
  if (sequence.frames.size() < 2) throw DomainError("a sequence needs at least two frames to encode");
  EncodedSequence out;
  for (std::size_t i = 1; i < sequence.frames.size(); ++i) {
    EncodedFrame f = encode_frame(sequence.frames[i], sequence.frames[i - 1], config, criteria);
    out.stats.total_rd_cost += f.stats.total_rd_cost;
    out.stats.total_bits += f.stats.total_bits;
    out.stats.total_distortion += f.stats.total_distortion;
    out.stats.rdo += f.stats.rdo;
    out.pixels += sequence.frames[i].luma.size();
    out.frames.push_back(std::move(f));
  }
  return out;
}

double psnr(std::uint64_t distortion, std::uint64_t pixels) {
  if (pixels == 0) throw DomainError("PSNR of an empty picture");
  constexpr double kLosslessCap = 100.0;
  if (distortion == 0) return kLosslessCap;
  const double value = 10.0 * std::log10(255.0 * 255.0 * static_cast<double>(pixels) / static_cast<double>(distortion));
  return std::min(value, kLosslessCap);
}

bool tiles_exactly(const CuTree& tree) {
  const int origin_x = tree.unit.x, origin_y = tree.unit.y, size = tree.unit.size();
  std::vector<int> hits(static_cast<std::size_t>(size) * size, 0);
  bool aligned = true;
  auto visit = [&](auto&& self, const CuTree& node) -> void {
    if (node.split) {
      if (node.children.size() != 4) {
        aligned = false;
        return;
      }
      for (int i = 0; i < 4; ++i) {
        if (!(node.children[i].unit == node.unit.child(i))) aligned = false;
        self(self, node.children[i]);
      }
      return;
    }
    if (!node.children.empty()) aligned = false;
    const int s = node.unit.size();
    for (int y = node.unit.y - origin_y; y < node.unit.y - origin_y + s; ++y)
      for (int x = node.unit.x - origin_x; x < node.unit.x - origin_x + s; ++x) {
        if (x < 0 || y < 0 || x >= size || y >= size) {
          aligned = false;
          continue;
        }
        ++hits[static_cast<std::size_t>(y) * size + x];
      }
  };
  visit(visit, tree);
  return aligned && std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

}  // namespace cuskip

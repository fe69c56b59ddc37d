#include <doctest.h>

#include <cmath>
#include <functional>

#include "cuskip/codec.hpp"
#include "cuskip/error.hpp"
#include "cuskip/sequence.hpp"
#include "cuskip/simd/pixel_kernels.hpp"

using namespace cuskip;

namespace {

Sequence small_mixed(int frames = 3, std::uint64_t seed = 21) {
  SequenceSpec spec;
  spec.archetype = Archetype::Mixed;
  spec.width = 128;
  spec.height = 128;
  spec.frames = frames;
  spec.seed = seed;
  return generate_sequence(spec);
}

void visit(const CuTree& t, const std::function<void(const CuTree&)>& fn) {
  fn(t);
  for (const auto& c : t.children) visit(c, fn);
}

SkipCriterion always(int depth) {
  SkipCriterion c;
  c.cu_depth = depth;
  c.predicates = {{FeatureId::QP, Comparator::GreaterEqual, 0.0}};
  return c;
}

}  // namespace

TEST_CASE("rd cost and lambda") {
  CHECK(rd_cost(100.0, 10.0, 2.5) == 125.0);
  CHECK(rd_cost(0.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(rd_cost(-1.0, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(rd_cost(1.0, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(rd_cost(1.0, 1.0, 0.0), DomainError);

  CHECK(lambda_from_qp(12) == 0.57);
  for (int qp = 0; qp + 3 <= 51; ++qp) CHECK(lambda_from_qp(qp + 3) == 2.0 * lambda_from_qp(qp));
  for (int qp = 0; qp <= 51; ++qp)
    CHECK(lambda_from_qp(qp) == doctest::Approx(0.57 * std::pow(2.0, (qp - 12) / 3.0)).epsilon(1e-14));
  CHECK(lambda_from_qp(30, 1.0) == doctest::Approx(lambda_from_qp(30) / 0.57).epsilon(1e-15));
  CHECK_THROWS_AS(lambda_from_qp(52), DomainError);
}

TEST_CASE("coding unit geometry") {
  const CodingUnit root{64, 128, 0};
  CHECK(root.size() == 64);
  CHECK(root.child(0) == CodingUnit{64, 128, 1});
  CHECK(root.child(3) == CodingUnit{96, 160, 1});
  CHECK_THROWS_AS((CodingUnit{8, 0, 1}.validate()), DomainError);
  CHECK_THROWS_AS((CodingUnit{0, 0, 4}.validate()), DomainError);
  CHECK_NOTHROW((CodingUnit{56, 8, 3}.validate()));
}

TEST_CASE("identical frames code as skip") {
  const Sequence s = small_mixed(2);
  EncoderConfig cfg;
  const EncodedFrame f = encode_frame(s.frames[0], s.frames[0], cfg);
  for (const auto& ctu : f.ctus) {
    CHECK_FALSE(ctu.split);
    CHECK(ctu.chosen_mode.kind == ModeKind::MergeSkip);
    CHECK(ctu.chosen_mode.skip_flag);
    CHECK(ctu.chosen_mode.distortion == 0);
    // A perfect inter candidate costs more bits than skip, so skip wins.
    CHECK(ctu.merge.rd_cost < ctu.inter.rd_cost);
    CHECK(ctu.bits == 2 + 1);
  }
  CHECK(f.stats.total_distortion == 0);
  CHECK(psnr(f.stats.total_distortion, 128 * 128) == 100.0);
}

TEST_CASE("encode structure and effort accounting") {
  SequenceSpec spec;
  spec.archetype = Archetype::Mixed;
  spec.frames = 8;
  spec.seed = 3;
  const Sequence s = generate_sequence(spec);
  EncoderConfig cfg;
  cfg.base_qp = 27;
  const EncodedSequence enc = encode_sequence(s, cfg);
  REQUIRE(enc.frames.size() == 7);
  // 16 CTUs, 85 CUs each, 4 mode evaluations per CU, 7 coded frames.
  CHECK(enc.stats.rdo.mode_evaluations == 38080);
  CHECK(enc.stats.rdo.cus_evaluated == 16u * 85u * 7u);
  CHECK(enc.stats.rdo.recursions_entered == 16u * 21u * 7u);
  CHECK(enc.stats.rdo.skip_events == 0);
  CHECK(enc.pixels == 256u * 256u * 7u);

  std::uint64_t bits = 0, dist = 0;
  for (std::size_t k = 0; k < enc.frames.size(); ++k) {
    const auto& f = enc.frames[k];
    CHECK(f.setup.qp_offset == qp_offset_for_frame(static_cast<int>(k) + 1));
    CHECK(f.setup.qp == 27 + f.setup.qp_offset);
    for (const auto& ctu : f.ctus) {
      CHECK(tiles_exactly(ctu));
      visit(ctu, [&](const CuTree& t) {
        if (t.split) {
          REQUIRE(t.split_cost.has_value());
          CHECK(*t.split_cost < t.whole_cost);
        } else if (t.split_cost) {
          CHECK(*t.split_cost >= t.whole_cost);
        }
        CHECK(t.chosen_mode.rd_cost <= t.merge.rd_cost);
        CHECK(t.chosen_mode.rd_cost <= t.inter.rd_cost);
        if (t.features.sf) CHECK_FALSE(t.features.cbf);
        CHECK(t.features.rdc == t.merge.rd_cost);
        CHECK(t.features.bits == t.merge.bits);
        CHECK(t.features.pm == t.inter.pm);
      });
      bits += ctu.bits;
      dist += ctu.distortion;
    }
  }
  CHECK(bits == enc.stats.total_bits);
  CHECK(dist == enc.stats.total_distortion);
}

TEST_CASE("higher QP spends fewer bits") {
  const Sequence s = small_mixed(3);
  std::uint64_t prev_bits = ~0ull;
  double prev_psnr = 1e9;
  for (int qp : {22, 27, 32, 37}) {
    EncoderConfig cfg;
    cfg.base_qp = qp;
    const auto enc = encode_sequence(s, cfg);
    const double q = psnr(enc.stats.total_distortion, enc.pixels);
    CHECK(enc.stats.total_bits < prev_bits);
    CHECK(q < prev_psnr);
    prev_bits = enc.stats.total_bits;
    prev_psnr = q;
  }
}

TEST_CASE("empty bundle matches the encoder without skip machinery") {
  const Sequence s = small_mixed(4, 8);
  EncoderConfig cfg;
  cfg.base_qp = 32;
  const CriteriaBundle empty;
  const auto plain = encode_sequence(s, cfg, nullptr);
  const auto with_empty = encode_sequence(s, cfg, &empty);
  CHECK(plain.stats == with_empty.stats);
  REQUIRE(plain.frames.size() == with_empty.frames.size());
  for (std::size_t i = 0; i < plain.frames.size(); ++i) CHECK(plain.frames[i].ctus == with_empty.frames[i].ctus);
}

TEST_CASE("always-true depth-0 criterion stops every recursion") {
  const Sequence s = small_mixed(3);
  EncoderConfig cfg;
  const CriteriaBundle bundle = make_bundle({always(0)});
  const auto enc = encode_sequence(s, cfg, &bundle);
  CHECK(enc.stats.rdo.recursions_entered == 0);
  CHECK(enc.stats.rdo.skip_events == 2u * 4u);
  CHECK(enc.stats.rdo.mode_evaluations == 2u * 4u * 4u);
  for (const auto& f : enc.frames)
    for (const auto& ctu : f.ctus) {
      CHECK_FALSE(ctu.split);
      CHECK(ctu.skipped_by_criterion);
      CHECK_FALSE(ctu.split_cost.has_value());
    }
}

TEST_CASE("a fired criterion only removes the split branch") {
  const Sequence s = small_mixed(3, 14);
  EncoderConfig cfg;
  cfg.base_qp = 27;
  SkipCriterion c;
  c.cu_depth = 1;
  c.predicates = {{FeatureId::Bits, Comparator::Less, 60.0}};
  const CriteriaBundle bundle = make_bundle({c});
  const auto full = encode_sequence(s, cfg);
  const auto fast = encode_sequence(s, cfg, &bundle);
  CHECK(fast.stats.rdo.mode_evaluations <= full.stats.rdo.mode_evaluations);
  std::uint64_t fired = 0;
  for (const auto& f : fast.frames)
    for (const auto& ctu : f.ctus)
      visit(ctu, [&](const CuTree& t) {
        if (t.skipped_by_criterion) {
          ++fired;
          CHECK(t.unit.depth == 1);
          CHECK(t.features.bits < 60.0);
          CHECK_FALSE(t.split);
          CHECK(t.children.empty());
        } else if (t.unit.depth == 1) {
          CHECK(t.features.bits >= 60.0);
        }
      });
  // Fired CUs under a parent that ended up unsplit are not in the final tree.
  CHECK(fired <= fast.stats.rdo.skip_events);
  CHECK(fast.stats.rdo.skip_events > 0);
}

TEST_CASE("encode is identical under every kernel table") {
  if (!simd::avx2_kernels()) {
    MESSAGE("AVX2 not available; single kernel table only");
    return;
  }
  const Sequence s = small_mixed(3, 17);
  EncoderConfig cfg;
  cfg.base_qp = 22;
  const auto before = simd::active_kernels().level;
  simd::set_kernel_level(simd::KernelLevel::Scalar);
  const auto a = encode_sequence(s, cfg);
  simd::set_kernel_level(simd::KernelLevel::Avx2);
  const auto b = encode_sequence(s, cfg);
  simd::set_kernel_level(before);
  CHECK(a.stats == b.stats);
  for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].ctus == b.frames[i].ctus);
}

TEST_CASE("encode is deterministic") {
  const Sequence s = small_mixed(3, 2);
  EncoderConfig cfg;
  const auto a = encode_sequence(s, cfg), b = encode_sequence(s, cfg);
  CHECK(a.stats == b.stats);
  for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].ctus == b.frames[i].ctus);
}

TEST_CASE("encoder rejects bad input") {
  const Sequence s = small_mixed(2);
  EncoderConfig cfg;
  cfg.base_qp = 48;
  CHECK_THROWS_AS(encode_sequence(s, cfg), DomainError);
  cfg = {};
  cfg.search_range = 17;
  CHECK_THROWS_AS(encode_sequence(s, cfg), DomainError);
  Sequence one = s;
  one.frames.resize(1);
  CHECK_THROWS_AS(encode_sequence(one, EncoderConfig{}), DomainError);
  CHECK_THROWS_AS(psnr(0, 0), DomainError);
}

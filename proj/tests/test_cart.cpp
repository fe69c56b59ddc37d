#include <doctest.h>

#include <numeric>
#include <vector>

#include "cuskip/cart.hpp"
#include "cuskip/error.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cuskip;

namespace {

std::vector<Sample> column_dataset(const std::vector<double>& bits, const std::vector<int>& labels) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    FeatureVector f;
    f.bits = bits[i];
    f.qp = 27;
    f.lambda = lambda_from_qp(27);
    out.push_back(synth::make_sample(f, 0, labels[i] != 0, static_cast<int>(i)));
  }
  return out;
}

const FeatureId kBitsOnly[] = {FeatureId::Bits};

}  // namespace

TEST_CASE("gini examples") {
  CHECK(gini_impurity({100, 0}) == 0.0);
  CHECK(gini_impurity({0, 7}) == 0.0);
  CHECK(gini_impurity({50, 50}) == 0.5);
  CHECK(gini_impurity({90, 10}) == doctest::Approx(0.18).epsilon(1e-15));
  CHECK_THROWS_AS(gini_impurity({0, 0}), DomainError);
  synth::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t a = rng.below(100000), b = rng.below(100000) + 1;
    CHECK(std::abs(gini_impurity({a, b}) - oracle::gini(a, b)) <= 1e-12);
  }
}

TEST_CASE("separable single feature splits between the classes") {
  TrainConstraints c;
  c.bin_count = 0;
  c.min_leaf_fraction = 0.0;
  const auto samples = column_dataset({1, 2, 3, 4}, {0, 0, 1, 1});
  const auto view = make_training_view(samples, c);
  const std::vector<std::uint32_t> rows{0, 1, 2, 3};
  const auto s = best_split(view, rows, kBitsOnly, 1);
  REQUIRE(s.has_value());
  CHECK(s->rule.feature == FeatureId::Bits);
  CHECK(s->rule.threshold == 2.5);
  CHECK(s->weighted_gini == 0.0);
  CHECK(s->left == ClassCounts{2, 0});
  CHECK(s->right == ClassCounts{0, 2});

  const auto pure = column_dataset({1, 2, 3, 4}, {1, 1, 1, 1});
  const auto pv = make_training_view(pure, c);
  CHECK_FALSE(best_split(pv, rows, kBitsOnly, 1).has_value());

  // Binned features cut at the upper value.
  TrainConstraints binned;
  binned.min_leaf_fraction = 0.0;
  const auto bv = make_training_view(samples, binned);
  const auto bs = best_split(bv, rows, kBitsOnly, 1);
  REQUIRE(bs.has_value());
  CHECK(bs->rule.threshold == 2.5);  // few distinct values: midpoint edges
  CHECK(bs->left == ClassCounts{2, 0});
}

TEST_CASE("best split matches exhaustive enumeration") {
  synth::Rng rng(50);
  const FeatureId three[] = {FeatureId::RDC, FeatureId::Bits, FeatureId::AND};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Sample> samples;
    for (int i = 0; i < 50; ++i) {
      auto f = synth::random_features(rng);
      f.bits = rng.range(0, 12);
      f.avg_neighbour_depth = rng.range(0, 6) / 2.0;
      f.rdc = rng.range(0, 30) * 3.5;
      const bool label = rng.chance(0.2 + 0.05 * f.bits);
      samples.push_back(synth::make_sample(f, 1, label, i));
    }
    TrainConstraints c;
    c.min_leaf_fraction = 0.0;
    const auto view = make_training_view(samples, c);
    std::vector<std::uint32_t> rows(samples.size());
    std::iota(rows.begin(), rows.end(), 0u);
    const auto got = best_split(view, rows, three, 1);
    const auto want = oracle::brute_force_split(view, three, 1);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    CHECK(got->rule.feature == want->feature);
    CHECK(got->rule.threshold > want->below);
    CHECK(got->rule.threshold <= want->above);
    CHECK(oracle::weighted_impurity(got->left.not_split, got->left.split, got->right.not_split,
                                    got->right.split) == want->impurity);
  }
}

TEST_CASE("grown trees satisfy their constraints") {
  const auto samples = synth::noisy_dataset(5000, 1, 12);
  TrainConstraints c;
  c.max_depth = 4;
  c.min_leaf_fraction = 0.01;
  const DecisionTree t = grow_tree(samples, 1, c);
  CHECK_NOTHROW(t.validate());
  CHECK(t.depth() <= 4);
  CHECK(t.depth() >= 2);
  CHECK(t.root_total() == 5000);
  for (auto leaf : t.leaves()) CHECK(t.nodes[leaf].counts.total() >= 50);
  for (std::size_t i = 1; i < t.nodes.size(); ++i) CHECK(t.nodes[i].node_depth >= t.nodes[i - 1].node_depth);
  CHECK(t.training_sequences == std::vector<std::string>{"synthetic"});

  // Counts at each node equal the samples routed there.
  for (std::size_t n = 0; n < t.nodes.size(); ++n) {
    ClassCounts c2;
    for (const auto& s : samples)
      if (reaches(t, n, s.features)) (s.label ? c2.split : c2.not_split) += 1;
    // Routing uses raw values; bins are order preserving with cuts at edges.
    CHECK(c2 == t.nodes[n].counts);
  }
}

TEST_CASE("degenerate trees") {
  const auto same = column_dataset({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0});
  const DecisionTree t = grow_tree(same, 0);
  CHECK(t.nodes.size() == 1);
  CHECK(t.depth() == 0);
  FeatureVector any;
  any.bits = 1e6;
  CHECK_FALSE(predict(t, any).split);
  CHECK(predict(t, any).accuracy == 1.0);

  TrainConstraints zero;
  zero.max_depth = 0;
  const auto mixed = column_dataset({1, 2, 3, 4}, {0, 1, 1, 1});
  const DecisionTree stump = grow_tree(mixed, 0, zero);
  CHECK(stump.nodes.size() == 1);
  CHECK(predict(stump, any).split);

  // Tie in counts resolves to not-split.
  const DecisionTree tie = grow_tree(column_dataset({1, 1}, {0, 1}), 0);
  CHECK_FALSE(tie.root().majority_split);

  CHECK_THROWS_AS(grow_tree(std::vector<Sample>{}, 0), DomainError);
  CHECK_THROWS_AS(grow_tree(mixed, 1), DomainError);
  TrainConstraints bad;
  bad.min_leaf_fraction = 1.5;
  CHECK_THROWS_AS(grow_tree(mixed, 0, bad), DomainError);
}

TEST_CASE("pure tree memorises its training data") {
  TrainConstraints c;
  c.min_leaf_fraction = 0.0;
  c.bin_count = 0;
  c.max_depth = 5;
  std::vector<double> bits;
  std::vector<int> labels;
  for (int i = 0; i < 32; ++i) {
    bits.push_back(i);
    labels.push_back((i / 8) % 2);
  }
  const auto samples = column_dataset(bits, labels);
  const DecisionTree t = grow_tree(samples, 0, c);
  for (auto leaf : t.leaves()) CHECK(t.nodes[leaf].accuracy == 1.0);
  for (const auto& s : samples) CHECK(predict(t, s.features).split == s.label);
}

TEST_CASE("min leaf arithmetic") {
  TrainConstraints c;
  CHECK(c.min_leaf(100000) == 100);
  CHECK(c.min_leaf(100001) == 101);
  CHECK(c.min_leaf(10) == 1);
  c.min_leaf_fraction = 0.0;
  CHECK(c.min_leaf(500) == 1);
}

TEST_CASE("k-fold validation") {
  const auto samples = synth::noisy_dataset(100, 0, 2);
  TrainConstraints c;
  const auto r = kfold_validate(samples, 0, c, {5, 9});
  REQUIRE(r.folds.size() == 5);
  for (const auto& f : r.folds) {
    CHECK(f.validation_size == 20);
    CHECK(f.train_size == 80);
  }
  std::vector<int> per(5, 0);
  for (int f : r.fold_of) ++per[f];
  CHECK(per == std::vector<int>(5, 20));
  CHECK(kfold_validate(samples, 0, c, {5, 9}) == r);
  CHECK(kfold_validate(samples, 0, c, {5, 10}).fold_of != r.fold_of);

  std::vector<double> bits;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    bits.push_back(i < 100 ? i : i + 100);
    labels.push_back(i >= 100);
  }
  TrainConstraints raw;
  raw.bin_count = 0;
  const auto sep = kfold_validate(column_dataset(bits, labels), 0, raw, {5, 1});
  CHECK(sep.mean_accuracy == 1.0);

  CHECK_THROWS_AS(kfold_validate(column_dataset({1, 2}, {0, 1}), 0, c, {5, 1}), DomainError);
  CHECK_THROWS_AS(kfold_validate(samples, 0, c, {1, 1}), DomainError);
}

TEST_CASE("tree json round trip") {
  const auto samples = synth::noisy_dataset(3000, 2, 77);
  const DecisionTree t = grow_tree(samples, 2);
  const std::string text = tree_to_json(t);
  const DecisionTree back = tree_from_json(text);
  CHECK(back == t);
  CHECK(tree_to_json(back) == text);
  CHECK_THROWS_AS(tree_from_json("{", "m.json"), ParseError);
  CHECK_THROWS(tree_from_json("{\"format\": \"other\"}"));
}

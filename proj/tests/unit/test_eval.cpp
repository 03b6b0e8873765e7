#include <gtest/gtest.h>

#include "promix/error.hpp"
#include "promix/eval.hpp"
#include "test_support.hpp"

namespace promix {
namespace {

using testing::Gen;

// Fixed scores per class, ignoring the input.
Scorer constant_scorer(std::vector<double> scores) {
  return [scores](const Embedding&, std::span<const ClassId> classes) {
    std::vector<double> out;
    for (ClassId c : classes) out.push_back(scores[c]);
    return out;
  };
}

EmbeddingSet labels_only(std::vector<ClassId> labels, std::size_t classes) {
  EmbeddingSet set(Gen(0).names(classes), 2);
  for (ClassId y : labels) set.add({Embedding::normalized({1.0, 0.0}), y});
  return set;
}

TEST(Accuracy, ConstantScorer) {
  const auto set = labels_only({0, 1, 1, 2}, 3);
  EXPECT_DOUBLE_EQ(accuracy(constant_scorer({0.1, 0.9, 0.2}), set), 50.0);
}

TEST(Accuracy, FilterRestrictsSamplesAndCandidates) {
  const auto set = labels_only({0, 1, 1, 2}, 3);
  const std::vector<ClassId> only{0, 2};
  // Class 1 is excluded, so the argmax over {0, 2} is 2.
  EXPECT_DOUBLE_EQ(accuracy(constant_scorer({0.1, 0.9, 0.2}), set, only), 50.0);
}

TEST(Accuracy, TiesGoToLowestIndex) {
  const auto set = labels_only({0, 1}, 2);
  EXPECT_DOUBLE_EQ(accuracy(constant_scorer({0.5, 0.5}), set), 50.0);
}

TEST(Accuracy, NoQualifyingSampleThrows) {
  const auto set = labels_only({0, 0}, 3);
  const std::vector<ClassId> only{1, 2};
  EXPECT_THROW(accuracy(constant_scorer({1.0, 0.0, 0.0}), set, only), InvalidArgument);
}

TEST(Accuracy, HeadScorerMatchesArgmaxOracle) {
  Gen gen(1);
  const auto head = gen.head(6, 8, 2);
  const auto set = gen.labeled_set(6, 8, 80);
  std::size_t correct = 0;
  for (const auto& s : set) {
    const auto sims = testing::similarities_oracle(head, s.embedding);
    const auto best = std::max_element(sims.begin(), sims.end()) - sims.begin();
    if (static_cast<ClassId>(best) == s.label) ++correct;
  }
  EXPECT_NEAR(accuracy(head_scorer(head), set), 100.0 * correct / 80.0, 1e-12);
}

TEST(HarmonicMean, Values) {
  EXPECT_DOUBLE_EQ(harmonic_mean(80.0, 80.0), 80.0);
  EXPECT_DOUBLE_EQ(harmonic_mean(0.0, 90.0), 0.0);
  EXPECT_NEAR(harmonic_mean(82.69, 63.22), 71.66, 0.005);
  EXPECT_NEAR(harmonic_mean(100.0, 50.0), 200.0 / 3.0, 1e-12);
}

TEST(HarmonicMean, AggregateIsMeanOfPerDatasetValues) {
  const std::vector<BaseNewPair> d{{80.0, 80.0}, {100.0, 50.0}};
  EXPECT_NEAR(aggregate_harmonic_mean(d), 0.5 * (80.0 + 200.0 / 3.0), 1e-12);
}

TEST(ClassifySamples, Categories) {
  // Orthogonal anchors; tau = 1 keeps the probability gaps moderate.
  const auto e0 = Embedding::normalized({1.0, 0.0, 0.0});
  const auto e1 = Embedding::normalized({0.0, 1.0, 0.0});
  const auto e2 = Embedding::normalized({0.0, 0.0, 1.0});
  const auto head = PromptHead::frozen({e0, e1, e2}, {"a", "b", "c"});
  EmbeddingSet set({"a", "b", "c"}, 3);
  set.add({Embedding::normalized({1.0, 0.1, 0.0}), 0});   // easy
  set.add({Embedding::normalized({1.0, 0.95, 0.0}), 1});  // confusing
  set.add({Embedding::normalized({1.0, 0.0, 0.0}), 2});   // hard
  const auto cats = classify_samples(head, set, 0.2, 1.0);
  ASSERT_EQ(cats.size(), 3u);
  EXPECT_EQ(cats[0], SampleCategory::kEasy);
  EXPECT_EQ(cats[1], SampleCategory::kConfusing);
  EXPECT_EQ(cats[2], SampleCategory::kHard);
  const auto counts = count_categories(cats);
  EXPECT_EQ(counts.easy + counts.confusing + counts.hard, 3u);
}

TEST(ClassifySamples, EasyCountMatchesAccuracy) {
  Gen gen(2);
  const auto head = gen.head(5, 6, 1);
  const auto set = gen.clustered_set(head.anchors(), 10, 0.8);
  const auto counts = count_categories(classify_samples(head, set, kDefaultGapThreshold));
  EXPECT_NEAR(100.0 * counts.easy / set.size(), accuracy(head_scorer(head), set), 1e-12);
  EXPECT_EQ(counts.easy + counts.confusing + counts.hard, set.size());
}

TEST(ClassifySamples, WiderThresholdOnlyMovesHardToConfusing) {
  Gen gen(3);
  const auto head = gen.head(8, 6, 1);
  const auto set = gen.clustered_set(head.anchors(), 10, 1.0);
  const auto narrow = classify_samples(head, set, kDefaultGapThreshold, 0.1);
  const auto wide = classify_samples(head, set, kWideGapThreshold, 0.1);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (narrow[i] != wide[i]) {
      EXPECT_EQ(narrow[i], SampleCategory::kHard);
      EXPECT_EQ(wide[i], SampleCategory::kConfusing);
    }
  }
}

}  // namespace
}  // namespace promix

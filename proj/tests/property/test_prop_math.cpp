#include <gtest/gtest.h>

#include <cmath>

#include "promix/eval.hpp"
#include "promix/losses.hpp"
#include "promix/mixture.hpp"
#include "promix/stats.hpp"
#include "test_support.hpp"

namespace promix {
namespace {

using testing::Gen;

TEST(SoftmaxProperty, SumsToOneAndMatchesOracle) {
  Gen gen(201);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = gen.similarities(gen.index(1, 30));
    const double tau = std::exp(gen.uniform(std::log(1e-3), std::log(10.0)));
    const auto p = predict(s, tau);
    const auto oracle = testing::softmax_oracle(s, tau);
    double total = 0.0;
    for (std::size_t l = 0; l < s.size(); ++l) {
      ASSERT_GE(p[l], 0.0);
      ASSERT_NEAR(p[l], oracle[l], 1e-12);
      total += p[l];
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(SoftmaxProperty, ShiftInvariance) {
  Gen gen(202);
  for (int trial = 0; trial < 500; ++trial) {
    auto s = gen.similarities(gen.index(2, 20));
    const double tau = gen.uniform(0.01, 2.0);
    const auto p = predict(s, tau);
    const double c = gen.uniform(-5.0, 5.0);
    for (auto& v : s) v += c;
    const auto q = predict(s, tau);
    for (std::size_t l = 0; l < s.size(); ++l) ASSERT_NEAR(p[l], q[l], 1e-9);
  }
}

TEST(SoftmaxProperty, LowerTemperatureSharpensTheMaximum) {
  Gen gen(203);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = gen.similarities(gen.index(2, 20));
    const double hi = gen.uniform(0.05, 2.0);
    const double lo = hi * gen.uniform(0.1, 0.99);
    const auto top = std::max_element(s.begin(), s.end()) - s.begin();
    ASSERT_GE(predict(s, lo)[top], predict(s, hi)[top] - 1e-15);
    ASSERT_LE(normalized_entropy(predict(s, lo).probabilities()),
              normalized_entropy(predict(s, hi).probabilities()) + 1e-12);
  }
}

TEST(LossProperty, IdentitiesOnRandomDistributions) {
  Gen gen(204);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = gen.index(2, 12);
    const PredictiveDistribution p(gen.distribution(n), 1.0);
    const std::size_t y = gen.index(0, n - 1);
    const double py = p[y];
    const double w = gen.uniform(0.0, 10.0);
    const double gamma = gen.uniform(0.0, 5.0);
    const double q = gen.uniform(0.01, 1.0);
    const double ce = -std::log(std::max(py, kProbabilityFloor));
    ASSERT_NEAR(ce_loss(p, y), ce, 1e-12 * std::max(1.0, ce));
    ASSERT_NEAR(coa_loss(p, y), 1.0 - py, 1e-15);
    ASSERT_NEAR(prompt_loss(p, y, w), ce + w * (1.0 - py), 1e-10 * std::max(1.0, ce));
    ASSERT_NEAR(focal_loss(p, y, gamma), std::pow(1.0 - py, gamma) * ce,
                1e-10 * std::max(1.0, ce));
    ASSERT_NEAR(gce_loss(p, y, q), (1.0 - std::pow(py, q)) / q, 1e-12);
    ASSERT_NEAR(mae_loss(p, y), 2.0 * (1.0 - py) / static_cast<double>(n), 1e-12);
    ASSERT_NEAR(ce_plus_mae_loss(p, y, w), ce + w * 2.0 * (1.0 - py) / static_cast<double>(n),
                1e-10 * std::max(1.0, ce));
    ASSERT_GE(prompt_loss(p, y, w), ce_loss(p, y));
    ASSERT_LE(focal_loss(p, y, gamma), ce_loss(p, y) + 1e-15);
  }
}

// Two-class logits with p(y = 0) = target at tau = 1.
std::vector<double> logits_for(double target) { return {std::log(target / (1.0 - target)), 0.0}; }

TEST(LossProperty, CorrectClassGradientPeaksAtCriticalProbability) {
  Gen gen(205);
  for (int trial = 0; trial < 200; ++trial) {
    const double w = gen.uniform(1.5, 20.0);
    const double peak = (w - 1.0) / (2.0 * w);
    double best_p = 0.0, best_g = -1.0;
    for (int i = 1; i < 2000; ++i) {
      const double pr = i / 2000.0;
      const double g = std::abs(grad_prompt_loss(logits_for(pr), 0, 1.0, w)[0]);
      if (g > best_g) {
        best_g = g;
        best_p = pr;
      }
    }
    ASSERT_NEAR(best_p, peak, 1.0 / 1000.0) << "w " << w;
    // Closed-form peak magnitude (1 + w)^2 / (4w).
    ASSERT_NEAR(best_g, (1.0 + w) * (1.0 + w) / (4.0 * w), 1e-5 * best_g);
  }
}

TEST(LossProperty, IncorrectClassGradientGrowsWithWeight) {
  Gen gen(206);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = gen.similarities(gen.index(2, 10));
    const std::size_t y = gen.index(0, s.size() - 1);
    const double tau = gen.uniform(0.05, 1.0);
    const double w1 = gen.uniform(0.0, 5.0), w2 = w1 + gen.uniform(0.1, 5.0);
    const auto g1 = grad_prompt_loss(s, y, tau, w1);
    const auto g2 = grad_prompt_loss(s, y, tau, w2);
    for (std::size_t l = 0; l < s.size(); ++l) {
      if (l == y) continue;
      ASSERT_GE(g1[l], 0.0);
      ASSERT_GE(g2[l], g1[l]);
    }
  }
}

TEST(EntLossProperty, Monotonicity) {
  Gen gen(207);
  for (int trial = 0; trial < 1000; ++trial) {
    const double h0 = gen.uniform(), h1 = gen.uniform(), m = gen.uniform();
    const double d = gen.uniform(0.0, 0.3);
    const double base = ent_loss(h0, h1, m);
    ASSERT_GE(base, 0.0);
    ASSERT_GE(ent_loss(h0 + d, h1, m), base);
    ASSERT_LE(ent_loss(h0, h1 + d, m), base);
    ASSERT_GE(ent_loss(h0, h1, m + d), base);
  }
}

TEST(StatsProperty, PValueDecreasesInT) {
  Gen gen(208);
  for (int trial = 0; trial < 300; ++trial) {
    const double dof = static_cast<double>(gen.index(1, 40));
    const double t1 = gen.uniform(-10.0, 10.0), t2 = t1 + gen.uniform(0.0, 3.0);
    ASSERT_GE(1.0 - student_t_cdf(t1, dof), 1.0 - student_t_cdf(t2, dof) - 1e-14);
    ASSERT_NEAR(student_t_cdf(t1, dof) + student_t_cdf(-t1, dof), 1.0, 1e-12);
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> d(gen.index(3, 15));
    for (auto& x : d) x = gen.gaussian();
    auto shifted = d;
    const double c = gen.uniform(0.01, 1.0);
    for (auto& x : shifted) x += c;
    const auto a = t_test_paired_one_sided(d);
    const auto b = t_test_paired_one_sided(shifted);
    ASSERT_GT(b.t, a.t);
    ASSERT_LE(b.p, a.p);
    ASSERT_GE(b.p, 0.0);
    ASSERT_LE(a.p, 1.0);
  }
}

TEST(HarmonicMeanProperty, Bounds) {
  Gen gen(209);
  for (int trial = 0; trial < 1000; ++trial) {
    const double b = gen.uniform(0.0, 100.0), n = gen.uniform(0.0, 100.0);
    const double h = harmonic_mean(b, n);
    ASSERT_GE(h, std::min(b, n) - 1e-12);
    ASSERT_LE(h, std::sqrt(b * n) + 1e-12);
    ASSERT_LE(h, std::max(b, n) + 1e-12);
    ASSERT_DOUBLE_EQ(h, harmonic_mean(n, b));
  }
}

TEST(ClassifyProperty, CategoriesPartitionTheSet) {
  Gen gen(210);
  for (int trial = 0; trial < 30; ++trial) {
    const auto head = gen.head(gen.index(2, 10), gen.index(3, 12), gen.index(0, 2));
    const auto set = gen.clustered_set(head.anchors(), gen.index(1, 6), gen.uniform(0.1, 2.0));
    const double tau = gen.uniform(0.01, 0.5);
    const double thr = gen.uniform(0.0, 1.0);
    const auto cats = classify_samples(head, set, thr, tau);
    ASSERT_EQ(cats.size(), set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto p = testing::softmax_oracle(testing::similarities_oracle(head, set[i].embedding),
                                             tau);
      const auto pred = std::max_element(p.begin(), p.end()) - p.begin();
      const double gap = p[pred] - p[set[i].label];
      if (static_cast<ClassId>(pred) == set[i].label) {
        ASSERT_EQ(cats[i], SampleCategory::kEasy);
      } else if (gap < thr - 1e-9) {
        ASSERT_EQ(cats[i], SampleCategory::kConfusing);
      } else if (gap > thr + 1e-9) {
        ASSERT_EQ(cats[i], SampleCategory::kHard);
      }
    }
  }
}

}  // namespace
}  // namespace promix

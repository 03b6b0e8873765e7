#pragma once

// Accuracy metrics and per-sample categorization.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "promix/embedspace.hpp"
#include "promix/head.hpp"
#include "promix/mixture.hpp"

namespace promix {

// Logits (any monotone score) of `x` over `classes`, in the given order.
using Scorer = std::function<std::vector<double>(const Embedding& x,
                                                 std::span<const ClassId> classes)>;

Scorer head_scorer(const PromptHead& head);
Scorer mixture_scorer(const MixtureModel& model);

// Percentage of samples whose argmax over `classes` equals the label. Only
// samples labelled inside `classes` are counted; ties go to the lowest class
// index. Without a filter every class of the set is a candidate. Throws when
// no sample qualifies.
double accuracy(const Scorer& scorer, const EmbeddingSet& set,
                std::optional<std::span<const ClassId>> classes = std::nullopt);

// 2bn / (b + n), 0 if either input is 0.
double harmonic_mean(double base, double novel);

struct BaseNewPair {
  double base = 0.0;
  double novel = 0.0;
};

// Mean of per-dataset harmonic means.
double aggregate_harmonic_mean(std::span<const BaseNewPair> datasets);

enum class SampleCategory { kEasy, kConfusing, kHard };

std::string_view to_string(SampleCategory category);

inline constexpr double kDefaultGapThreshold = 0.2;
inline constexpr double kWideGapThreshold = 0.5;

// easy: argmax correct. confusing: wrong with p(pred) - p(y) <= threshold.
// hard: the remaining wrong predictions.
std::vector<SampleCategory> classify_samples(
    const PromptHead& baseline, const EmbeddingSet& set, double gap_threshold,
    double tau = kDefaultTemperature,
    std::optional<std::span<const ClassId>> classes = std::nullopt);

struct CategoryCounts {
  std::size_t easy = 0;
  std::size_t confusing = 0;
  std::size_t hard = 0;
};

CategoryCounts count_categories(std::span<const SampleCategory> categories);

}  // namespace promix

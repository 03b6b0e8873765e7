#include "promix/eval.hpp"

#include <algorithm>

#include "promix/error.hpp"

namespace promix {

Scorer head_scorer(const PromptHead& head) {
  return [head](const Embedding& x, std::span<const ClassId> classes) {
    return head.similarities(x, classes);
  };
}

Scorer mixture_scorer(const MixtureModel& model) {
  model.validate();
  return [model](const Embedding& x, std::span<const ClassId> classes) {
    return mixture_logits(model, x, classes);
  };
}

double accuracy(const Scorer& scorer, const EmbeddingSet& set,
                std::optional<std::span<const ClassId>> classes) {
  std::vector<ClassId> candidates;
  if (classes) {
    candidates.assign(classes->begin(), classes->end());
    std::sort(candidates.begin(), candidates.end());
    if (std::adjacent_find(candidates.begin(), candidates.end()) != candidates.end()) {
      throw InvalidArgument("accuracy class filter has duplicates");
    }
  } else {
    candidates = all_classes(set.class_count());
  }
  if (candidates.empty()) throw InvalidArgument("accuracy needs at least one candidate class");

  std::size_t counted = 0;
  std::size_t correct = 0;
  for (const auto& sample : set) {
    if (!std::binary_search(candidates.begin(), candidates.end(), sample.label)) continue;
    ++counted;
    const auto scores = scorer(sample.embedding, candidates);
    const auto best = static_cast<std::size_t>(
        std::max_element(scores.begin(), scores.end()) - scores.begin());
    if (candidates[best] == sample.label) ++correct;
  }
  if (counted == 0) throw InvalidArgument("no samples fall inside the accuracy class filter");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(counted);
}

double harmonic_mean(double base, double novel) {
  if (!(base >= 0.0) || !(novel >= 0.0)) {
    throw InvalidArgument("harmonic mean needs non-negative inputs");
  }
  if (base == 0.0 || novel == 0.0) return 0.0;
  return 2.0 * base * novel / (base + novel);
}

double aggregate_harmonic_mean(std::span<const BaseNewPair> datasets) {
  if (datasets.empty()) throw InvalidArgument("aggregate harmonic mean of no datasets");
  double sum = 0.0;
  for (const auto& d : datasets) sum += harmonic_mean(d.base, d.novel);
  return sum / static_cast<double>(datasets.size());
}

std::string_view to_string(SampleCategory category) {
  switch (category) {
    case SampleCategory::kEasy: return "easy";
    case SampleCategory::kConfusing: return "confusing";
    case SampleCategory::kHard: return "hard";
  }
  return "?";
}

std::vector<SampleCategory> classify_samples(const PromptHead& baseline, const EmbeddingSet& set,
                                             double gap_threshold, double tau,
                                             std::optional<std::span<const ClassId>> classes) {
  if (!(gap_threshold >= 0.0 && gap_threshold <= 1.0)) {
    throw InvalidArgument("gap threshold must lie in [0, 1]");
  }
  const auto candidates =
      classes ? std::vector<ClassId>(classes->begin(), classes->end())
              : all_classes(set.class_count());
  std::vector<SampleCategory> out;
  out.reserve(set.size());
  for (const auto& sample : set) {
    const auto p = predict(baseline.similarities(sample.embedding, candidates), tau);
    const std::size_t y = local_index(candidates, sample.label);
    const std::size_t pred = p.argmax();
    if (pred == y) {
      out.push_back(SampleCategory::kEasy);
    } else if (p[pred] - p[y] <= gap_threshold) {
      out.push_back(SampleCategory::kConfusing);
    } else {
      out.push_back(SampleCategory::kHard);
    }
  }
  return out;
}

CategoryCounts count_categories(std::span<const SampleCategory> categories) {
  CategoryCounts c;
  for (auto cat : categories) {
    switch (cat) {
      case SampleCategory::kEasy: ++c.easy; break;
      case SampleCategory::kConfusing: ++c.confusing; break;
      case SampleCategory::kHard: ++c.hard; break;
    }
  }
  return c;
}

}  // namespace promix

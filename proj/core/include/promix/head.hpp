#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promix/embedspace.hpp"

namespace promix {

// Pre-trained contrastive model temperature.
inline constexpr double kDefaultTemperature = 0.01;

// Per-class cosine similarities s(l) of one input.
class SimilarityVector {
 public:
  SimilarityVector() = default;
  explicit SimilarityVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

// Softmax probabilities over a class list, with the temperature that produced
// them.
class PredictiveDistribution {
 public:
  // Validates non-negativity and unit mass (within 1e-9).
  PredictiveDistribution(std::vector<double> probabilities, double temperature);

  std::span<const double> probabilities() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double temperature() const noexcept { return tau_; }

  // Lowest index among the maximal entries.
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
  double tau_;
};

// Max-subtracted softmax of `logits`; throws on empty or non-finite input.
std::vector<double> stable_softmax(std::span<const double> logits);

// p(l) = exp(s(l)/tau) / sum_l' exp(s(l')/tau).
PredictiveDistribution predict(std::span<const double> similarities, double tau);
PredictiveDistribution predict(const SimilarityVector& similarities, double tau);

// Learnable classifier head. The class embedding for class l is
// normalize(anchor_l + mean(context)); a frozen head has no context rows and
// uses the anchors directly. Effective embeddings are computed once at
// construction.
class PromptHead {
 public:
  PromptHead() = default;

  static PromptHead frozen(std::vector<Embedding> anchors, std::vector<std::string> class_names);

  // Context rows drawn from N(0, init_stddev^2).
  static PromptHead learnable(std::vector<Embedding> anchors,
                              std::vector<std::string> class_names,
                              std::size_t context_length, std::uint64_t seed,
                              double init_stddev = 0.02);

  PromptHead(std::vector<Embedding> anchors, std::vector<std::string> class_names,
             std::vector<std::vector<double>> context);

  bool is_frozen() const noexcept { return context_.empty(); }
  std::size_t context_length() const noexcept { return context_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t class_count() const noexcept { return anchors_.size(); }
  std::size_t parameter_count() const noexcept { return context_.size() * dim_; }

  const std::vector<std::vector<double>>& context() const noexcept { return context_; }
  const std::vector<Embedding>& anchors() const noexcept { return anchors_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<double>& context_mean() const noexcept { return context_mean_; }

  const Embedding& class_embedding(ClassId cls) const { return effective_.at(cls); }

  // |anchor_l + mean(context)| before renormalization.
  double unnormalized_norm(ClassId cls) const { return norms_.at(cls); }

  SimilarityVector similarities(const Embedding& x) const;
  std::vector<double> similarities(const Embedding& x, std::span<const ClassId> classes) const;

  PromptHead with_context(std::vector<std::vector<double>> context) const;

  // Same context over a different class list (used for surrogate out-classes).
  PromptHead with_anchors(std::vector<Embedding> anchors,
                          std::vector<std::string> class_names) const;

 private:
  void rebuild();

  std::vector<Embedding> anchors_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<double>> context_;
  std::size_t dim_ = 0;
  std::vector<double> context_mean_;
  std::vector<Embedding> effective_;
  std::vector<double> norms_;
};

// Mean over samples of -log p(y): the empirical expected error. When
// `classes` is given, the softmax runs over that class list and every label
// must be in it.
double expected_error(const PromptHead& head, const EmbeddingSet& set, double tau,
                      std::optional<std::span<const ClassId>> classes = std::nullopt);

// Position of `cls` inside `classes`; throws if absent.
std::size_t local_index(std::span<const ClassId> classes, ClassId cls);

std::vector<ClassId> all_classes(std::size_t count);

// Checkpoint: `<stem>.json` manifest {M, D, class_names, tau, binary} and a
// `<stem>.emb` block in the EMB1 layout holding the M context rows (labels
// 0..M-1) followed by one anchor per class (label = class index).
struct HeadCheckpoint {
  PromptHead head;
  double tau = kDefaultTemperature;
};

void save_head(const PromptHead& head, double tau, const std::filesystem::path& json_path);
HeadCheckpoint load_head(const std::filesystem::path& json_path);

}  // namespace promix

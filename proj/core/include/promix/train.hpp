#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "promix/embedspace.hpp"
#include "promix/head.hpp"
#include "promix/losses.hpp"
#include "promix/mixture.hpp"

namespace promix {

struct AdamConfig {
  double lr = 0.002;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdConfig {
  double lr = 0.002;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct OptimizerConfig {
  AdamConfig prompt;
  SgdConfig weights;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t weight_epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HyperParams {
  double w = 5.0;
  double ent_weight = 8.0;
  double margin = 0.2;
  std::size_t context_length = 16;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Prompt tuning

struct PromptObjective {
  double loss = 0.0;
  // d(mean loss) / d(context row m), one row per context vector.
  std::vector<std::vector<double>> context_gradient;
};

// Mean loss over `samples` (softmax over `classes`) and its gradient with
// respect to every context row, chained through the renormalization of the
// class embeddings.
PromptObjective prompt_objective(const PromptHead& head, std::span<const LabeledSample> samples,
                                 std::span<const ClassId> classes, const LossConfig& loss,
                                 double tau);

struct TuneResult {
  PromptHead head;
  std::vector<double> loss_trace;  // per-epoch mean mini-batch loss
};

using EpochObserver = std::function<void(std::size_t epoch, const PromptHead& head)>;

// Mini-batch Adam on the context rows; anchors stay fixed. The softmax runs
// over the labels present in `train`. Shuffle order is seeded by opt.seed.
TuneResult tune_prompt(const PromptHead& init, const EmbeddingSet& train, const LossConfig& loss,
                       const OptimizerConfig& opt, double tau = kDefaultTemperature,
                       const EpochObserver& observer = {});

// ---------------------------------------------------------------------------
// Mixture weights

enum class WeightSide { kIn, kOut };

// Unconstrained coordinate moved by the optimizer: alpha for two-stage,
// log(tau_1 / tau_0) for one-stage. Direct weights have no coordinate.
double weight_coordinate(const MixtureWeights& weights, std::size_t prompt, WeightSide side);
MixtureWeights with_weight_coordinate(const MixtureWeights& weights, std::size_t prompt,
                                      WeightSide side, double value);

// Mean mixture cross-entropy of prompt i's training set, softmax over Y_i,
// as a function of prompt i's in-weight coordinate.
class InWeightObjective {
 public:
  InWeightObjective(const MixtureModel& model, std::size_t prompt, const EmbeddingSet& train);

  double value(const MixtureWeights& weights) const;
  double gradient(const MixtureWeights& weights) const;
  // Mean value and gradient over the listed sample indices.
  std::pair<double, double> evaluate(const MixtureWeights& weights,
                                     std::span<const std::size_t> indices) const;
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::size_t prompt_;
  std::size_t heads_;
  std::size_t classes_;
  std::vector<std::size_t> labels_;  // local class index per sample
  std::vector<double> sims_;         // [sample][class][head]
};

// ent_weight * mean over images of max(0, H_0 - H_i + margin), where H_0 is
// the normalized entropy of the generalized head over the out-class anchors
// and H_i that of prompt i with out-weight-scaled similarities.
class OutWeightObjective {
 public:
  OutWeightObjective(const MixtureModel& model, std::size_t prompt, const EmbeddingSet& images,
                     std::span<const Embedding> outclass_anchors, double margin,
                     double ent_weight);

  double value(const MixtureWeights& weights) const;
  double gradient(const MixtureWeights& weights) const;
  std::pair<double, double> evaluate(const MixtureWeights& weights,
                                     std::span<const std::size_t> indices) const;
  std::size_t size() const noexcept { return h_general_.size(); }

  // Normalized entropies for one image at the given weights.
  double generalized_entropy(std::size_t image) const { return h_general_.at(image); }
  double specialized_entropy(const MixtureWeights& weights, std::size_t image) const;

 private:
  std::size_t prompt_;
  std::size_t anchors_;
  double margin_;
  double ent_weight_;
  std::vector<double> h_general_;
  std::vector<double> sims_;  // [image][anchor], specialized head
};

struct WeightFitResult {
  MixtureWeights weights;
  // Objective (including the L2 term) before training and after each epoch.
  std::vector<double> trace;
  bool monotone = true;
  bool skipped = false;
  double learning_rate = 0.0;
};

// Momentum SGD on prompt i's in-weight coordinate. Requires train labels in
// Y_i.
WeightFitResult optimize_in_weight(const MixtureModel& model, std::size_t prompt,
                                   const EmbeddingSet& train, const OptimizerConfig& opt,
                                   std::size_t epochs);

// Momentum SGD on prompt i's out-weight coordinate. An empty anchor list
// skips the fit and keeps the current weights.
WeightFitResult optimize_out_weight(const MixtureModel& model, std::size_t prompt,
                                    const EmbeddingSet& images,
                                    std::span<const Embedding> outclass_anchors,
                                    const HyperParams& hyper, const OptimizerConfig& opt,
                                    std::size_t epochs);

}  // namespace promix

#pragma once

// Mixture of prompt heads.
//
// Head 0 is the frozen generalized head; heads 1..K are specialized, each
// owning one subset Y_i of a DomainPartition. For a candidate class l, head
// i >= 1 contributes with its in-weight when l is in Y_i and with its
// out-weight otherwise; head 0 takes the remaining simplex mass. The mixture
// logit is z(l) = sum_i w_i(l) s_i(l) / tau(l).

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "promix/embedspace.hpp"
#include "promix/head.hpp"

namespace promix {

enum class Parameterization {
  kDirect,    // pi_in / pi_out given explicitly, temperature fixed
  kOneStage,  // per-prompt tau_1 (K = 1 only), tau_0 fixed
  kTwoStage,  // per-prompt logits alpha with alpha_0 = 0, temperature fixed
};

std::string_view to_string(Parameterization p);
Parameterization parameterization_from_string(std::string_view name);

// In/out raw parameter pair of one specialized prompt. Meaning depends on the
// parameterization: pi values, tau_1 values, or alpha logits.
struct PromptWeightParams {
  double in = 0.0;
  double out = 0.0;
};

// Weights of all heads for one class, plus the temperature applied to it.
struct ClassWeights {
  std::vector<double> weights;  // size K+1, on the simplex
  double tau = kDefaultTemperature;
};

class MixtureWeights {
 public:
  MixtureWeights() = default;

  static MixtureWeights direct(std::vector<PromptWeightParams> pis,
                               double tau = kDefaultTemperature);
  // pi_in = pi_out = 0.5 for every prompt.
  static MixtureWeights uniform(std::size_t prompts, double tau = kDefaultTemperature);
  static MixtureWeights one_stage(double tau1_in, double tau1_out,
                                  double tau0 = kDefaultTemperature);
  static MixtureWeights two_stage(std::vector<PromptWeightParams> alphas,
                                  double tau = kDefaultTemperature);

  Parameterization parameterization() const noexcept { return param_; }
  std::size_t prompt_count() const noexcept { return params_.size(); }

  // tau_0 for one-stage, the fixed temperature otherwise.
  double base_temperature() const noexcept { return tau_; }

  // Raw parameters of prompt i (1-based, i in [1, K]).
  const PromptWeightParams& raw(std::size_t prompt) const;
  MixtureWeights with_raw(std::size_t prompt, PromptWeightParams params) const;

  // Weight of prompt i relative to the generalized head alone: the stored pi
  // (direct), tau_0/(tau_1 + tau_0) (one-stage), or sigmoid(alpha) (two-stage).
  double pi_in(std::size_t prompt) const;
  double pi_out(std::size_t prompt) const;

  // Coefficient multiplying prompt i's similarities in out-class logits when
  // paired with the generalized head: pi_out / tau for the out-class side.
  double out_logit_scale(std::size_t prompt) const;

  // Weights for a class owned by subset `domain` (0..K).
  ClassWeights resolve(std::size_t domain) const;

 private:
  Parameterization param_ = Parameterization::kDirect;
  std::vector<PromptWeightParams> params_;
  double tau_ = kDefaultTemperature;
};

struct MixtureModel {
  std::vector<PromptHead> heads;  // heads[0] generalized, heads[1..K] specialized
  MixtureWeights weights;
  DomainPartition partition;

  // Throws InvalidArgument unless head count = K+1 = subset count and all
  // heads share class list and dimension.
  void validate() const;
  std::size_t class_count() const { return heads.front().class_count(); }
};

// Per-class effective weight of head `prompt` (0..K).
double effective_weight(const MixtureWeights& weights, std::size_t prompt, ClassId cls,
                        const DomainPartition& partition);

// Mixture logits over `classes`.
std::vector<double> mixture_logits(const MixtureModel& model, const Embedding& x,
                                   std::span<const ClassId> classes);

PredictiveDistribution mixture_predict(const MixtureModel& model, const Embedding& x);
PredictiveDistribution mixture_predict(const MixtureModel& model, const Embedding& x,
                                       std::span<const ClassId> classes);

// Softmax of sum_i pi_i s_i / tau over all classes, for a single global
// simplex pi (one weight per head).
PredictiveDistribution global_mixture_predict(std::span<const PromptHead> heads,
                                              std::span<const double> pi, double tau,
                                              const Embedding& x);

double global_mixture_error(std::span<const PromptHead> heads, std::span<const double> pi,
                            double tau, const EmbeddingSet& set);

// sum_i pi_i err(head_i) - err(global mixture); non-negative by convexity of
// log-sum-exp.
double bound_gap(std::span<const PromptHead> heads, const EmbeddingSet& set,
                 std::span<const double> pi, double tau = kDefaultTemperature);

struct SubdomainError {
  double mass = 0.0;
  double error = 0.0;
  std::size_t count = 0;
};

struct ErrorDecomposition {
  std::vector<SubdomainError> subdomains;
  double total = 0.0;
};

// Splits the mixture's expected error over the partition's sub-domains.
// Predictions run over all classes.
ErrorDecomposition decompose_error(const MixtureModel& model, const EmbeddingSet& set);

// Expected error of the mixture over all classes.
double mixture_expected_error(const MixtureModel& model, const EmbeddingSet& set);

// d(-log p_mix(y)) / d pi_i for a global mixture with other weights held
// fixed: -(s_i(y) - sum_l p_mix(l) s_i(l)) / tau.
double mixture_ce_grad_wrt_weight(std::span<const PromptHead> heads, std::span<const double> pi,
                                  double tau, const Embedding& x, ClassId y,
                                  std::size_t prompt);

// Shannon entropy of `probs` divided by log |probs|. Requires |probs| >= 2.
double normalized_entropy(std::span<const double> probs);

// max(0, h_generalized - h_specialized + margin)
double ent_loss(double h_generalized, double h_specialized, double margin);

struct OneStageParams {
  double pi1 = 0.0;
  double tau = 0.0;
};

// pi_1 = tau0 / (tau1 + tau0), tau = tau1 tau0 / (tau1 + tau0).
OneStageParams one_stage_params(double tau1, double tau0 = kDefaultTemperature);

// softmax(alpha_0 = 0, alpha_1..alpha_K).
std::vector<double> two_stage_params(std::span<const double> alphas);

// Weight checkpoint JSON: {parameterization, tau_0, prompts: [{pi_in, pi_out,
// raw_in, raw_out}]}.
void save_weights(const MixtureWeights& weights, const std::filesystem::path& path);
MixtureWeights load_weights(const std::filesystem::path& path);

}  // namespace promix

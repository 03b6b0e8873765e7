#include "promix/mixture.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "promix/embedding_io.hpp"
#include "promix/error.hpp"

namespace promix {

std::string_view to_string(Parameterization p) {
  switch (p) {
    case Parameterization::kDirect: return "direct";
    case Parameterization::kOneStage: return "one_stage";
    case Parameterization::kTwoStage: return "two_stage";
  }
  return "?";
}

Parameterization parameterization_from_string(std::string_view name) {
  for (auto p : {Parameterization::kDirect, Parameterization::kOneStage,
                 Parameterization::kTwoStage}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidArgument("unknown weight parameterization '" + std::string(name) + "'");
}

namespace {

double sigmoid(double a) {
  return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

void check_temperature(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("temperature must be positive");
}

}  // namespace

MixtureWeights MixtureWeights::direct(std::vector<PromptWeightParams> pis, double tau) {
  check_temperature(tau);
  for (const auto& p : pis) {
    if (!(p.in >= 0.0 && p.in <= 1.0) || !(p.out >= 0.0 && p.out <= 1.0)) {
      throw InvalidArgument("direct mixture weights must lie in [0, 1]");
    }
  }
  MixtureWeights w;
  w.param_ = Parameterization::kDirect;
  w.params_ = std::move(pis);
  w.tau_ = tau;
  return w;
}

MixtureWeights MixtureWeights::uniform(std::size_t prompts, double tau) {
  return direct(std::vector<PromptWeightParams>(prompts, {0.5, 0.5}), tau);
}

MixtureWeights MixtureWeights::one_stage(double tau1_in, double tau1_out, double tau0) {
  check_temperature(tau0);
  check_temperature(tau1_in);
  check_temperature(tau1_out);
  MixtureWeights w;
  w.param_ = Parameterization::kOneStage;
  w.params_ = {{tau1_in, tau1_out}};
  w.tau_ = tau0;
  return w;
}

MixtureWeights MixtureWeights::two_stage(std::vector<PromptWeightParams> alphas, double tau) {
  check_temperature(tau);
  for (const auto& a : alphas) {
    if (!std::isfinite(a.in) || !std::isfinite(a.out)) {
      throw InvalidArgument("two-stage logits must be finite");
    }
  }
  MixtureWeights w;
  w.param_ = Parameterization::kTwoStage;
  w.params_ = std::move(alphas);
  w.tau_ = tau;
  return w;
}

const PromptWeightParams& MixtureWeights::raw(std::size_t prompt) const {
  if (prompt == 0 || prompt > params_.size()) {
    throw InvalidArgument("prompt index " + std::to_string(prompt) + " out of range");
  }
  return params_[prompt - 1];
}

MixtureWeights MixtureWeights::with_raw(std::size_t prompt, PromptWeightParams params) const {
  raw(prompt);
  auto copy = params_;
  copy[prompt - 1] = params;
  switch (param_) {
    case Parameterization::kDirect: return direct(std::move(copy), tau_);
    case Parameterization::kOneStage: return one_stage(copy[0].in, copy[0].out, tau_);
    case Parameterization::kTwoStage: return two_stage(std::move(copy), tau_);
  }
  return *this;
}

namespace {

double relative_weight(Parameterization param, double raw, double tau0) {
  switch (param) {
    case Parameterization::kDirect: return raw;
    case Parameterization::kOneStage: return tau0 / (raw + tau0);
    case Parameterization::kTwoStage: return sigmoid(raw);
  }
  return 0.0;
}

}  // namespace

double MixtureWeights::pi_in(std::size_t prompt) const {
  return relative_weight(param_, raw(prompt).in, tau_);
}

double MixtureWeights::pi_out(std::size_t prompt) const {
  return relative_weight(param_, raw(prompt).out, tau_);
}

double MixtureWeights::out_logit_scale(std::size_t prompt) const {
  if (param_ == Parameterization::kOneStage) return 1.0 / raw(prompt).out;
  return pi_out(prompt) / tau_;
}

ClassWeights MixtureWeights::resolve(std::size_t domain) const {
  const std::size_t k = params_.size();
  if (domain > k) throw InvalidArgument("domain index exceeds prompt count");
  ClassWeights cw;
  cw.weights.assign(k + 1, 0.0);
  cw.tau = tau_;
  switch (param_) {
    case Parameterization::kDirect: {
      double total = 0.0;
      for (std::size_t i = 1; i <= k; ++i) {
        const double w = (i == domain) ? params_[i - 1].in : params_[i - 1].out;
        cw.weights[i] = w;
        total += w;
      }
      if (total <= 1.0) {
        cw.weights[0] = std::clamp(1.0 - total, 0.0, 1.0);
      } else {
        for (std::size_t i = 1; i <= k; ++i) cw.weights[i] /= total;
      }
      break;
    }
    case Parameterization::kOneStage: {
      const double tau1 = (domain == 1) ? params_[0].in : params_[0].out;
      cw.weights[0] = tau1 / (tau1 + tau_);
      cw.weights[1] = tau_ / (tau1 + tau_);
      cw.tau = tau1 * tau_ / (tau1 + tau_);
      break;
    }
    case Parameterization::kTwoStage: {
      std::vector<double> logits(k + 1, 0.0);
      for (std::size_t i = 1; i <= k; ++i) {
        logits[i] = (i == domain) ? params_[i - 1].in : params_[i - 1].out;
      }
      cw.weights = stable_softmax(logits);
      break;
    }
  }
  return cw;
}

void MixtureModel::validate() const {
  if (heads.empty()) throw InvalidArgument("mixture needs at least the generalized head");
  if (heads.size() != weights.prompt_count() + 1) {
    throw InvalidArgument("head count must equal prompt count + 1");
  }
  if (partition.subset_count() != heads.size()) {
    throw InvalidArgument("partition subsets must align with heads");
  }
  for (const auto& h : heads) {
    if (h.dim() != heads.front().dim() || h.class_names() != heads.front().class_names()) {
      throw InvalidArgument("mixture heads must share class list and dimension");
    }
  }
  if (partition.class_count() != heads.front().class_count()) {
    throw InvalidArgument("partition class count does not match heads");
  }
}

double effective_weight(const MixtureWeights& weights, std::size_t prompt, ClassId cls,
                        const DomainPartition& partition) {
  const auto cw = weights.resolve(partition.domain_of(cls));
  if (prompt >= cw.weights.size()) throw InvalidArgument("prompt index out of range");
  return cw.weights[prompt];
}

std::vector<double> mixture_logits(const MixtureModel& model, const Embedding& x,
                                   std::span<const ClassId> classes) {
  if (x.dim() != model.heads.front().dim()) {
    throw InvalidArgument("input dimension does not match mixture");
  }
  std::vector<ClassWeights> by_domain;
  by_domain.reserve(model.partition.subset_count());
  for (std::size_t d = 0; d < model.partition.subset_count(); ++d) {
    by_domain.push_back(model.weights.resolve(d));
  }
  std::vector<double> z;
  z.reserve(classes.size());
  for (ClassId c : classes) {
    const auto& cw = by_domain[model.partition.domain_of(c)];
    double acc = 0.0;
    for (std::size_t i = 0; i < model.heads.size(); ++i) {
      if (cw.weights[i] == 0.0) continue;
      acc += cw.weights[i] * dot(x.values(), model.heads[i].class_embedding(c).values());
    }
    z.push_back(acc / cw.tau);
  }
  return z;
}

PredictiveDistribution mixture_predict(const MixtureModel& model, const Embedding& x) {
  const auto classes = all_classes(model.class_count());
  return mixture_predict(model, x, classes);
}

PredictiveDistribution mixture_predict(const MixtureModel& model, const Embedding& x,
                                       std::span<const ClassId> classes) {
  return PredictiveDistribution(stable_softmax(mixture_logits(model, x, classes)),
                                model.weights.base_temperature());
}

namespace {

void check_global(std::span<const PromptHead> heads, std::span<const double> pi) {
  if (heads.empty() || heads.size() != pi.size()) {
    throw InvalidArgument("need one global weight per head");
  }
  double total = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0)) throw InvalidArgument("global weights must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("global weights must sum to 1");
}

}  // namespace

PredictiveDistribution global_mixture_predict(std::span<const PromptHead> heads,
                                              std::span<const double> pi, double tau,
                                              const Embedding& x) {
  check_global(heads, pi);
  std::vector<double> mixed(heads.front().class_count(), 0.0);
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto s = heads[i].similarities(x);
    if (s.size() != mixed.size()) throw InvalidArgument("heads disagree on class count");
    for (std::size_t l = 0; l < mixed.size(); ++l) mixed[l] += pi[i] * s[l];
  }
  return predict(mixed, tau);
}

double global_mixture_error(std::span<const PromptHead> heads, std::span<const double> pi,
                            double tau, const EmbeddingSet& set) {
  if (set.empty()) throw InvalidArgument("expected error of an empty set");
  double total = 0.0;
  for (const auto& sample : set) {
    const auto p = global_mixture_predict(heads, pi, tau, sample.embedding);
    total += -std::log(std::max(p[sample.label], 1e-300));
  }
  return total / static_cast<double>(set.size());
}

double bound_gap(std::span<const PromptHead> heads, const EmbeddingSet& set,
                 std::span<const double> pi, double tau) {
  check_global(heads, pi);
  double convex = 0.0;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    convex += pi[i] * expected_error(heads[i], set, tau);
  }
  return convex - global_mixture_error(heads, pi, tau, set);
}

double mixture_expected_error(const MixtureModel& model, const EmbeddingSet& set) {
  if (set.empty()) throw InvalidArgument("expected error of an empty set");
  const auto classes = all_classes(model.class_count());
  double total = 0.0;
  for (const auto& sample : set) {
    const auto p = mixture_predict(model, sample.embedding, classes);
    total += -std::log(std::max(p[sample.label], 1e-300));
  }
  return total / static_cast<double>(set.size());
}

ErrorDecomposition decompose_error(const MixtureModel& model, const EmbeddingSet& set) {
  if (set.empty()) throw InvalidArgument("cannot decompose the error of an empty set");
  const auto classes = all_classes(model.class_count());
  ErrorDecomposition out;
  out.subdomains.resize(model.partition.subset_count());
  for (const auto& sample : set) {
    const std::size_t d = model.partition.domain_of(sample.label);
    const auto p = mixture_predict(model, sample.embedding, classes);
    out.subdomains[d].error += -std::log(std::max(p[sample.label], 1e-300));
    ++out.subdomains[d].count;
  }
  const double n = static_cast<double>(set.size());
  for (auto& sub : out.subdomains) {
    sub.mass = static_cast<double>(sub.count) / n;
    if (sub.count > 0) sub.error /= static_cast<double>(sub.count);
    out.total += sub.mass * sub.error;
  }
  return out;
}

double mixture_ce_grad_wrt_weight(std::span<const PromptHead> heads, std::span<const double> pi,
                                  double tau, const Embedding& x, ClassId y,
                                  std::size_t prompt) {
  if (prompt >= heads.size()) throw InvalidArgument("prompt index out of range");
  const auto p = global_mixture_predict(heads, pi, tau, x);
  if (y >= p.size()) throw InvalidArgument("label out of range");
  const auto s = heads[prompt].similarities(x);
  double weighted = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) weighted += p[l] * s[l];
  return -(s[y] - weighted) / tau;
}

double normalized_entropy(std::span<const double> probs) {
  if (probs.size() < 2) throw InvalidArgument("normalized entropy needs at least two classes");
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(probs.size()));
}

double ent_loss(double h_generalized, double h_specialized, double margin) {
  return std::max(0.0, h_generalized - h_specialized + margin);
}

OneStageParams one_stage_params(double tau1, double tau0) {
  if (!(tau1 > 0.0) || !(tau0 > 0.0)) throw InvalidArgument("temperatures must be positive");
  return {tau0 / (tau1 + tau0), tau1 * tau0 / (tau1 + tau0)};
}

std::vector<double> two_stage_params(std::span<const double> alphas) {
  std::vector<double> logits;
  logits.reserve(alphas.size() + 1);
  logits.push_back(0.0);
  logits.insert(logits.end(), alphas.begin(), alphas.end());
  return stable_softmax(logits);
}

void save_weights(const MixtureWeights& weights, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["parameterization"] = std::string(to_string(weights.parameterization()));
  doc["tau_0"] = weights.base_temperature();
  auto prompts = nlohmann::json::array();
  for (std::size_t i = 1; i <= weights.prompt_count(); ++i) {
    prompts.push_back({{"pi_in", weights.pi_in(i)},
                       {"pi_out", weights.pi_out(i)},
                       {"raw_in", weights.raw(i).in},
                       {"raw_out", weights.raw(i).out}});
  }
  doc["prompts"] = std::move(prompts);
  write_file_bytes(path, doc.dump(2) + "\n");
}

MixtureWeights load_weights(const std::filesystem::path& path) {
  try {
    const auto doc = nlohmann::json::parse(read_file_bytes(path));
    const auto param = parameterization_from_string(doc.at("parameterization").get<std::string>());
    const double tau = doc.at("tau_0").get<double>();
    std::vector<PromptWeightParams> raw;
    for (const auto& p : doc.at("prompts")) {
      raw.push_back({p.at("raw_in").get<double>(), p.at("raw_out").get<double>()});
    }
    switch (param) {
      case Parameterization::kDirect: return MixtureWeights::direct(std::move(raw), tau);
      case Parameterization::kOneStage:
        if (raw.size() != 1) throw InvalidArgument("one-stage weights require exactly one prompt");
        return MixtureWeights::one_stage(raw[0].in, raw[0].out, tau);
      case Parameterization::kTwoStage: return MixtureWeights::two_stage(std::move(raw), tau);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      "weights file " + path.string() + ": " + e.what());
  }
  throw FormatError(FormatError::Kind::kBadHeader, "unreadable weights file");
}

}  // namespace promix

#include "promix/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "promix/error.hpp"
#include "promix/random.hpp"

namespace promix {

void OptimizerConfig::validate() const {
  if (!(prompt.lr >= 0.0) || !(weights.lr >= 0.0)) {
    throw InvalidArgument("learning rates must be non-negative");
  }
  if (!(weights.momentum >= 0.0 && weights.momentum < 1.0)) {
    throw InvalidArgument("momentum must lie in [0, 1)");
  }
  if (!(prompt.beta1 >= 0.0 && prompt.beta1 < 1.0) ||
      !(prompt.beta2 >= 0.0 && prompt.beta2 < 1.0) || !(prompt.eps > 0.0)) {
    throw InvalidArgument("invalid Adam moment parameters");
  }
  if (!(prompt.weight_decay >= 0.0) || !(weights.weight_decay >= 0.0)) {
    throw InvalidArgument("weight decay must be non-negative");
  }
  if (epochs == 0 || batch_size == 0) throw InvalidArgument("epochs and batch size must be >= 1");
}

void HyperParams::validate() const {
  if (!(w >= 0.0) || !(ent_weight >= 0.0)) throw InvalidArgument("loss weights must be >= 0");
  if (!(margin >= 0.0 && margin <= 1.0)) throw InvalidArgument("margin must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Prompt tuning

PromptObjective prompt_objective(const PromptHead& head, std::span<const LabeledSample> samples,
                                 std::span<const ClassId> classes, const LossConfig& loss,
                                 double tau) {
  if (samples.empty()) throw InvalidArgument("prompt objective over an empty batch");
  const std::size_t dim = head.dim();
  const std::size_t m = head.context_length();

  // dL/dc = sum_n sum_l g_nl (x_n - s_nl e_l) / |u_l|, c = mean(context).
  std::vector<double> grad(dim, 0.0);
  std::vector<double> class_coef(classes.size(), 0.0);
  double total = 0.0;
  std::vector<double> s(classes.size());
  for (const auto& sample : samples) {
    const auto& x = sample.embedding;
    for (std::size_t l = 0; l < classes.size(); ++l) {
      s[l] = dot(x.values(), head.class_embedding(classes[l]).values());
    }
    const std::size_t y = local_index(classes, sample.label);
    total += evaluate_loss(loss, predict(s, tau), y);
    if (m == 0) continue;
    const auto g = loss_gradient(loss, s, y, tau);
    double x_coef = 0.0;
    for (std::size_t l = 0; l < classes.size(); ++l) {
      const double c = g[l] / head.unnormalized_norm(classes[l]);
      x_coef += c;
      class_coef[l] += c * s[l];
    }
    for (std::size_t k = 0; k < dim; ++k) grad[k] += x_coef * x[k];
  }
  for (std::size_t l = 0; l < classes.size(); ++l) {
    const auto& e = head.class_embedding(classes[l]);
    for (std::size_t k = 0; k < dim; ++k) grad[k] -= class_coef[l] * e[k];
  }

  const double n = static_cast<double>(samples.size());
  PromptObjective out;
  out.loss = total / n;
  if (m > 0) {
    for (auto& v : grad) v /= n * static_cast<double>(m);
    out.context_gradient.assign(m, grad);
  }
  return out;
}

TuneResult tune_prompt(const PromptHead& init, const EmbeddingSet& train, const LossConfig& loss,
                       const OptimizerConfig& opt, double tau, const EpochObserver& observer) {
  if (init.is_frozen()) throw InvalidArgument("cannot tune a frozen head");
  if (train.empty()) throw InvalidArgument("cannot tune on an empty training set");
  if (train.dim() != init.dim()) throw InvalidArgument("training set dimension mismatch");
  loss.validate();
  opt.validate();

  const auto classes = train.labels_present();
  const std::size_t m = init.context_length();
  const std::size_t dim = init.dim();
  const auto& cfg = opt.prompt;

  auto context = init.context();
  std::vector<std::vector<double>> first(m, std::vector<double>(dim, 0.0));
  auto second = first;
  std::size_t step = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(opt.seed, 0x7a11));

  TuneResult result{init, {}};
  std::vector<LabeledSample> batch;
  batch.reserve(opt.batch_size);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);

      const auto obj = prompt_objective(result.head, batch, classes, loss, tau);
      if (!std::isfinite(obj.loss)) {
        throw DivergenceError("prompt tuning diverged at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step) + " (loss " +
                              std::to_string(obj.loss) + ")");
      }
      epoch_loss += obj.loss * static_cast<double>(batch.size());

      ++step;
      const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < dim; ++k) {
          const double g = obj.context_gradient[r][k] + cfg.weight_decay * context[r][k];
          first[r][k] = cfg.beta1 * first[r][k] + (1.0 - cfg.beta1) * g;
          second[r][k] = cfg.beta2 * second[r][k] + (1.0 - cfg.beta2) * g * g;
          const double denom = std::sqrt(second[r][k] / bias2) + cfg.eps;
          context[r][k] -= cfg.lr * (first[r][k] / bias1) / denom;
        }
      }
      result.head = result.head.with_context(context);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(train.size()));
    if (observer) observer(epoch, result.head);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Mixture weights

namespace {

const double& side_ref(const PromptWeightParams& p, WeightSide side) {
  return side == WeightSide::kIn ? p.in : p.out;
}

double sigmoid(double a) {
  return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

}  // namespace

double weight_coordinate(const MixtureWeights& weights, std::size_t prompt, WeightSide side) {
  const double raw = side_ref(weights.raw(prompt), side);
  switch (weights.parameterization()) {
    case Parameterization::kTwoStage: return raw;
    case Parameterization::kOneStage: return std::log(raw / weights.base_temperature());
    case Parameterization::kDirect: break;
  }
  throw InvalidArgument("direct mixture weights have no optimization coordinate");
}

MixtureWeights with_weight_coordinate(const MixtureWeights& weights, std::size_t prompt,
                                      WeightSide side, double value) {
  auto params = weights.raw(prompt);
  double raw = 0.0;
  switch (weights.parameterization()) {
    case Parameterization::kTwoStage: raw = value; break;
    case Parameterization::kOneStage: raw = weights.base_temperature() * std::exp(value); break;
    case Parameterization::kDirect:
      throw InvalidArgument("direct mixture weights have no optimization coordinate");
  }
  (side == WeightSide::kIn ? params.in : params.out) = raw;
  return weights.with_raw(prompt, params);
}

InWeightObjective::InWeightObjective(const MixtureModel& model, std::size_t prompt,
                                     const EmbeddingSet& train)
    : prompt_(prompt), heads_(model.heads.size()) {
  model.validate();
  if (prompt == 0 || prompt >= heads_) throw InvalidArgument("in-weight prompt out of range");
  if (train.empty()) throw InvalidArgument("in-weight fit needs training samples");
  const auto& classes = model.partition.subset(prompt);
  classes_ = classes.size();
  labels_.reserve(train.size());
  sims_.reserve(train.size() * classes_ * heads_);
  for (const auto& sample : train) {
    if (model.partition.domain_of(sample.label) != prompt) {
      throw InvalidArgument("in-weight training label outside the prompt's class domain");
    }
    labels_.push_back(local_index(classes, sample.label));
    for (ClassId c : classes) {
      for (const auto& head : model.heads) {
        sims_.push_back(dot(sample.embedding.values(), head.class_embedding(c).values()));
      }
    }
  }
}

std::pair<double, double> InWeightObjective::evaluate(const MixtureWeights& weights,
                                                      std::span<const std::size_t> indices) const {
  const auto cw = weights.resolve(prompt_);
  const bool one_stage = weights.parameterization() == Parameterization::kOneStage;
  if (weights.parameterization() == Parameterization::kDirect) {
    throw InvalidArgument("direct mixture weights have no optimization coordinate");
  }
  const double tau1 = one_stage ? weights.raw(prompt_).in : 0.0;

  std::vector<double> z(classes_), dz(classes_);
  double value = 0.0, grad = 0.0;
  for (std::size_t n : indices) {
    const double* s = &sims_[n * classes_ * heads_];
    for (std::size_t l = 0; l < classes_; ++l) {
      const double* sl = s + l * heads_;
      double mixed = 0.0;
      for (std::size_t h = 0; h < heads_; ++h) mixed += cw.weights[h] * sl[h];
      z[l] = mixed / cw.tau;
      dz[l] = one_stage ? -sl[prompt_] / tau1
                        : cw.weights[prompt_] * (sl[prompt_] - mixed) / cw.tau;
    }
    const auto p = stable_softmax(z);
    const std::size_t y = labels_[n];
    value += -std::log(std::max(p[y], 1e-300));
    for (std::size_t l = 0; l < classes_; ++l) grad += (p[l] - (l == y ? 1.0 : 0.0)) * dz[l];
  }
  const double count = static_cast<double>(indices.size());
  return {value / count, grad / count};
}

double InWeightObjective::value(const MixtureWeights& weights) const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return evaluate(weights, all).first;
}

double InWeightObjective::gradient(const MixtureWeights& weights) const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return evaluate(weights, all).second;
}

OutWeightObjective::OutWeightObjective(const MixtureModel& model, std::size_t prompt,
                                       const EmbeddingSet& images,
                                       std::span<const Embedding> outclass_anchors,
                                       double margin, double ent_weight)
    : prompt_(prompt), anchors_(outclass_anchors.size()), margin_(margin),
      ent_weight_(ent_weight) {
  model.validate();
  if (prompt == 0 || prompt >= model.heads.size()) {
    throw InvalidArgument("out-weight prompt out of range");
  }
  if (anchors_ < 2) throw InvalidArgument("out-class set needs at least two anchors");
  if (images.empty()) throw InvalidArgument("out-weight fit needs training images");

  std::vector<Embedding> anchors(outclass_anchors.begin(), outclass_anchors.end());
  std::vector<std::string> names(anchors_);
  for (std::size_t k = 0; k < anchors_; ++k) names[k] = "out_" + std::to_string(k);
  const auto general = model.heads[0].with_anchors(anchors, names);
  const auto special = model.heads[prompt].with_anchors(anchors, names);
  const double tau0 = model.weights.base_temperature();
  const auto every = all_classes(anchors_);

  h_general_.reserve(images.size());
  sims_.reserve(images.size() * anchors_);
  for (const auto& sample : images) {
    auto s0 = general.similarities(sample.embedding, every);
    h_general_.push_back(normalized_entropy(predict(s0, tau0).probabilities()));
    auto si = special.similarities(sample.embedding, every);
    sims_.insert(sims_.end(), si.begin(), si.end());
  }
}

double OutWeightObjective::specialized_entropy(const MixtureWeights& weights,
                                               std::size_t image) const {
  const double scale = weights.out_logit_scale(prompt_);
  std::vector<double> z(sims_.begin() + static_cast<long>(image * anchors_),
                        sims_.begin() + static_cast<long>((image + 1) * anchors_));
  for (auto& v : z) v *= scale;
  return normalized_entropy(stable_softmax(z));
}

std::pair<double, double> OutWeightObjective::evaluate(const MixtureWeights& weights,
                                                       std::span<const std::size_t> indices) const {
  const double scale = weights.out_logit_scale(prompt_);
  double dscale = 0.0;
  switch (weights.parameterization()) {
    case Parameterization::kTwoStage: {
      const double sig = sigmoid(weights.raw(prompt_).out);
      dscale = sig * (1.0 - sig) / weights.base_temperature();
      break;
    }
    case Parameterization::kOneStage:
      dscale = -scale;
      break;
    case Parameterization::kDirect:
      throw InvalidArgument("direct mixture weights have no optimization coordinate");
  }
  const double log_n = std::log(static_cast<double>(anchors_));

  std::vector<double> z(anchors_);
  double value = 0.0, grad = 0.0;
  for (std::size_t n : indices) {
    const double* s = &sims_[n * anchors_];
    for (std::size_t k = 0; k < anchors_; ++k) z[k] = scale * s[k];
    const auto p = stable_softmax(z);
    double h_raw = 0.0;
    for (double pk : p) {
      if (pk > 0.0) h_raw -= pk * std::log(pk);
    }
    const double hinge = h_general_[n] - h_raw / log_n + margin_;
    if (hinge <= 0.0) continue;
    value += hinge;
    double dh_dscale = 0.0;
    for (std::size_t k = 0; k < anchors_; ++k) {
      if (p[k] > 0.0) dh_dscale -= p[k] * (std::log(p[k]) + h_raw) * s[k];
    }
    grad += -(dh_dscale / log_n) * dscale;
  }
  const double count = static_cast<double>(indices.size());
  return {ent_weight_ * value / count, ent_weight_ * grad / count};
}

double OutWeightObjective::value(const MixtureWeights& weights) const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return evaluate(weights, all).first;
}

double OutWeightObjective::gradient(const MixtureWeights& weights) const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return evaluate(weights, all).second;
}

namespace {

template <typename Objective>
WeightFitResult fit_coordinate(const Objective& objective, const MixtureWeights& start,
                               std::size_t prompt, WeightSide side, const OptimizerConfig& opt,
                               std::size_t epochs, std::uint64_t stream) {
  const double wd = opt.weights.weight_decay;
  const double theta0 = weight_coordinate(start, prompt, side);

  auto regularized = [&](double theta) {
    return objective.value(with_weight_coordinate(start, prompt, side, theta)) +
           0.5 * wd * theta * theta;
  };

  auto run = [&](double lr) {
    WeightFitResult result;
    result.learning_rate = lr;
    double theta = theta0;
    double velocity = 0.0;
    double best_theta = theta0;
    result.trace.push_back(regularized(theta0));
    double best_value = result.trace.back();

    std::vector<std::size_t> order(objective.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(opt.seed, stream));
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t b = 0; b < order.size(); b += opt.batch_size) {
        const std::size_t e = std::min(order.size(), b + opt.batch_size);
        const auto w = with_weight_coordinate(start, prompt, side, theta);
        const double g =
            objective.evaluate(w, std::span<const std::size_t>(order).subspan(b, e - b)).second +
            wd * theta;
        velocity = opt.weights.momentum * velocity + g;
        theta -= lr * velocity;
        if (!std::isfinite(theta)) {
          throw DivergenceError("mixture weight optimization diverged at epoch " +
                                std::to_string(epoch));
        }
      }
      const double v = regularized(theta);
      if (!std::isfinite(v)) throw DivergenceError("mixture weight objective is not finite");
      if (v > result.trace.back() + 1e-9) result.monotone = false;
      result.trace.push_back(v);
      if (v < best_value) {
        best_value = v;
        best_theta = theta;
      }
    }
    result.weights = with_weight_coordinate(start, prompt, side,
                                            result.monotone ? theta : best_theta);
    return result;
  };

  auto first = run(opt.weights.lr);
  if (first.monotone) return first;
  return run(opt.weights.lr * 0.1);
}

}  // namespace

WeightFitResult optimize_in_weight(const MixtureModel& model, std::size_t prompt,
                                   const EmbeddingSet& train, const OptimizerConfig& opt,
                                   std::size_t epochs) {
  opt.validate();
  InWeightObjective objective(model, prompt, train);
  return fit_coordinate(objective, model.weights, prompt, WeightSide::kIn, opt, epochs,
                        0x1a0 + prompt);
}

WeightFitResult optimize_out_weight(const MixtureModel& model, std::size_t prompt,
                                    const EmbeddingSet& images,
                                    std::span<const Embedding> outclass_anchors,
                                    const HyperParams& hyper, const OptimizerConfig& opt,
                                    std::size_t epochs) {
  opt.validate();
  hyper.validate();
  if (outclass_anchors.empty()) {
    WeightFitResult skipped;
    skipped.weights = model.weights;
    skipped.skipped = true;
    return skipped;
  }
  OutWeightObjective objective(model, prompt, images, outclass_anchors, hyper.margin,
                               hyper.ent_weight);
  // Hinge already inactive on every image: nothing to fit.
  if (objective.value(model.weights) == 0.0) {
    WeightFitResult unchanged;
    unchanged.weights = model.weights;
    unchanged.trace.push_back(0.0);
    unchanged.learning_rate = opt.weights.lr;
    return unchanged;
  }
  return fit_coordinate(objective, model.weights, prompt, WeightSide::kOut, opt, epochs,
                        0x2b0 + prompt);
}

}  // namespace promix

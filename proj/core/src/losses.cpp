#include "promix/losses.hpp"

#include <algorithm>
#include <cmath>

#include "promix/error.hpp"

namespace promix {

namespace {

void check_target(const PredictiveDistribution& p, std::size_t y) {
  if (y >= p.size()) throw InvalidArgument("target index out of range");
}

double safe_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

// Mass outside the target, summed directly so it stays accurate when p(y) ~ 1.
double complement(std::span<const double> probs, std::size_t y) {
  double rest = 0.0;
  for (std::size_t l = 0; l < probs.size(); ++l) {
    if (l != y) rest += probs[l];
  }
  return rest;
}

// g = p(y) * dL/dp(y) for losses of the form L = f(p(y)).
double scaled_derivative(const LossConfig& config, double py, double rest, std::size_t classes) {
  const double mae_scale = 2.0 / static_cast<double>(classes);
  switch (config.kind) {
    case LossKind::kCE:
      return -1.0;
    case LossKind::kCEPlusCoA:
      return -1.0 - config.w * py;
    case LossKind::kFocal: {
      if (config.gamma == 0.0) return -1.0;
      if (rest <= 0.0) return 0.0;
      return config.gamma * std::pow(rest, config.gamma - 1.0) * py * safe_log(py) -
             std::pow(rest, config.gamma);
    }
    case LossKind::kGCE:
      return -std::pow(py, config.q);
    case LossKind::kMAE:
      return -mae_scale * py;
    case LossKind::kCEPlusMAE:
      return -1.0 - config.w * mae_scale * py;
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCE: return "ce";
    case LossKind::kCEPlusCoA: return "ce+coa";
    case LossKind::kFocal: return "focal";
    case LossKind::kGCE: return "gce";
    case LossKind::kMAE: return "mae";
    case LossKind::kCEPlusMAE: return "ce+mae";
  }
  return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
  for (auto kind : {LossKind::kCE, LossKind::kCEPlusCoA, LossKind::kFocal, LossKind::kGCE,
                    LossKind::kMAE, LossKind::kCEPlusMAE}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown loss kind '" + std::string(name) + "'");
}

void LossConfig::validate() const {
  if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("loss weight w must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("focal gamma must be >= 0");
  if (!(q > 0.0 && q <= 1.0)) throw InvalidArgument("GCE q must lie in (0, 1]");
}

double ce_loss(const PredictiveDistribution& p, std::size_t y) {
  check_target(p, y);
  return -safe_log(p[y]);
}

double coa_loss(const PredictiveDistribution& p, std::size_t y) {
  check_target(p, y);
  return 1.0 - p[y];
}

double prompt_loss(const PredictiveDistribution& p, std::size_t y, double w) {
  return ce_loss(p, y) + w * coa_loss(p, y);
}

double focal_loss(const PredictiveDistribution& p, std::size_t y, double gamma) {
  check_target(p, y);
  return -std::pow(1.0 - p[y], gamma) * safe_log(p[y]);
}

double gce_loss(const PredictiveDistribution& p, std::size_t y, double q) {
  check_target(p, y);
  if (!(q > 0.0 && q <= 1.0)) throw InvalidArgument("GCE q must lie in (0, 1]");
  return (1.0 - std::pow(p[y], q)) / q;
}

double mae_loss(const PredictiveDistribution& p, std::size_t y) {
  check_target(p, y);
  double total = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    total += std::abs((l == y ? 1.0 : 0.0) - p[l]);
  }
  return total / static_cast<double>(p.size());
}

double ce_plus_mae_loss(const PredictiveDistribution& p, std::size_t y, double w) {
  return ce_loss(p, y) + w * mae_loss(p, y);
}

double evaluate_loss(const LossConfig& config, const PredictiveDistribution& p, std::size_t y) {
  switch (config.kind) {
    case LossKind::kCE: return ce_loss(p, y);
    case LossKind::kCEPlusCoA: return prompt_loss(p, y, config.w);
    case LossKind::kFocal: return focal_loss(p, y, config.gamma);
    case LossKind::kGCE: return gce_loss(p, y, config.q);
    case LossKind::kMAE: return mae_loss(p, y);
    case LossKind::kCEPlusMAE: return ce_plus_mae_loss(p, y, config.w);
  }
  return 0.0;
}

std::vector<double> loss_gradient(const LossConfig& config, std::span<const double> s,
                                  std::size_t y, double tau) {
  const auto p = predict(s, tau);
  if (y >= p.size()) throw InvalidArgument("target index out of range");
  const auto probs = p.probabilities();
  const double rest = complement(probs, y);
  const double g = scaled_derivative(config, probs[y], rest, probs.size());
  std::vector<double> grad(probs.size());
  for (std::size_t l = 0; l < probs.size(); ++l) {
    grad[l] = (l == y ? g * rest : -g * probs[l]) / tau;
  }
  return grad;
}

std::vector<double> grad_prompt_loss(std::span<const double> s, std::size_t y, double tau,
                                     double w) {
  return loss_gradient(LossConfig{LossKind::kCEPlusCoA, w, 2.0, 0.7}, s, y, tau);
}

}  // namespace promix

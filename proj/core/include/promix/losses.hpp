#pragma once

// Classification losses on a single categorical target and their gradients
// with respect to the similarity vector that produced the prediction.
//
// Every loss here depends on the prediction only through p(y), so gradients
// are formed as dL/dp(y) * dp(y)/ds.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promix/head.hpp"

namespace promix {

// Floor applied inside logarithms.
inline constexpr double kProbabilityFloor = 1e-300;

enum class LossKind { kCE, kCEPlusCoA, kFocal, kGCE, kMAE, kCEPlusMAE };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

struct LossConfig {
  LossKind kind = LossKind::kCEPlusCoA;
  double w = 5.0;      // CoA or MAE weight
  double gamma = 2.0;  // focal exponent
  double q = 0.7;      // GCE exponent

  void validate() const;
};

// -log p(y)
double ce_loss(const PredictiveDistribution& p, std::size_t y);
// 1 - p(y)
double coa_loss(const PredictiveDistribution& p, std::size_t y);
// ce + w * coa
double prompt_loss(const PredictiveDistribution& p, std::size_t y, double w);
// -(1 - p(y))^gamma * log p(y)
double focal_loss(const PredictiveDistribution& p, std::size_t y, double gamma);
// (1 - p(y)^q) / q
double gce_loss(const PredictiveDistribution& p, std::size_t y, double q);
// (1/|Y|) * sum_l |1{l=y} - p(l)|
double mae_loss(const PredictiveDistribution& p, std::size_t y);
// ce + w * mae
double ce_plus_mae_loss(const PredictiveDistribution& p, std::size_t y, double w);

double evaluate_loss(const LossConfig& config, const PredictiveDistribution& p, std::size_t y);

// Analytic gradient of prompt_loss(predict(s, tau), y, w) with respect to s:
//   dL/ds(y) = -(1/tau) (1 - p(y)) (1 + w p(y))
//   dL/ds(c) =  (1/tau) p(c) (1 + w p(y)),  c != y
std::vector<double> grad_prompt_loss(std::span<const double> s, std::size_t y, double tau,
                                     double w);

// Gradient of evaluate_loss(config, predict(s, tau), y) with respect to s.
std::vector<double> loss_gradient(const LossConfig& config, std::span<const double> s,
                                  std::size_t y, double tau);

}  // namespace promix

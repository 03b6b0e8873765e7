#include "promix/stats.hpp"

#include <cmath>
#include <limits>

#include "promix/error.hpp"

namespace promix {

namespace {

constexpr double kTolerance = 1e-10;
constexpr int kMaxIterations = 500;

double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kTolerance * 1e-3) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw InvalidArgument("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw InvalidArgument("t statistic is NaN");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult t_test_paired_one_sided(std::span<const double> diffs) {
  const std::size_t n = diffs.size();
  if (n < 2) throw InvalidArgument("paired t-test needs at least two differences");
  double mean = 0.0;
  for (double d : diffs) {
    if (!std::isfinite(d)) throw InvalidArgument("paired t-test difference is not finite");
    mean += d;
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) throw InvalidArgument("paired t-test differences have zero variance");
  TTestResult r;
  r.n = n;
  r.t = mean / (std::sqrt(var) / std::sqrt(static_cast<double>(n)));
  // Upper tail computed directly to keep precision for large t.
  if (r.t == 0.0) {
    r.p = 0.5;
  } else {
    const double dof = static_cast<double>(n - 1);
    const double x = dof / (dof + r.t * r.t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, x);
    r.p = r.t > 0.0 ? tail : 1.0 - tail;
  }
  return r;
}

}  // namespace promix

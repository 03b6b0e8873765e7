#pragma once

#include <span>

namespace promix {

// I_x(a, b), evaluated with a modified Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// CDF of Student's t distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;
  std::size_t n = 0;
};

// One-sided paired test of mean(diffs) > 0. Throws InvalidArgument when
// fewer than two differences are given or their sample variance is zero.
TTestResult t_test_paired_one_sided(std::span<const double> diffs);

}  // namespace promix

#pragma once

#include <vector>

namespace pcle {

/// Regularised incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability of Student's t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

struct TTestResult {
  double mean_difference = 0.0;  // mean(a - b)
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

/// Paired two-sided t-test of a against b. Zero variance of the differences
/// gives t = 0, p = 1 for a zero mean and t = +-inf, p = 0 otherwise.
/// Throws ConfigError for fewer than two pairs or mismatched lengths.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace pcle

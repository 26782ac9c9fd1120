#pragma once

#include <span>

namespace cflab {

struct CorrelationResult {
  double r = 0.0;   // Pearson coefficient in [-1, 1]
  double df = 0.0;  // n - 2
  double p = 1.0;   // two-sided
};

struct WelchResult {
  double t = 0.0;
  double df = 0.0;  // Welch-Satterthwaite, real-valued
  double p = 1.0;   // two-sided
};

/// Sample Pearson correlation with the two-sided p-value of the exact
/// t-transform t = r * sqrt(df / (1 - r^2)), df = n - 2.
/// Preconditions: equal lengths (std::invalid_argument otherwise), n >= 3,
/// and neither sequence constant (std::domain_error "zero variance").
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

/// Welch's unequal-variance t-test, two-sided. Unbiased (n-1) sample
/// variances. Both samples need >= 2 elements; two zero-variance samples
/// with equal means have no defined statistic (std::domain_error).
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued fraction evaluated with
/// the modified Lentz scheme (tolerance 1e-12, at most 300 terms).
double regularized_incomplete_beta(double x, double a, double b);

/// Two-sided tail probability of Student's t with `df` degrees of freedom:
/// I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);

}  // namespace cflab

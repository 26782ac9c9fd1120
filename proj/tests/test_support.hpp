#pragma once

// Shared test oracles, independent of the library's own code paths.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

// Tail integral of the Student-t density on [T, inf), T >= 0, by Simpson's
// rule on the substitution u = T + s/(1-s). Accurate well past 1e-10 for the
// df values used in tests.
inline double t_tail_integral(double T, double df) {
  const double logc =
      std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
  auto integrand = [&](double s) {
    const double u = T + s / (1.0 - s);
    const double logpdf = logc - 0.5 * (df + 1.0) * std::log1p(u * u / df);
    const double jac = 1.0 / ((1.0 - s) * (1.0 - s));
    return std::exp(logpdf) * jac;
  };
  const int n = 40000;  // even
  const double h = (1.0 - 1e-12) / n;
  double acc = integrand(0.0) + integrand(1.0 - 1e-12);
  for (int i = 1; i < n; ++i) acc += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Two-sided p-value oracle.
inline double t_two_sided_p_oracle(double t, double df) {
  return 2.0 * t_tail_integral(std::fabs(t), df);
}

// Unique scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 gen(std::random_device{}());
  const auto dir =
      std::filesystem::temp_directory_path() / ("cflab_test_" + tag + "_" + std::to_string(gen()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport

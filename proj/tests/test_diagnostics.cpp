#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "cflab/diagnostics.hpp"
#include "cflab/matrix.hpp"

using namespace cflab;

TEST_SUITE("diagnostics") {

TEST_CASE("cf indicator thresholds strictly") {
  CHECK(cf_indicator(0.087, 1.412, 0.2) == 1);
  CHECK(cf_indicator(0.5, 0.5, 0.2) == 0);
  CHECK(cf_indicator(0.076, 0.079, 0.2) == 0);
  CHECK(cf_indicator(0.3, 0.5, 0.2) == 0);  // change of exactly eps
  CHECK(cf_indicator(0.3, 0.5 + 1e-12, 0.2) == 1);
  CHECK_THROWS_AS(cf_indicator(-0.1, 0.5, 0.2), std::invalid_argument);
}

TEST_CASE("fisher diagonal squares elementwise") {
  const std::vector<double> g{1.0, -2.0, 3.0};
  CHECK(fisher_diag(g) == std::vector<double>{1.0, 4.0, 9.0});
  const std::vector<double> zero(4, 0.0);
  CHECK(fisher_diag(zero) == std::vector<double>(4, 0.0));
}

TEST_CASE("fisher diagonal equals the diagonal of the outer product") {
  Rng rng(61, 0);
  std::vector<double> g(6);
  for (double& v : g) v = rng.uniform(-2.0, 2.0);
  const auto diag = fisher_diag(g);
  Matrix gm(6, 1);
  for (std::size_t i = 0; i < 6; ++i) gm(i, 0) = g[i];
  Matrix gt(1, 6);
  for (std::size_t i = 0; i < 6; ++i) gt(0, i) = g[i];
  const Matrix outer = matmul(gm, gt);
  for (std::size_t i = 0; i < 6; ++i) REQUIRE(diag[i] == outer(i, i));
  CHECK(norm_inf(diag) == doctest::Approx(norm_inf(g) * norm_inf(g)).epsilon(1e-15));
}

TEST_CASE("taylor estimate degenerate cases") {
  const std::vector<double> g{0.5, -1.0, 2.0};
  const std::vector<double> h{0.1, 0.2, 0.3};
  CHECK(taylor_loss_estimate(3.0, g, h, 0.0) == 3.0);
  const std::vector<double> h0(3, 0.0);
  const double gg = 0.25 + 1.0 + 4.0;
  CHECK(taylor_loss_estimate(3.0, g, h0, 0.01) == doctest::Approx(3.0 + 0.01 * gg).epsilon(1e-15));
  const std::vector<double> g0(3, 0.0);
  CHECK(taylor_loss_estimate(7.0, g0, h, 123.0) == 7.0);
}

TEST_CASE("taylor estimate is exact on diagonal quadratics") {
  // L(v) = 0.5 v^T D v; gradient at v is D v; Hessian diag is D.
  Rng rng(62, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 8;
    std::vector<double> d(n), v(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = rng.uniform(0.1, 2.0);
      v[i] = rng.uniform(-1.0, 1.0);
      g[i] = d[i] * v[i];
    }
    double l0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) l0 += 0.5 * d[i] * v[i] * v[i];
    const double eps = rng.uniform(-0.5, 0.5);
    double exact = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = v[i] + eps * g[i];
      exact += 0.5 * d[i] * vi * vi;
    }
    const double est = taylor_loss_estimate(l0, g, d, eps);
    REQUIRE(est == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("first-step diagnostic on identical tasks and at a stationary point") {
  Rng rng(63, 0);
  auto p = init_params(rng);
  Matrix x(8, kInputDim);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<std::uint8_t> y(8, 1);

  const auto same = first_step_diag(p, x, y, x, y, /*keep_vectors=*/true);
  CHECK(same.gnew_inf == same.gold_inf);
  CHECK(same.fisher_diag_max == doctest::Approx(same.gnew_inf * same.gnew_inf).epsilon(1e-15));
  CHECK(same.g_new == same.g_old);

  // saturate the logit so yhat rounds to the labels exactly
  NetParams stationary;
  stationary.b2() = 50.0;
  const auto diag = first_step_diag(stationary, x, y, x, y);
  CHECK(diag.gnew_inf <= 1e-9);
  CHECK(diag.gold_inf <= 1e-9);
}

TEST_CASE("correlation table on synthetic reports") {
  std::vector<CurriculumAggregate> reports;
  Rng rng(64, 0);
  for (int i = 0; i < 12; ++i) {
    CurriculumAggregate a;
    a.index = i;
    a.gnew_mean = rng.uniform(0.1, 1.0);
    a.dl1_mean = 3.0 * a.gnew_mean;  // exact linear relation
    a.gold_mean = 0.5;               // constant: undefined pairing
    a.d_omega = rng.uniform(0.0, 0.25);
    a.d_theta = std::sqrt(0.25 * 0.25 - a.d_omega * a.d_omega);
    reports.push_back(a);
  }
  const auto table = correlate_forgetting(reports);
  REQUIRE(table.dl1_vs_gnew.has_value());
  CHECK(table.dl1_vs_gnew->r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(table.dl1_vs_gold.has_value());
  REQUIRE(table.dl1_vs_domega.has_value());

  // scaling the heuristic column leaves r unchanged
  auto scaled = reports;
  for (auto& a : scaled) a.gnew_mean *= 17.0;
  const auto table2 = correlate_forgetting(scaled);
  CHECK(table2.dl1_vs_gnew->r == doctest::Approx(table.dl1_vs_gnew->r).epsilon(1e-12));

  CHECK_THROWS_AS(correlate_forgetting(std::vector<CurriculumAggregate>(2)),
                  std::invalid_argument);
}

}  // TEST_SUITE

#include "cflab/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "cflab/matrix.hpp"

namespace cflab {

int cf_indicator(double loss_before, double loss_after, double eps) {
  if (loss_before < 0.0 || loss_after < 0.0)
    throw std::invalid_argument("cf_indicator: losses must be >= 0");
  return loss_after - loss_before > eps ? 1 : 0;
}

std::vector<double> fisher_diag(std::span<const double> g) {
  return elementwise_square(g);
}

double taylor_loss_estimate(double l0, std::span<const double> g, std::span<const double> h_diag,
                            double eps_step) {
  if (g.size() != h_diag.size())
    throw std::invalid_argument("taylor_loss_estimate: length mismatch");
  double gg = 0.0;
  double ghg = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    gg += g[i] * g[i];
    ghg += g[i] * g[i] * h_diag[i];
  }
  return l0 + eps_step * gg + 0.5 * eps_step * eps_step * ghg;
}

FirstStepDiag first_step_diag(const NetParams& p, const Matrix& x_next,
                              std::span<const std::uint8_t> y_next, const Matrix& x_prev,
                              std::span<const std::uint8_t> y_prev, bool keep_vectors) {
  BackwardResult next = backward_eval(p, x_next, y_next);
  BackwardResult prev = backward_eval(p, x_prev, y_prev);
  FirstStepDiag d;
  d.gnew_inf = norm_inf(next.grad);
  d.gnew_norm2 = norm2(next.grad);
  d.gold_inf = norm_inf(prev.grad);
  d.fisher_diag_max = d.gnew_inf * d.gnew_inf;
  if (keep_vectors) {
    d.g_new = std::move(next.grad);
    d.g_old = std::move(prev.grad);
  }
  return d;
}

namespace {

std::optional<CorrelationResult> try_pearson(const std::vector<double>& x,
                                             const std::vector<double>& y) {
  for (double v : x)
    if (!std::isfinite(v)) return std::nullopt;
  for (double v : y)
    if (!std::isfinite(v)) return std::nullopt;
  try {
    return pearson(x, y);
  } catch (const std::domain_error&) {
    return std::nullopt;  // constant column: correlation undefined
  }
}

}  // namespace

CorrelationTable correlate_forgetting(std::span<const CurriculumAggregate> reports) {
  if (reports.size() < 3)
    throw std::invalid_argument("correlate_forgetting: need at least 3 curricula");
  std::vector<double> dl1, gnew, gold, dom, dth;
  for (const auto& r : reports) {
    dl1.push_back(r.dl1_mean);
    gnew.push_back(r.gnew_mean);
    gold.push_back(r.gold_mean);
    dom.push_back(r.d_omega);
    dth.push_back(r.d_theta);
  }
  CorrelationTable t;
  t.dl1_vs_gnew = try_pearson(dl1, gnew);
  t.dl1_vs_gold = try_pearson(dl1, gold);
  t.dl1_vs_domega = try_pearson(dl1, dom);
  t.dl1_vs_dtheta = try_pearson(dl1, dth);
  return t;
}

}  // namespace cflab

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cflab/gratings.hpp"
#include "cflab/model.hpp"
#include "cflab/stats.hpp"

namespace cflab {

/// 1 iff loss_after - loss_before > eps (strictly; a change of exactly eps
/// does not count as forgetting).
int cf_indicator(double loss_before, double loss_after, double eps);

/// Diagonal of the empirical Fisher information for a single gradient:
/// elementwise square.
std::vector<double> fisher_diag(std::span<const double> g);

/// Second-order estimate of the loss after stepping eps_step along g:
/// L0 + eps_step * (g . g) + 0.5 * eps_step^2 * sum_i g_i^2 h_i.
double taylor_loss_estimate(double l0, std::span<const double> g, std::span<const double> h_diag,
                            double eps_step);

/// Gradients of the next and previous task's loss at an end-of-task
/// parameter snapshot, plus the norms the analysis consumes.
struct FirstStepDiag {
  std::vector<double> g_new;  // retained only when requested
  std::vector<double> g_old;
  double gnew_inf = 0.0;
  double gnew_norm2 = 0.0;
  double gold_inf = 0.0;
  double fisher_diag_max = 0.0;  // = gnew_inf^2
};

/// Both gradients are batch means evaluated at `p` with eval-mode
/// normalization (running stats frozen); the caller chooses the batches.
FirstStepDiag first_step_diag(const NetParams& p, const Matrix& x_next,
                              std::span<const std::uint8_t> y_next, const Matrix& x_prev,
                              std::span<const std::uint8_t> y_prev, bool keep_vectors = false);

/// Across-seed aggregate for one curriculum; the unit of the correlation
/// analysis.
struct CurriculumAggregate {
  int index = 0;
  double d_omega = 0.0;  // NaN for non-grating curricula
  double d_theta = 0.0;
  double dl1_mean = 0.0;  // mean over seeds of L1(theta_2) - L1(theta_1)
  double dl1_sd = 0.0;
  double gnew_mean = 0.0;  // mean over seeds of |g_new|_inf at the first boundary
  double gold_mean = 0.0;
  bool forgot = false;  // dl1_mean > eps
  std::vector<double> dl1_per_seed;
};

struct CorrelationTable {
  std::optional<CorrelationResult> dl1_vs_gnew;
  std::optional<CorrelationResult> dl1_vs_gold;
  std::optional<CorrelationResult> dl1_vs_domega;
  std::optional<CorrelationResult> dl1_vs_dtheta;
};

/// Pearson correlations of dL1 against the first-gradient max-norms and the
/// latent task distances, over curricula (>= 3 required). A constant or
/// undefined column leaves its pairing unset.
CorrelationTable correlate_forgetting(std::span<const CurriculumAggregate> reports);

}  // namespace cflab

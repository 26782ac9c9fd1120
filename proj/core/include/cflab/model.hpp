#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cflab/matrix.hpp"
#include "cflab/rng.hpp"

namespace cflab {

inline constexpr int kInputDim = 256;
inline constexpr int kHiddenDim = 256;
/// Flattened parameter count: W1 (d x h, row-major) | b1 | W2 | b2.
inline constexpr int kParamCount = kInputDim * kHiddenDim + kHiddenDim + kHiddenDim + 1;

enum class InitMode {
  fan_in,          // U(-1/sqrt(d), 1/sqrt(d))
  literal_sqrt_d,  // U(-sqrt(d), sqrt(d)); saturates instantly, kept for comparison runs
};

/// All trainable parameters in one flattened vector plus the input
/// normalization running statistics (which are state, not parameters).
struct NetParams {
  std::vector<double> theta;  // length kParamCount, layout as documented above
  std::vector<double> bn_mean;
  std::vector<double> bn_var;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  NetParams();

  std::span<double> w1() { return {theta.data(), kInputDim * kHiddenDim}; }
  std::span<const double> w1() const { return {theta.data(), kInputDim * kHiddenDim}; }
  std::span<double> b1() { return {theta.data() + kInputDim * kHiddenDim, kHiddenDim}; }
  std::span<const double> b1() const { return {theta.data() + kInputDim * kHiddenDim, kHiddenDim}; }
  std::span<double> w2() { return {theta.data() + kInputDim * kHiddenDim + kHiddenDim, kHiddenDim}; }
  std::span<const double> w2() const {
    return {theta.data() + kInputDim * kHiddenDim + kHiddenDim, kHiddenDim};
  }
  double& b2() { return theta[kParamCount - 1]; }
  double b2() const { return theta[kParamCount - 1]; }
};

/// Weights and biases ~ U(-1/sqrt(d), 1/sqrt(d)) by default; running stats
/// start at mean 0, variance 1. Draw order: W1 row-major, b1, W2, b2.
NetParams init_params(Rng& rng, InitMode mode = InitMode::fan_in);

struct ForwardTrace {
  Matrix normalized;  // B x d, the network's actual input
  Matrix pre;         // B x h, W1^T x + b1
  Matrix hidden;      // B x h, relu(pre)
  std::vector<double> logit;
  std::vector<double> yhat;  // sigmoid(logit), in (0, 1)
};

/// Training mode normalizes with batch statistics (biased variance) and
/// updates the running stats by exponential moving average (the running
/// variance update applies the n/(n-1) correction); eval mode normalizes
/// with the running stats and leaves them untouched. Training batches need
/// at least 2 rows.
ForwardTrace forward(NetParams& p, const Matrix& x, bool training);
ForwardTrace forward_eval(const NetParams& p, const Matrix& x);

/// Mean binary cross-entropy; predictions are clamped to
/// [1e-12, 1 - 1e-12] inside the logs. Labels must be 0 or 1.
double bce_loss(std::span<const double> yhat, std::span<const std::uint8_t> y);

struct BackwardResult {
  std::vector<double> grad;  // d(mean batch loss)/d(theta), flattened layout
  double loss = 0.0;
};

/// Gradient of the batch-mean BCE at p. The clamp inside bce_loss is ignored
/// by the gradient (exact for |logit| < ~27). `training` selects the
/// normalization mode exactly as forward() does.
BackwardResult backward(NetParams& p, const Matrix& x, std::span<const std::uint8_t> y,
                        bool training);
BackwardResult backward_eval(const NetParams& p, const Matrix& x, std::span<const std::uint8_t> y);

/// Scratch space for the training loop; reuse avoids per-batch allocation.
struct ModelWorkspace {
  Matrix normalized, pre, hidden, dz1;
  std::vector<double> logit, yhat, dlogit;
  std::vector<double> grad;
};

/// Workspace-based fused pass used on the hot path; identical arithmetic to
/// forward()/backward().
double loss_and_grad(NetParams& p, const Matrix& x, std::span<const std::uint8_t> y, bool training,
                     ModelWorkspace& ws);
/// Loss only (no gradient); eval-mode normalization.
double eval_loss(const NetParams& p, const Matrix& x, std::span<const std::uint8_t> y,
                 ModelWorkspace& ws);

}  // namespace cflab

#include "cflab/model.hpp"

#include <cblas.h>

#include <cmath>
#include <stdexcept>

namespace cflab {

namespace {

constexpr double kClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_labels(std::span<const std::uint8_t> y) {
  for (auto v : y)
    if (v > 1) throw std::invalid_argument("labels must be 0 or 1");
}

void check_input(const Matrix& x) {
  if (x.cols != kInputDim) throw std::invalid_argument("input rows must have length 256");
  if (x.rows == 0) throw std::invalid_argument("empty batch");
}

// x normalized into `out` (B x d). Training mode uses batch moments and
// updates the running stats; eval mode reads the running stats.
void normalize(NetParams& p, const Matrix& x, bool training, Matrix& out) {
  const std::size_t n = x.rows;
  out.rows = n;
  out.cols = kInputDim;
  out.data.resize(n * kInputDim);

  double mean[kInputDim];
  double inv_std[kInputDim];
  if (training) {
    if (n < 2) throw std::invalid_argument("training batch needs at least 2 rows");
    double var[kInputDim] = {0};
    for (int j = 0; j < kInputDim; ++j) mean[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.data.data() + i * kInputDim;
      for (int j = 0; j < kInputDim; ++j) mean[j] += row[j];
    }
    for (int j = 0; j < kInputDim; ++j) mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.data.data() + i * kInputDim;
      for (int j = 0; j < kInputDim; ++j) {
        const double d = row[j] - mean[j];
        var[j] += d * d;
      }
    }
    const double nn = static_cast<double>(n);
    for (int j = 0; j < kInputDim; ++j) var[j] /= nn;  // biased batch estimate
    const double unbias = nn / (nn - 1.0);
    for (int j = 0; j < kInputDim; ++j) {
      p.bn_mean[j] = (1.0 - p.bn_momentum) * p.bn_mean[j] + p.bn_momentum * mean[j];
      p.bn_var[j] = (1.0 - p.bn_momentum) * p.bn_var[j] + p.bn_momentum * var[j] * unbias;
      inv_std[j] = 1.0 / std::sqrt(var[j] + p.bn_eps);
    }
  } else {
    for (int j = 0; j < kInputDim; ++j) {
      mean[j] = p.bn_mean[j];
      inv_std[j] = 1.0 / std::sqrt(p.bn_var[j] + p.bn_eps);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = x.data.data() + i * kInputDim;
    double* dst = out.data.data() + i * kInputDim;
    for (int j = 0; j < kInputDim; ++j) dst[j] = (src[j] - mean[j]) * inv_std[j];
  }
}

// pre = normalized * W1 + b1; hidden = relu(pre); logit = hidden . w2 + b2.
void dense_forward(const NetParams& p, const Matrix& normalized, Matrix& pre, Matrix& hidden,
                   std::vector<double>& logit, std::vector<double>& yhat) {
  const std::size_t n = normalized.rows;
  pre.rows = hidden.rows = n;
  pre.cols = hidden.cols = kHiddenDim;
  pre.data.resize(n * kHiddenDim);
  hidden.data.resize(n * kHiddenDim);
  logit.resize(n);
  yhat.resize(n);

  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(n), kHiddenDim,
              kInputDim, 1.0, normalized.data.data(), kInputDim, p.w1().data(), kHiddenDim, 0.0,
              pre.data.data(), kHiddenDim);
  const auto b1 = p.b1();
  const auto w2 = p.w2();
  for (std::size_t i = 0; i < n; ++i) {
    double* pr = pre.data.data() + i * kHiddenDim;
    double* hr = hidden.data.data() + i * kHiddenDim;
    double acc = 0.0;
    for (int k = 0; k < kHiddenDim; ++k) {
      pr[k] += b1[static_cast<std::size_t>(k)];
      hr[k] = pr[k] > 0.0 ? pr[k] : 0.0;
      acc += hr[k] * w2[static_cast<std::size_t>(k)];
    }
    logit[i] = acc + p.b2();
    yhat[i] = sigmoid(logit[i]);
  }
}

double mean_bce(std::span<const double> yhat, std::span<const std::uint8_t> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    double q = yhat[i];
    if (q < kClamp) q = kClamp;
    if (q > 1.0 - kClamp) q = 1.0 - kClamp;
    acc += y[i] ? -std::log(q) : -std::log(1.0 - q);
  }
  return acc / static_cast<double>(yhat.size());
}

void dense_backward(const NetParams& p, const Matrix& normalized, const Matrix& pre,
                    const Matrix& hidden, std::span<const double> yhat,
                    std::span<const std::uint8_t> y, Matrix& dz1, std::vector<double>& dlogit,
                    std::vector<double>& grad) {
  const std::size_t n = normalized.rows;
  dlogit.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    dlogit[i] = (yhat[i] - static_cast<double>(y[i])) / static_cast<double>(n);

  grad.assign(kParamCount, 0.0);
  double* g_w1 = grad.data();
  double* g_b1 = grad.data() + kInputDim * kHiddenDim;
  double* g_w2 = grad.data() + kInputDim * kHiddenDim + kHiddenDim;
  double* g_b2 = grad.data() + kParamCount - 1;

  const auto w2 = p.w2();
  dz1.rows = n;
  dz1.cols = kHiddenDim;
  dz1.data.resize(n * kHiddenDim);
  for (std::size_t i = 0; i < n; ++i) {
    const double dl = dlogit[i];
    const double* hr = hidden.data.data() + i * kHiddenDim;
    const double* pr = pre.data.data() + i * kHiddenDim;
    double* dz = dz1.data.data() + i * kHiddenDim;
    for (int k = 0; k < kHiddenDim; ++k) {
      g_w2[k] += hr[k] * dl;
      dz[k] = pr[k] > 0.0 ? dl * w2[static_cast<std::size_t>(k)] : 0.0;
      g_b1[k] += dz[k];
    }
    *g_b2 += dl;
  }
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kInputDim, kHiddenDim,
              static_cast<int>(n), 1.0, normalized.data.data(), kInputDim, dz1.data.data(),
              kHiddenDim, 0.0, g_w1, kHiddenDim);
}

}  // namespace

NetParams::NetParams()
    : theta(kParamCount, 0.0), bn_mean(kInputDim, 0.0), bn_var(kInputDim, 1.0) {}

NetParams init_params(Rng& rng, InitMode mode) {
  const double bound = mode == InitMode::fan_in ? 1.0 / std::sqrt(static_cast<double>(kInputDim))
                                                : std::sqrt(static_cast<double>(kInputDim));
  NetParams p;
  for (double& v : p.theta) v = rng.uniform(-bound, bound);
  return p;
}

ForwardTrace forward(NetParams& p, const Matrix& x, bool training) {
  check_input(x);
  ForwardTrace t;
  normalize(p, x, training, t.normalized);
  dense_forward(p, t.normalized, t.pre, t.hidden, t.logit, t.yhat);
  return t;
}

ForwardTrace forward_eval(const NetParams& p, const Matrix& x) {
  return forward(const_cast<NetParams&>(p), x, false);  // eval never mutates p
}

double bce_loss(std::span<const double> yhat, std::span<const std::uint8_t> y) {
  if (yhat.size() != y.size()) throw std::invalid_argument("bce_loss: length mismatch");
  if (yhat.empty()) throw std::invalid_argument("bce_loss: empty batch");
  check_labels(y);
  return mean_bce(yhat, y);
}

BackwardResult backward(NetParams& p, const Matrix& x, std::span<const std::uint8_t> y,
                        bool training) {
  check_input(x);
  if (x.rows != y.size()) throw std::invalid_argument("backward: label count mismatch");
  check_labels(y);
  ForwardTrace t;
  normalize(p, x, training, t.normalized);
  dense_forward(p, t.normalized, t.pre, t.hidden, t.logit, t.yhat);
  BackwardResult res;
  res.loss = mean_bce(t.yhat, y);
  Matrix dz1;
  std::vector<double> dlogit;
  dense_backward(p, t.normalized, t.pre, t.hidden, t.yhat, y, dz1, dlogit, res.grad);
  return res;
}

BackwardResult backward_eval(const NetParams& p, const Matrix& x,
                             std::span<const std::uint8_t> y) {
  return backward(const_cast<NetParams&>(p), x, y, false);
}

double loss_and_grad(NetParams& p, const Matrix& x, std::span<const std::uint8_t> y, bool training,
                     ModelWorkspace& ws) {
  normalize(p, x, training, ws.normalized);
  dense_forward(p, ws.normalized, ws.pre, ws.hidden, ws.logit, ws.yhat);
  dense_backward(p, ws.normalized, ws.pre, ws.hidden, ws.yhat, y, ws.dz1, ws.dlogit, ws.grad);
  return mean_bce(ws.yhat, y);
}

double eval_loss(const NetParams& p, const Matrix& x, std::span<const std::uint8_t> y,
                 ModelWorkspace& ws) {
  auto& pm = const_cast<NetParams&>(p);
  normalize(pm, x, false, ws.normalized);
  dense_forward(p, ws.normalized, ws.pre, ws.hidden, ws.logit, ws.yhat);
  return mean_bce(ws.yhat, y);
}

}  // namespace cflab

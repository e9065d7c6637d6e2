#include "moodtag/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>

#include "moodtag/error.hpp"

namespace moodtag::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedConstMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// View a rank-2 input as a batch of one.
struct BatchView {
  std::size_t n, t, d;
  bool squeezed;
};

BatchView batch_view(const Tensor& x, const char* what) {
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2), false};
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1), true};
  fail(Errc::DimensionMismatch, std::string(what) + " expects a rank-2 or rank-3 tensor, got " + x.shape_string());
}

}  // namespace

void fill_uniform(Tensor& t, double limit, Rng& rng) {
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
}

// Convolution

Conv1dLayer::Conv1dLayer(std::size_t w, std::size_t f, std::size_t d, const std::string& prefix)
    : width(w),
      filters(f),
      in_dim(d),
      weight(prefix + ".weight", {f, w, d}, true),
      bias(prefix + ".bias", {f}, false) {
  if (w < 1 || f < 1 || d < 1) fail(Errc::InvalidArgument, "convolution sizes must be positive");
}

void Conv1dLayer::init(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(width * in_dim + filters));
  fill_uniform(weight.value, limit, rng);
  bias.value.fill(0.0);
}

Tensor conv1d_forward(const Tensor& input, const Conv1dLayer& layer) {
  const auto v = batch_view(input, "conv1d_forward");
  if (v.d != layer.in_dim)
    fail(Errc::DimensionMismatch, "conv1d input depth " + std::to_string(v.d) + " != " + std::to_string(layer.in_dim));
  if (v.t < layer.width)
    fail(Errc::InputTooShort, "sequence length " + std::to_string(v.t) + " < kernel width " +
                                  std::to_string(layer.width));
  const std::size_t tp = v.t - layer.width + 1;
  const std::size_t F = layer.filters;
  const std::size_t wd = layer.width * v.d;
  Tensor out = v.squeezed ? Tensor({tp, F}) : Tensor({v.n, tp, F});
  const ConstMatMap W(layer.weight.value.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(wd));
  const Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.value.data(), static_cast<Eigen::Index>(F));
  for (std::size_t n = 0; n < v.n; ++n) {
    // Rows t..t+w-1 of a row-major T x D block are contiguous, so the patch
    // matrix is a strided view with no copy.
    const StridedConstMap P(input.data() + n * v.t * v.d, static_cast<Eigen::Index>(tp),
                            static_cast<Eigen::Index>(wd), Eigen::OuterStride<>(static_cast<Eigen::Index>(v.d)));
    MatMap Y(out.data() + n * tp * F, static_cast<Eigen::Index>(tp), static_cast<Eigen::Index>(F));
    Y.noalias() = P * W.transpose();
    Y.rowwise() += b;
  }
  return out;
}

void conv1d_backward(const Tensor& input, const Tensor& grad_out, Conv1dLayer& layer, Tensor* grad_input) {
  const auto v = batch_view(input, "conv1d_backward");
  const std::size_t tp = v.t - layer.width + 1;
  const std::size_t F = layer.filters;
  const std::size_t wd = layer.width * v.d;
  require_shape(grad_out, v.squeezed ? std::vector<std::size_t>{tp, F} : std::vector<std::size_t>{v.n, tp, F},
                "conv1d_backward grad");
  MatMap dW(layer.weight.grad.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(wd));
  Eigen::Map<Eigen::RowVectorXd> db(layer.bias.grad.data(), static_cast<Eigen::Index>(F));
  const ConstMatMap W(layer.weight.value.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(wd));
  if (grad_input) *grad_input = Tensor(input.shape());
  RowMat dP;
  for (std::size_t n = 0; n < v.n; ++n) {
    const StridedConstMap P(input.data() + n * v.t * v.d, static_cast<Eigen::Index>(tp),
                            static_cast<Eigen::Index>(wd), Eigen::OuterStride<>(static_cast<Eigen::Index>(v.d)));
    const ConstMatMap G(grad_out.data() + n * tp * F, static_cast<Eigen::Index>(tp), static_cast<Eigen::Index>(F));
    dW.noalias() += G.transpose() * P;
    db += G.colwise().sum();
    if (grad_input) {
      dP.noalias() = G * W;
      double* dx = grad_input->data() + n * v.t * v.d;
      for (std::size_t t = 0; t < tp; ++t) {
        Eigen::Map<Eigen::RowVectorXd>(dx + t * v.d, static_cast<Eigen::Index>(wd)) += dP.row(static_cast<Eigen::Index>(t));
      }
    }
  }
}

// Tanh

Tensor tanh_forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

namespace {
std::atomic<bool> g_corrupt_tanh{false};
}

void set_tanh_derivative_fault(bool enabled) { g_corrupt_tanh.store(enabled); }

Tensor tanh_backward(const Tensor& y, const Tensor& grad_y) {
  require_shape(grad_y, y.shape(), "tanh_backward");
  Tensor dx(y.shape());
  if (g_corrupt_tanh.load()) {
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = grad_y[i] * (1.0 - y[i]);
    return dx;
  }
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = grad_y[i] * (1.0 - y[i] * y[i]);
  return dx;
}

// Batch normalization

BatchNormLayer::BatchNormLayer(std::size_t c, const std::string& prefix, double m, double e)
    : channels(c),
      momentum(m),
      eps(e),
      gamma(prefix + ".gamma", {c}, false),
      beta(prefix + ".beta", {c}, false),
      running_mean(c, 0.0),
      running_var(c, 1.0) {
  if (!(eps > 0.0)) fail(Errc::InvalidArgument, "batch-norm epsilon must be positive");
  gamma.value.fill(1.0);
}

namespace {
std::size_t bn_rows(const Tensor& x, const BatchNormLayer& layer) {
  if (x.rank() < 2 || x.shape().back() != layer.channels)
    fail(Errc::DimensionMismatch, "batch-norm expects last axis " + std::to_string(layer.channels) + ", got " +
                                      x.shape_string());
  return x.size() / layer.channels;
}
}  // namespace

Tensor batchnorm_train(const Tensor& x, BatchNormLayer& layer, BatchNormCache& cache) {
  const std::size_t rows = bn_rows(x, layer);
  const std::size_t C = layer.channels;
  if (rows < 2) fail(Errc::DegenerateBatch, "batch-norm training needs at least two values per channel");
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < C; ++c) mean[c] += x[r * C + c];
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const double d = x[r * C + c] - mean[c];
      var[c] += d * d;
    }
  }
  for (auto& v : var) v /= static_cast<double>(rows);

  cache.inv_std.resize(C);
  for (std::size_t c = 0; c < C; ++c) cache.inv_std[c] = 1.0 / std::sqrt(var[c] + layer.eps);
  cache.x_hat = Tensor(x.shape());
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const double xh = (x[r * C + c] - mean[c]) * cache.inv_std[c];
      cache.x_hat[r * C + c] = xh;
      y[r * C + c] = layer.gamma.value[c] * xh + layer.beta.value[c];
    }
  }
  const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
  for (std::size_t c = 0; c < C; ++c) {
    layer.running_mean[c] = layer.momentum * layer.running_mean[c] + (1.0 - layer.momentum) * mean[c];
    layer.running_var[c] = layer.momentum * layer.running_var[c] + (1.0 - layer.momentum) * var[c] * unbias;
  }
  return y;
}

Tensor batchnorm_infer(const Tensor& x, const BatchNormLayer& layer) {
  const std::size_t rows = bn_rows(x, layer);
  const std::size_t C = layer.channels;
  std::vector<double> scale(C), shift(C);
  for (std::size_t c = 0; c < C; ++c) {
    scale[c] = layer.gamma.value[c] / std::sqrt(layer.running_var[c] + layer.eps);
    shift[c] = layer.beta.value[c] - scale[c] * layer.running_mean[c];
  }
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < C; ++c) y[r * C + c] = scale[c] * x[r * C + c] + shift[c];
  return y;
}

Tensor batchnorm_forward(const Tensor& x, BatchNormLayer& layer, Mode mode, BatchNormCache* cache) {
  if (mode == Mode::Infer) return batchnorm_infer(x, layer);
  BatchNormCache local;
  return batchnorm_train(x, layer, cache ? *cache : local);
}

Tensor batchnorm_backward(const BatchNormCache& cache, const Tensor& grad_y, BatchNormLayer& layer) {
  if (!cache.x_hat.same_shape(grad_y)) fail(Errc::StaleCache, "batch-norm cache does not match gradient shape");
  const std::size_t C = layer.channels;
  const std::size_t rows = grad_y.size() / C;
  const double n = static_cast<double>(rows);
  std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      sum_g[c] += grad_y[r * C + c];
      sum_gx[c] += grad_y[r * C + c] * cache.x_hat[r * C + c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    layer.gamma.grad[c] += sum_gx[c];
    layer.beta.grad[c] += sum_g[c];
  }
  Tensor dx(grad_y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const double k = layer.gamma.value[c] * cache.inv_std[c] / n;
      dx[r * C + c] = k * (n * grad_y[r * C + c] - sum_g[c] - cache.x_hat[r * C + c] * sum_gx[c]);
    }
  }
  return dx;
}

// Global max pooling

MaxPoolResult global_max_pool(const Tensor& x) {
  const auto v = batch_view(x, "global_max_pool");
  MaxPoolResult r{v.squeezed ? Tensor({v.d}) : Tensor({v.n, v.d}), std::vector<std::size_t>(v.n * v.d, 0)};
  for (std::size_t n = 0; n < v.n; ++n) {
    const double* base = x.data() + n * v.t * v.d;
    for (std::size_t f = 0; f < v.d; ++f) {
      std::size_t best = 0;
      double best_v = base[f];
      for (std::size_t t = 1; t < v.t; ++t) {
        if (base[t * v.d + f] > best_v) {
          best_v = base[t * v.d + f];
          best = t;
        }
      }
      r.output[n * v.d + f] = best_v;
      r.argmax[n * v.d + f] = best;
    }
  }
  return r;
}

Tensor global_max_pool_backward(const MaxPoolResult& pooled, const Tensor& grad_out,
                                const std::vector<std::size_t>& input_shape) {
  if (!grad_out.same_shape(pooled.output)) fail(Errc::StaleCache, "max-pool cache does not match gradient");
  Tensor dx(input_shape);
  const std::size_t F = input_shape.back();
  const std::size_t T = input_shape[input_shape.size() - 2];
  const std::size_t N = grad_out.size() / F;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      dx[(n * T + pooled.argmax[n * F + f]) * F + f] += grad_out[n * F + f];
  return dx;
}

// Dropout

Tensor dropout_forward(const Tensor& x, double p, Mode mode, Rng& rng, DropoutMask* mask) {
  if (!(p >= 0.0 && p < 1.0)) fail(Errc::InvalidArgument, "dropout rate must lie in [0, 1)");
  if (mask) mask->scale.clear();
  if (mode == Mode::Infer || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor y(x.shape());
  std::vector<double> scale(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale[i] = rng.uniform() < p ? 0.0 : keep_scale;
    y[i] = x[i] * scale[i];
  }
  if (mask) mask->scale = std::move(scale);
  return y;
}

Tensor dropout_backward(const DropoutMask& mask, const Tensor& grad_y) {
  if (mask.scale.empty()) return grad_y;
  if (mask.scale.size() != grad_y.size()) fail(Errc::StaleCache, "dropout mask does not match gradient");
  Tensor dx(grad_y.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_y[i] * mask.scale[i];
  return dx;
}

// Dense

DenseLayer::DenseLayer(std::size_t i, std::size_t o, const std::string& prefix)
    : in(i), out(o), weight(prefix + ".weight", {o, i}, true), bias(prefix + ".bias", {o}, false) {}

void DenseLayer::init(Rng& rng) {
  fill_uniform(weight.value, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
  bias.value.fill(0.0);
}

Tensor dense_forward(const Tensor& x, const DenseLayer& layer) {
  const bool vec = x.rank() == 1;
  const std::size_t n = vec ? 1 : x.dim(0);
  if ((vec ? x.dim(0) : (x.rank() == 2 ? x.dim(1) : 0)) != layer.in)
    fail(Errc::DimensionMismatch, "dense layer expects " + std::to_string(layer.in) + " inputs, got " + x.shape_string());
  Tensor y = vec ? Tensor({layer.out}) : Tensor({n, layer.out});
  const ConstMatMap X(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layer.in));
  const ConstMatMap W(layer.weight.value.data(), static_cast<Eigen::Index>(layer.out),
                      static_cast<Eigen::Index>(layer.in));
  MatMap Y(y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layer.out));
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.value.data(), static_cast<Eigen::Index>(layer.out));
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& grad_y, DenseLayer& layer) {
  const std::size_t n = x.rank() == 1 ? 1 : x.dim(0);
  if (grad_y.size() != n * layer.out) fail(Errc::StaleCache, "dense gradient does not match cached input");
  const ConstMatMap X(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layer.in));
  const ConstMatMap G(grad_y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layer.out));
  const ConstMatMap W(layer.weight.value.data(), static_cast<Eigen::Index>(layer.out),
                      static_cast<Eigen::Index>(layer.in));
  MatMap(layer.weight.grad.data(), static_cast<Eigen::Index>(layer.out), static_cast<Eigen::Index>(layer.in))
      .noalias() += G.transpose() * X;
  Eigen::Map<Eigen::RowVectorXd>(layer.bias.grad.data(), static_cast<Eigen::Index>(layer.out)) += G.colwise().sum();
  Tensor dx(x.shape());
  MatMap(dx.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layer.in)).noalias() = G * W;
  return dx;
}

// Softmax

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) fail(Errc::DimensionMismatch, "softmax expects N x K logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t n = 0; n < N; ++n) {
    double mx = logits.at(n, 0);
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits.at(n, k));
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += p.at(n, k) = std::exp(logits.at(n, k) - mx);
    for (std::size_t k = 0; k < K; ++k) p.at(n, k) /= z;
  }
  return p;
}

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    fail(Errc::DimensionMismatch, "logits " + logits.shape_string() + " vs " + std::to_string(labels.size()) + " labels");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  SoftmaxLoss r{0.0, Tensor(logits.shape()), softmax(logits)};
  const double invN = 1.0 / static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n) {
    if (labels[n] >= K) fail(Errc::InvalidArgument, "label out of range");
    // log p computed from the shifted logits to avoid log(0).
    double mx = logits.at(n, 0);
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits.at(n, k));
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(logits.at(n, k) - mx);
    r.loss += (std::log(z) - (logits.at(n, labels[n]) - mx)) * invN;
    for (std::size_t k = 0; k < K; ++k)
      r.grad_logits.at(n, k) = (r.probs.at(n, k) - (k == labels[n] ? 1.0 : 0.0)) * invN;
  }
  return r;
}

double clip_global_norm(std::span<Parameter* const> params, double clip) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (clip > 0.0 && norm > clip) {
    const double s = clip / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.values()) g *= s;
  }
  return norm;
}

}  // namespace moodtag::nn

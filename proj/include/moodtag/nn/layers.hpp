#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moodtag/nn/tensor.hpp"
#include "moodtag/random.hpp"

namespace moodtag::nn {

// Each layer is a plain struct of parameters plus free forward/backward
// functions. Backward functions accumulate into Parameter::grad.

/// Valid 1-D convolution, stride 1, over N x T x D inputs.
struct Conv1dLayer {
  std::size_t width = 0;
  std::size_t filters = 0;
  std::size_t in_dim = 0;
  Parameter weight;  // F x w x D
  Parameter bias;    // F

  Conv1dLayer() = default;
  Conv1dLayer(std::size_t width, std::size_t filters, std::size_t in_dim, const std::string& prefix);
  void init(Rng& rng);
};

/// N x T x D -> N x (T-w+1) x F. A rank-2 T x D input is treated as N = 1
/// and yields a rank-2 result.
Tensor conv1d_forward(const Tensor& input, const Conv1dLayer& layer);
/// `grad_input` may be null when the input is not trainable.
void conv1d_backward(const Tensor& input, const Tensor& grad_out, Conv1dLayer& layer, Tensor* grad_input);

Tensor tanh_forward(const Tensor& x);
/// Uses the forward output: dx = dy * (1 - y^2).
Tensor tanh_backward(const Tensor& y, const Tensor& grad_y);
/// Fault injection for the gradient checker's self-test: while enabled,
/// tanh_backward uses the wrong derivative 1 - y.
void set_tanh_derivative_fault(bool enabled);

/// Per-channel normalization over every axis but the last.
struct BatchNormLayer {
  std::size_t channels = 0;
  double momentum = 0.9;
  double eps = 1e-5;
  Parameter gamma;
  Parameter beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  BatchNormLayer() = default;
  BatchNormLayer(std::size_t channels, const std::string& prefix, double momentum = 0.9, double eps = 1e-5);
};

struct BatchNormCache {
  Tensor x_hat;
  std::vector<double> inv_std;
};

/// Train mode: batch statistics (biased variance), running statistics
/// updated with the unbiased variance. Throws DegenerateBatch when a channel
/// has a single value.
Tensor batchnorm_train(const Tensor& x, BatchNormLayer& layer, BatchNormCache& cache);
/// Infer mode: running statistics only; no state change.
Tensor batchnorm_infer(const Tensor& x, const BatchNormLayer& layer);
Tensor batchnorm_forward(const Tensor& x, BatchNormLayer& layer, Mode mode, BatchNormCache* cache);
Tensor batchnorm_backward(const BatchNormCache& cache, const Tensor& grad_y, BatchNormLayer& layer);

struct MaxPoolResult {
  Tensor output;                    // N x F
  std::vector<std::size_t> argmax;  // N x F time indices
};

/// N x T x F -> N x F, maximum over time; ties resolve to the first index.
MaxPoolResult global_max_pool(const Tensor& x);
Tensor global_max_pool_backward(const MaxPoolResult& pooled, const Tensor& grad_out,
                                const std::vector<std::size_t>& input_shape);

struct DropoutMask {
  std::vector<double> scale;  // 0 or 1/(1-p) per element; empty in infer mode
};

/// Inverted dropout. Infer mode (or p = 0) is the identity.
Tensor dropout_forward(const Tensor& x, double p, Mode mode, Rng& rng, DropoutMask* mask);
Tensor dropout_backward(const DropoutMask& mask, const Tensor& grad_y);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Parameter weight;  // out x in
  Parameter bias;    // out

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, const std::string& prefix);
  void init(Rng& rng);
};

/// N x in -> N x out, y = W x + b per row. A rank-1 input yields a rank-1 result.
Tensor dense_forward(const Tensor& x, const DenseLayer& layer);
Tensor dense_backward(const Tensor& x, const Tensor& grad_y, DenseLayer& layer);

struct SoftmaxLoss {
  double loss = 0.0;
  Tensor grad_logits;
  Tensor probs;
};

/// Row-wise stabilized softmax; loss is the mean negative log-likelihood and
/// grad_logits = (probs - onehot) / N.
SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);
Tensor softmax(const Tensor& logits);

/// Scales all gradients so their joint L2 norm is at most `clip`. Returns the
/// norm before clipping.
double clip_global_norm(std::span<Parameter* const> params, double clip);

/// Uniform(-limit, limit) initialization helper.
void fill_uniform(Tensor& t, double limit, Rng& rng);

}  // namespace moodtag::nn

#include "moodtag/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "moodtag/error.hpp"

namespace moodtag::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) fail(Errc::InvalidArgument, "tensor dimensions must be positive");
  }
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(n, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "x" : "") + std::to_string(shape_[i]);
  return s + ")";
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& expected, const char* what) {
  if (t.shape() != expected) {
    Tensor e(expected);
    fail(Errc::DimensionMismatch, std::string(what) + ": expected " + e.shape_string() + ", got " + t.shape_string());
  }
}

}  // namespace moodtag::nn

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace moodtag::nn {

/// Dense row-major double tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Throws DimensionMismatch unless `t` has exactly `expected` shape.
void require_shape(const Tensor& t, const std::vector<std::size_t>& expected, const char* what);

/// A trainable tensor with its gradient. `decay` marks weights that receive L2.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool decay = false;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape, bool weight_decay)
      : name(std::move(n)), value(shape), grad(shape), decay(weight_decay) {}
};

enum class Mode { Train, Infer };

}  // namespace moodtag::nn

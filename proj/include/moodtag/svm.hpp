#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "moodtag/corpus.hpp"

namespace moodtag {

using DenseMatrix = std::vector<std::vector<double>>;

struct RbfKernelParams {
  double gamma = 1.0;
};

/// exp(-gamma * |x - z|^2)
double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);
DenseMatrix kernel_matrix(const DenseMatrix& X, double gamma);

struct SmoOptions {
  double C = 1.0;
  double gamma = 1.0;
  double tol = 1e-3;
  std::size_t max_passes = 10;
  std::uint64_t seed = 0;
  // Hard cap on sweeps over the training set.
  std::size_t max_sweeps = 100000;
};

/// Full dual solution; alphas are exactly 0 or C at the bounds.
struct SmoSolution {
  std::vector<double> alphas;
  double bias = 0.0;
  std::size_t sweeps = 0;
};

class BinarySvmModel {
 public:
  BinarySvmModel() = default;
  BinarySvmModel(DenseMatrix support_vectors, std::vector<double> coefficients, double bias,
                 RbfKernelParams params, double C);

  const DenseMatrix& support_vectors() const { return support_vectors_; }
  /// alpha_i * y_i per support vector.
  const std::vector<double>& coefficients() const { return coefficients_; }
  double bias() const { return bias_; }
  const RbfKernelParams& params() const { return params_; }
  double C() const { return C_; }
  std::size_t dim() const { return dim_; }

  void set_dim(std::size_t dim) { dim_ = dim; }

  void write(std::ostream& out) const;
  static BinarySvmModel read(std::istream& in);

 private:
  DenseMatrix support_vectors_;
  std::vector<double> coefficients_;
  double bias_ = 0.0;
  RbfKernelParams params_;
  double C_ = 1.0;
  std::size_t dim_ = 0;
};

/// Simplified SMO over a precomputed Gram matrix; labels are +1/-1.
SmoSolution smo_solve(const DenseMatrix& gram, std::span<const int> y, const SmoOptions& opts);
BinarySvmModel smo_train(const DenseMatrix& X, std::span<const int> y, const SmoOptions& opts);
BinarySvmModel model_from_solution(const DenseMatrix& X, std::span<const int> y, const SmoSolution& sol,
                                   const SmoOptions& opts);

double decision_function(const BinarySvmModel& model, std::span<const double> x);
double dual_objective(const DenseMatrix& gram, std::span<const int> y, std::span<const double> alphas);

struct MulticlassSvm {
  std::array<BinarySvmModel, kNumClasses> models;

  std::array<double, kNumClasses> decision_values(std::span<const double> x) const;
  void write(std::ostream& out) const;
  static MulticlassSvm read(std::istream& in);
};

/// One-vs-rest over the four mood classes; every class must be present.
MulticlassSvm train_one_vs_rest(const DenseMatrix& X, std::span<const MoodLabel> labels, const SmoOptions& opts);
MoodLabel predict_multiclass(const MulticlassSvm& svm, std::span<const double> x);

/// 1 / (n_features * variance of all entries), or 1 / n_features when the variance is 0.
double default_gamma(const DenseMatrix& X);

void l2_normalize(std::vector<double>& v);

/// Per-feature standardization with training statistics; constant features map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const DenseMatrix& X);
  std::vector<double> transform(std::vector<double> x) const;
};

}  // namespace moodtag

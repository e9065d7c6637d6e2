#include "moodtag/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "moodtag/error.hpp"
#include "moodtag/random.hpp"

namespace moodtag {

namespace {

constexpr double kMinAlphaStep = 1e-10;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(Errc::ParseError, "bad number '" + s + "'");
  return v;
}

std::string expect_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  fail(Errc::ParseError, "unexpected end of SVM model");
}

}  // namespace

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size())
    fail(Errc::DimensionMismatch, "rbf_kernel on vectors of length " + std::to_string(x.size()) + " and " +
                                      std::to_string(z.size()));
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - z[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

DenseMatrix kernel_matrix(const DenseMatrix& X, double gamma) {
  const std::size_t m = X.size();
  DenseMatrix K(m, std::vector<double>(m, 1.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) K[i][j] = K[j][i] = rbf_kernel(X[i], X[j], gamma);
  }
  return K;
}

BinarySvmModel::BinarySvmModel(DenseMatrix support_vectors, std::vector<double> coefficients, double bias,
                               RbfKernelParams params, double C)
    : support_vectors_(std::move(support_vectors)),
      coefficients_(std::move(coefficients)),
      bias_(bias),
      params_(params),
      C_(C) {
  if (support_vectors_.size() != coefficients_.size())
    fail(Errc::LengthMismatch, "one coefficient per support vector required");
  if (!(params_.gamma > 0.0) || !std::isfinite(params_.gamma)) fail(Errc::InvalidArgument, "gamma must be positive");
  if (!support_vectors_.empty()) dim_ = support_vectors_.front().size();
  for (const auto& sv : support_vectors_) {
    if (sv.size() != dim_) fail(Errc::DimensionMismatch, "support vectors differ in length");
  }
}

// Simplified SMO: the first index sweeps the training set, the partner is
// drawn at random and, if that pair makes no progress, every other index is
// tried in turn so a sweep with no change certifies the KKT conditions.
SmoSolution smo_solve(const DenseMatrix& gram, std::span<const int> y, const SmoOptions& opts) {
  const std::size_t m = y.size();
  if (gram.size() != m) fail(Errc::DimensionMismatch, "Gram matrix and label count differ");
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1)
      has_pos = true;
    else if (label == -1)
      has_neg = true;
    else
      fail(Errc::InvalidArgument, "SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) fail(Errc::SingleClassInput, "SVM training needs both classes");
  if (!(opts.C > 0.0)) fail(Errc::InvalidArgument, "C must be positive");

  const double C = opts.C;
  SmoSolution sol;
  sol.alphas.assign(m, 0.0);
  auto& a = sol.alphas;
  double& b = sol.bias;
  Rng rng(opts.seed);

  // Cached y_j * alpha_j makes f(x_i) a single dot product.
  auto f = [&](std::size_t i) {
    double s = b;
    const auto& Ki = gram[i];
    for (std::size_t j = 0; j < m; ++j) {
      if (a[j] != 0.0) s += a[j] * y[j] * Ki[j];
    }
    return s;
  };
  auto snap = [&](double v) {
    if (v < 1e-12 * C) return 0.0;
    if (v > C * (1.0 - 1e-12)) return C;
    return v;
  };

  auto take_step = [&](std::size_t i, std::size_t j, double Ei) {
    if (i == j) return false;
    const double Ej = f(j) - y[j];
    const double ai_old = a[i], aj_old = a[j];
    double L, H;
    if (y[i] != y[j]) {
      L = std::max(0.0, aj_old - ai_old);
      H = std::min(C, C + aj_old - ai_old);
    } else {
      L = std::max(0.0, ai_old + aj_old - C);
      H = std::min(C, ai_old + aj_old);
    }
    if (L >= H) return false;
    const double eta = 2.0 * gram[i][j] - gram[i][i] - gram[j][j];
    if (eta >= 0.0) return false;
    double aj = aj_old - y[j] * (Ei - Ej) / eta;
    aj = snap(std::clamp(aj, L, H));
    if (std::abs(aj - aj_old) < kMinAlphaStep) return false;
    const double ai = snap(ai_old + y[i] * y[j] * (aj_old - aj));
    a[i] = ai;
    a[j] = aj;
    const double dai = ai - ai_old, daj = aj - aj_old;
    const double b1 = b - Ei - y[i] * dai * gram[i][i] - y[j] * daj * gram[i][j];
    const double b2 = b - Ej - y[i] * dai * gram[i][j] - y[j] * daj * gram[j][j];
    if (ai > 0.0 && ai < C)
      b = b1;
    else if (aj > 0.0 && aj < C)
      b = b2;
    else
      b = 0.5 * (b1 + b2);
    return true;
  };

  std::size_t passes = 0;
  while (passes < opts.max_passes && sol.sweeps < opts.max_sweeps) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double Ei = f(i) - y[i];
      const double r = Ei * y[i];
      if (!((r < -opts.tol && a[i] < C) || (r > opts.tol && a[i] > 0.0))) continue;
      std::size_t j = static_cast<std::size_t>(rng.below(m - 1));
      if (j >= i) ++j;
      if (take_step(i, j, Ei)) {
        ++changed;
        continue;
      }
      for (std::size_t off = 1; off < m; ++off) {
        if (take_step(i, (j + off) % m, Ei)) {
          ++changed;
          break;
        }
      }
    }
    ++sol.sweeps;
    passes = changed == 0 ? passes + 1 : 0;
  }
  return sol;
}

BinarySvmModel model_from_solution(const DenseMatrix& X, std::span<const int> y, const SmoSolution& sol,
                                   const SmoOptions& opts) {
  DenseMatrix svs;
  std::vector<double> coef;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (sol.alphas[i] > 0.0) {
      svs.push_back(X[i]);
      coef.push_back(sol.alphas[i] * y[i]);
    }
  }
  BinarySvmModel model(std::move(svs), std::move(coef), sol.bias, RbfKernelParams{opts.gamma}, opts.C);
  model.set_dim(X.empty() ? 0 : X.front().size());
  return model;
}

BinarySvmModel smo_train(const DenseMatrix& X, std::span<const int> y, const SmoOptions& opts) {
  if (X.size() != y.size()) fail(Errc::LengthMismatch, "rows and labels differ in count");
  if (X.empty()) fail(Errc::SingleClassInput, "SVM training needs both classes");
  for (const auto& row : X) {
    if (row.size() != X.front().size()) fail(Errc::DimensionMismatch, "training rows differ in length");
    for (double v : row) {
      if (!std::isfinite(v)) fail(Errc::InvalidArgument, "training rows must be finite");
    }
  }
  if (!(opts.gamma > 0.0)) fail(Errc::InvalidArgument, "gamma must be positive");
  const auto gram = kernel_matrix(X, opts.gamma);
  return model_from_solution(X, y, smo_solve(gram, y, opts), opts);
}

double decision_function(const BinarySvmModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    fail(Errc::DimensionMismatch, "model expects " + std::to_string(model.dim()) + " features, got " +
                                      std::to_string(x.size()));
  double s = model.bias();
  const auto& svs = model.support_vectors();
  for (std::size_t i = 0; i < svs.size(); ++i)
    s += model.coefficients()[i] * rbf_kernel(svs[i], x, model.params().gamma);
  return s;
}

double dual_objective(const DenseMatrix& gram, std::span<const int> y, std::span<const double> alphas) {
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    linear += alphas[i];
    for (std::size_t j = 0; j < alphas.size(); ++j) quad += alphas[i] * alphas[j] * y[i] * y[j] * gram[i][j];
  }
  return linear - 0.5 * quad;
}

void BinarySvmModel::write(std::ostream& out) const {
  out << "moodtag-svm-binary 1\n";
  out << "C " << fmt17(C_) << " gamma " << fmt17(params_.gamma) << " b " << fmt17(bias_) << " n_sv "
      << support_vectors_.size() << " dim " << dim_ << '\n';
  for (std::size_t i = 0; i < support_vectors_.size(); ++i) {
    out << fmt17(coefficients_[i]);
    for (double v : support_vectors_[i]) out << ' ' << fmt17(v);
    out << '\n';
  }
}

BinarySvmModel BinarySvmModel::read(std::istream& in) {
  if (expect_line(in) != "moodtag-svm-binary 1") fail(Errc::ParseError, "not a version-1 binary SVM block");
  std::istringstream hs(expect_line(in));
  std::string kC, sC, kg, sg, kb, sb, kn, kd;
  std::size_t n_sv = 0, dim = 0;
  if (!(hs >> kC >> sC >> kg >> sg >> kb >> sb >> kn >> n_sv >> kd >> dim) || kC != "C" || kg != "gamma" ||
      kb != "b" || kn != "n_sv" || kd != "dim")
    fail(Errc::ParseError, "malformed SVM header");
  DenseMatrix svs;
  std::vector<double> coef;
  for (std::size_t i = 0; i < n_sv; ++i) {
    std::istringstream ls(expect_line(in));
    std::string tok;
    std::vector<double> row;
    if (!(ls >> tok)) fail(Errc::ParseError, "missing coefficient");
    coef.push_back(parse_double(tok));
    while (ls >> tok) row.push_back(parse_double(tok));
    if (row.size() != dim) fail(Errc::ParseError, "support vector has wrong length");
    svs.push_back(std::move(row));
  }
  BinarySvmModel model(std::move(svs), std::move(coef), parse_double(sb), RbfKernelParams{parse_double(sg)},
                       parse_double(sC));
  model.set_dim(dim);
  return model;
}

// Multiclass

std::array<double, kNumClasses> MulticlassSvm::decision_values(std::span<const double> x) const {
  std::array<double, kNumClasses> out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = decision_function(models[c], x);
  return out;
}

void MulticlassSvm::write(std::ostream& out) const {
  out << "moodtag-svm-ovr 1\nclasses " << kNumClasses << '\n';
  for (const auto& m : models) m.write(out);
}

MulticlassSvm MulticlassSvm::read(std::istream& in) {
  if (expect_line(in) != "moodtag-svm-ovr 1") fail(Errc::ParseError, "not a version-1 one-vs-rest SVM");
  if (expect_line(in) != "classes 4") fail(Errc::ParseError, "expected 4 classes");
  MulticlassSvm svm;
  for (auto& m : svm.models) m = BinarySvmModel::read(in);
  for (const auto& m : svm.models) {
    if (m.dim() != svm.models[0].dim()) fail(Errc::ParseError, "binary models disagree on dimension");
  }
  return svm;
}

MulticlassSvm train_one_vs_rest(const DenseMatrix& X, std::span<const MoodLabel> labels, const SmoOptions& opts) {
  if (X.size() != labels.size()) fail(Errc::LengthMismatch, "rows and labels differ in count");
  if (X.empty()) fail(Errc::EmptyDataset, "no training rows");
  const auto gram = kernel_matrix(X, opts.gamma);
  MulticlassSvm svm;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = code(labels[i]) == c ? 1 : -1;
    SmoOptions o = opts;
    o.seed = opts.seed + c;
    svm.models[c] = model_from_solution(X, y, smo_solve(gram, y, o), o);
  }
  return svm;
}

MoodLabel predict_multiclass(const MulticlassSvm& svm, std::span<const double> x) {
  const auto v = svm.decision_values(x);
  return argmax_label(v);
}

double default_gamma(const DenseMatrix& X) {
  if (X.empty() || X.front().empty()) fail(Errc::EmptyDataset, "cannot derive gamma from no data");
  const double n_features = static_cast<double>(X.front().size());
  double sum = 0.0, sum2 = 0.0, count = 0.0;
  for (const auto& row : X) {
    for (double v : row) {
      sum += v;
      sum2 += v * v;
      count += 1.0;
    }
  }
  const double mean = sum / count;
  const double var = std::max(0.0, sum2 / count - mean * mean);
  return var > 0.0 ? 1.0 / (n_features * var) : 1.0 / n_features;
}

void l2_normalize(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 == 0.0) return;
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
}

Standardizer Standardizer::fit(const DenseMatrix& X) {
  if (X.empty()) fail(Errc::EmptyDataset, "cannot standardize without rows");
  const std::size_t d = X.front().size();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  const double n = static_cast<double>(X.size());
  for (const auto& row : X)
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += row[k] / n;
  for (std::size_t k = 0; k < d; ++k) {
    double var = 0.0;
    for (const auto& row : X) var += (row[k] - s.mean[k]) * (row[k] - s.mean[k]);
    var /= n;
    s.scale[k] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  }
  return s;
}

std::vector<double> Standardizer::transform(std::vector<double> x) const {
  if (x.size() != mean.size()) fail(Errc::DimensionMismatch, "standardizer dimension mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = (x[k] - mean[k]) * scale[k];
  return x;
}

}  // namespace moodtag

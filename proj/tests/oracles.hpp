#pragma once

// Independent reference computations used by both the unit and acceptance
// tests. Nothing here calls into the library under test except Rng.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "moodtag/random.hpp"

namespace moodtag::oracle {

struct Blobs {
  std::vector<std::vector<double>> X;
  std::vector<std::size_t> cls;
};

// Isotropic Gaussian clusters around the given centres.
inline Blobs blobs(const std::vector<std::vector<double>>& centres, std::size_t per_class, double spread,
                   std::uint64_t seed) {
  Rng rng(seed);
  Blobs out;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < centres.size(); ++c) {
      std::vector<double> x(centres[c].size());
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = centres[c][k] + spread * rng.normal();
      out.X.push_back(std::move(x));
      out.cls.push_back(c);
    }
  }
  return out;
}

inline double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
  double d2 = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-gamma * d2);
}

inline double dual_value(const std::vector<std::vector<double>>& K, const std::vector<int>& y,
                         const std::vector<double>& a) {
  double lin = 0, quad = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < a.size(); ++j) quad += a[i] * a[j] * y[i] * y[j] * K[i][j];
  }
  return lin - 0.5 * quad;
}

// Maximum of the SVM dual over a grid on [0, C]^3; the fourth multiplier is
// fixed by sum(a_i y_i) = 0 and must land in [0, C].
inline double grid_search_dual(const std::vector<std::vector<double>>& K, const std::vector<int>& y, double C,
                               int steps) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> a(4);
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; j <= steps; ++j) {
      for (int k = 0; k <= steps; ++k) {
        a[0] = C * i / steps;
        a[1] = C * j / steps;
        a[2] = C * k / steps;
        a[3] = -y[3] * (a[0] * y[0] + a[1] * y[1] + a[2] * y[2]);
        if (a[3] < -1e-12 || a[3] > C + 1e-12) continue;
        a[3] = std::clamp(a[3], 0.0, C);
        best = std::max(best, dual_value(K, y, a));
      }
    }
  }
  return best;
}

// Distance of a training point from its KKT condition given margin y*f(x).
inline double kkt_residual(double alpha, double C, double margin) {
  const double eps = 1e-12 * C;
  if (alpha <= eps) return std::max(0.0, 1.0 - margin);
  if (alpha >= C - eps) return std::max(0.0, margin - 1.0);
  return std::abs(margin - 1.0);
}

inline double chi_squared_critical(double dof, double alpha) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), alpha));
}

// Term weight count(t, d) * ln(N / df(t)) straight from the documents.
inline std::map<std::string, double> tfidf_weights(const std::vector<std::vector<std::string>>& train,
                                                   const std::vector<std::string>& doc) {
  std::map<std::string, double> out;
  for (const auto& term : std::set<std::string>(doc.begin(), doc.end())) {
    double tf = 0;
    for (const auto& t : doc) tf += t == term;
    double df = 0;
    for (const auto& d : train) df += std::find(d.begin(), d.end(), term) != d.end();
    out[term] = df == 0 ? 0.0 : tf * std::log(static_cast<double>(train.size()) / df);
  }
  return out;
}

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Top-word lists for sad and quiet songs, as published.
inline const std::vector<std::string>& sad_song_words() {
  static const std::vector<std::string> words = {
      "爱", "说", "想", "走", "爱情", "回忆", "心", "里", "寂寞", "幸福", "快乐", "离开", "时间", "世界", "哭",
      "太", "做", "永远", "我会", "中", "眼泪", "真的", "懂", "听", "忘记", "笑", "忘", "记得", "梦"};
  return words;
}

inline const std::vector<std::string>& quiet_song_words() {
  static const std::vector<std::string> words = {
      "爱", "说", "想", "里", "我会", "走", "永远", "世界", "啊", "心", "中", "感觉", "请", "告诉", "做",
      "离开", "时间", "爱情", "想要", "宝贝", "希望", "太", "天空", "身边", "真的", "听", "回忆", "生活", "梦"};
  return words;
}

}  // namespace moodtag::oracle

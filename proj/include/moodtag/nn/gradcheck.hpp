#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moodtag/random.hpp"

namespace moodtag::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t max_entries = 400;  // per tensor; larger tensors are subsampled
  std::uint64_t seed = 0;
  double layer_threshold = 1e-6;
  double model_threshold = 1e-4;
};

struct GradCheckEntry {
  std::string component;  // "tanh", "cnn", ...
  std::string tensor;     // parameter or input name
  double max_rel_error = 0.0;
  double threshold = 0.0;

  bool passed() const { return max_rel_error < threshold; }
};

/// |a - n| / max(1e-12, |a| + |n|)
double relative_error(double analytic, double numeric);

/// Central differences on `values` against `analytic`, restoring every entry.
/// `loss` must read the current `values`. Throws NonFiniteLoss.
double check_tensor(std::span<double> values, std::span<const double> analytic, const std::function<double()>& loss,
                    const GradCheckOptions& opts, Rng& rng);

std::vector<GradCheckEntry> check_layers(const GradCheckOptions& opts);
std::vector<GradCheckEntry> check_cnn(const GradCheckOptions& opts);
std::vector<GradCheckEntry> check_rnn(const GradCheckOptions& opts);
std::vector<GradCheckEntry> check_lstm(const GradCheckOptions& opts);
std::vector<GradCheckEntry> check_cbow(const GradCheckOptions& opts);

/// target is one of layers, cnn, rnn, lstm, cbow or all.
std::vector<GradCheckEntry> run_gradcheck(std::string_view target, const GradCheckOptions& opts);

}  // namespace moodtag::nn

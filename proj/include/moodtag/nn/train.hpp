#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "moodtag/nn/models.hpp"

namespace moodtag::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 1e-4;  // added as l2 * value to the gradient of decayed tensors
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  AdamState() = default;
  AdamState(std::span<Parameter* const> params, AdamConfig cfg);
};

/// One Adam step over every tensor in `params`, in order. Gradients are read,
/// not modified.
void adam_update(std::span<Parameter* const> params, AdamState& state);

struct TrainConfig {
  std::size_t batch_size = 100;
  std::size_t epochs = 10;
  double lr = 1e-3;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  bool shuffle = true;
  double clip = 5.0;  // global gradient norm, recurrent models only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// Fixed-length encoded documents with class codes.
struct EncodedSet {
  std::vector<std::vector<TokenId>> docs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return docs.size(); }
};

struct EpochStats {
  double loss = 0.0;      // mean cross-entropy plus the L2 penalty
  double accuracy = 0.0;  // on train-mode forward passes
};

/// Mini-batch training with frozen embeddings. Deterministic given cfg.seed.
std::vector<EpochStats> fit(NeuralModel& model, const EncodedSet& data, const EmbeddingMatrix& emb,
                            const TrainConfig& cfg);

struct Predictions {
  std::vector<MoodLabel> labels;
  std::vector<std::array<double, kNumClasses>> probs;
};

/// Infer-mode forward in chunks of `batch_size`; ties go to the smallest code.
Predictions predict(const NeuralModel& model, std::span<const std::vector<TokenId>> docs,
                    const EmbeddingMatrix& emb, std::size_t batch_size = 100);

/// Sum over decayed tensors of ||W||^2, times l2 / 2.
double l2_penalty(std::span<Parameter* const> params, double l2);

}  // namespace moodtag::nn

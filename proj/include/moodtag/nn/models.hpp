#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "moodtag/corpus.hpp"
#include "moodtag/embeddings.hpp"
#include "moodtag/nn/layers.hpp"

namespace moodtag::nn {

/// Embedded, padded token sequences: inputs is N x T x D, lengths[n] counts
/// the non-PAD tokens of sample n (at least 1).
struct SequenceBatch {
  Tensor inputs;
  std::vector<std::size_t> lengths;
};

/// Looks up frozen embedding rows for fixed-length encoded documents.
SequenceBatch embed_batch(std::span<const std::vector<TokenId>> docs, const EmbeddingMatrix& emb);

// CNN

enum class BranchOrder {
  ConvTanhNorm,  // conv -> tanh -> batch-norm -> pool (default)
  ConvNormTanh,  // conv -> batch-norm -> tanh -> pool
};

struct CnnConfig {
  std::size_t max_len = 100;
  std::size_t embed_dim = 300;
  std::size_t filters = 64;
  std::vector<std::size_t> widths = {2, 3, 4, 5};
  double dropout = 0.5;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  BranchOrder order = BranchOrder::ConvTanhNorm;
};

struct CnnBranch {
  Conv1dLayer conv;
  BatchNormLayer norm;
};

struct CnnClassifier {
  CnnConfig config;
  std::vector<CnnBranch> branches;
  DenseLayer head;

  CnnClassifier() = default;
  CnnClassifier(CnnConfig cfg, std::uint64_t seed);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

struct CnnBranchCache {
  Tensor conv_out;
  Tensor act;  // tanh output (ConvTanhNorm) or batch-norm output (ConvNormTanh)
  Tensor post;  // tensor fed to the pool
  BatchNormCache norm;
  MaxPoolResult pool;
};

struct CnnCache {
  Tensor inputs;
  std::vector<CnnBranchCache> branches;
  Tensor features;  // N x (branches * F), before dropout
  DropoutMask dropout;
  Tensor head_in;
};

/// Train mode updates batch-norm running statistics and, if `cache` is
/// given, records what cnn_backward needs. Dropout masks come from
/// Rng(dropout_seed).
Tensor cnn_forward(const SequenceBatch& batch, CnnClassifier& model, Mode mode, std::uint64_t dropout_seed,
                   CnnCache* cache);
Tensor cnn_infer(const SequenceBatch& batch, const CnnClassifier& model);
/// Zeroes then fills every parameter gradient.
void cnn_backward(CnnClassifier& model, const CnnCache& cache, const Tensor& grad_logits);

// Recurrent models

struct RecurrentConfig {
  std::size_t embed_dim = 300;
  std::size_t hidden = 128;
};

/// Elman network h_t = tanh(W_x x_t + W_h h_{t-1} + b), logits = head(h_T).
struct RnnClassifier {
  RecurrentConfig config;
  Parameter w_x;  // H x D
  Parameter w_h;  // H x H
  Parameter b;    // H
  DenseLayer head;

  RnnClassifier() = default;
  RnnClassifier(RecurrentConfig cfg, std::uint64_t seed);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

struct RnnCache {
  Tensor inputs;
  std::vector<std::size_t> lengths;
  std::vector<std::vector<double>> hidden;  // per sample, (len + 1) x H with h_0 = 0
  Tensor last;                              // N x H
};

Tensor rnn_forward(const SequenceBatch& batch, const RnnClassifier& model, RnnCache* cache);
void rnn_backward(RnnClassifier& model, const RnnCache& cache, const Tensor& grad_logits);

/// LSTM with gates stacked as (input, forget, output, candidate).
struct LstmClassifier {
  RecurrentConfig config;
  Parameter w_x;  // 4H x D
  Parameter w_h;  // 4H x H
  Parameter b;    // 4H, forget slice initialised to 1
  DenseLayer head;

  LstmClassifier() = default;
  LstmClassifier(RecurrentConfig cfg, std::uint64_t seed);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

struct LstmCache {
  Tensor inputs;
  std::vector<std::size_t> lengths;
  // Per sample, per step: activated gates (4H), cell state, tanh(cell), hidden.
  std::vector<std::vector<double>> gates;
  std::vector<std::vector<double>> cell;   // (len + 1) x H
  std::vector<std::vector<double>> cell_tanh;
  std::vector<std::vector<double>> hidden;  // (len + 1) x H
  Tensor last;
};

Tensor lstm_forward(const SequenceBatch& batch, const LstmClassifier& model, LstmCache* cache);
void lstm_backward(LstmClassifier& model, const LstmCache& cache, const Tensor& grad_logits);

// Architecture-independent surface

enum class Architecture { Cnn, Rnn, Lstm };
std::string_view architecture_name(Architecture arch);
std::optional<Architecture> parse_architecture(std::string_view name);

using NeuralModel = std::variant<CnnClassifier, RnnClassifier, LstmClassifier>;

Architecture architecture(const NeuralModel& model);
std::vector<Parameter*> parameters(NeuralModel& model);
std::size_t input_dim(const NeuralModel& model);

/// Logits for a batch in infer mode; pure.
Tensor infer_logits(const NeuralModel& model, const SequenceBatch& batch);

/// Versioned text container: architecture, config, every parameter tensor
/// and batch-norm running statistics, doubles at 17 significant digits.
void save_model(const NeuralModel& model, std::ostream& out);
NeuralModel load_model(std::istream& in);

}  // namespace moodtag::nn

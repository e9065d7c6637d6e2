#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moodtag/corpus.hpp"
#include "moodtag/random.hpp"

namespace moodtag {

struct CbowConfig {
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t dim = 300;
  std::size_t epochs = 5;
  double lr_start = 0.025;
  double lr_end = 1e-4;
  std::uint64_t min_count = 5;
  std::uint64_t seed = 1;
  // Frequent-word subsampling threshold; 0 disables it.
  double subsample = 0.0;
  // Draw an effective radius uniformly from [1, window] per position.
  bool shrink_window = false;

  void validate() const;
};

/// Input and output vectors, row-major with one row per vocabulary index.
/// Rows for PAD and UNK stay zero.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(Vocabulary vocab, std::size_t dim);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return vocab_.size(); }

  std::span<double> input_row(TokenId id) { return {input_.data() + offset(id), dim_}; }
  std::span<const double> input_row(TokenId id) const { return {input_.data() + offset(id), dim_}; }
  std::span<double> output_row(TokenId id) { return {output_.data() + offset(id), dim_}; }
  std::span<const double> output_row(TokenId id) const { return {output_.data() + offset(id), dim_}; }

  std::vector<double>& input() { return input_; }
  const std::vector<double>& input() const { return input_; }
  std::vector<double>& output() { return output_; }
  const std::vector<double>& output() const { return output_; }

 private:
  std::size_t offset(TokenId id) const;

  Vocabulary vocab_;
  std::size_t dim_ = 0;
  std::vector<double> input_;
  std::vector<double> output_;
};

/// Inputs uniform in [-0.5/d, 0.5/d], outputs zero; reserved rows zero.
EmbeddingMatrix init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

/// Noise distribution p(w) proportional to count(w)^0.75 over non-reserved words.
class UnigramTable {
 public:
  explicit UnigramTable(const Vocabulary& vocab, double power = 0.75);

  double probability(TokenId id) const { return prob_.at(static_cast<std::size_t>(id)); }
  const std::vector<double>& probabilities() const { return prob_; }
  TokenId sample(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<double> cdf_;
};

inline UnigramTable build_unigram_table(const Vocabulary& vocab) { return UnigramTable(vocab); }

/// k draws, each redrawn up to 100 times while it equals `target`.
std::vector<TokenId> negative_sample(const UnigramTable& table, TokenId target, std::size_t k, Rng& rng);

/// -log s(h.u_center) - sum_j log s(-h.u_neg_j), h the mean context input vector.
double cbow_loss(TokenId center, std::span<const TokenId> context, std::span<const TokenId> negatives,
                 const EmbeddingMatrix& emb);

struct CbowGradients {
  // (row, gradient) pairs; a row appears once even if it occurs repeatedly.
  std::vector<std::pair<TokenId, std::vector<double>>> input;
  std::vector<std::pair<TokenId, std::vector<double>>> output;
  double loss = 0.0;
};

CbowGradients cbow_gradients(TokenId center, std::span<const TokenId> context,
                             std::span<const TokenId> negatives, const EmbeddingMatrix& emb);

/// One SGD step with fixed negatives; returns the loss before the update.
double cbow_update(TokenId center, std::span<const TokenId> context, std::span<const TokenId> negatives,
                   EmbeddingMatrix& emb, double lr);

/// Draws k negatives then applies cbow_update.
double cbow_step(TokenId center, std::span<const TokenId> context, EmbeddingMatrix& emb,
                 const UnigramTable& table, std::size_t k, double lr, Rng& rng);

struct CbowResult {
  EmbeddingMatrix embeddings;
  std::vector<double> epoch_loss;
};

CbowResult train_cbow(const std::vector<std::vector<TokenId>>& corpus, const Vocabulary& vocab,
                      const CbowConfig& cfg);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

std::vector<std::pair<std::string, double>> nearest_neighbors(const std::string& word,
                                                              const EmbeddingMatrix& emb, std::size_t top_k);

/// word2vec text format over the input vectors of non-reserved words.
void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

}  // namespace moodtag

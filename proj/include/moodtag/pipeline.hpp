#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moodtag/config.hpp"
#include "moodtag/corpus.hpp"
#include "moodtag/embeddings.hpp"
#include "moodtag/features.hpp"
#include "moodtag/nn/models.hpp"
#include "moodtag/nn/train.hpp"
#include "moodtag/svm.hpp"

namespace moodtag {

// The five model configurations compared in the evaluation table.
enum class ModelKind { Cnn, Rnn, Lstm, SvmTfidf, SvmLiwc };

inline constexpr std::array<ModelKind, 5> kAllModelKinds = {ModelKind::SvmTfidf, ModelKind::SvmLiwc, ModelKind::Cnn,
                                                            ModelKind::Rnn, ModelKind::Lstm};

/// Command-line spelling: cnn, rnn, lstm, svm-tfidf, svm-liwc.
std::string_view model_kind_name(ModelKind kind);
/// Table spelling: CNN, RNN, LSTM, TF-IDF+SVM, LIWC+SVM.
std::string_view model_display_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);
bool is_neural(ModelKind kind);

SyntheticConfig synthetic_config(const RunConfig& cfg);
CbowConfig cbow_config(const RunConfig& cfg);
nn::CnnConfig cnn_config(const RunConfig& cfg, std::size_t embed_dim);
nn::RecurrentConfig recurrent_config(const RunConfig& cfg, std::size_t embed_dim);
nn::TrainConfig train_config(const RunConfig& cfg);
/// gamma is left at its default when svm.gamma is "auto".
SmoOptions smo_options(const RunConfig& cfg);

/// FNV-1a over the vocabulary, dimension and input vectors, as 16 hex digits.
std::string embedding_fingerprint(const EmbeddingMatrix& emb);

struct TrainingRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

std::string training_log_csv(const std::vector<TrainingRow>& rows);

/// A fitted model of any kind together with the feature pipeline it needs.
struct TrainedModel {
  ModelKind kind = ModelKind::Cnn;
  // Neural kinds
  std::size_t max_len = 100;
  std::string embeddings_fingerprint;
  std::optional<nn::NeuralModel> network;
  // SVM kinds
  std::optional<TfidfModel> tfidf;
  std::optional<CategoryLexicon> lexicon;
  LiwcOptions liwc;
  std::optional<Standardizer> standardizer;
  std::optional<MulticlassSvm> svm;
};

struct TrainingResult {
  TrainedModel model;
  std::vector<TrainingRow> log;
};

struct TrainInputs {
  const EmbeddingMatrix* embeddings = nullptr;  // required by the neural kinds
  const CategoryLexicon* lexicon = nullptr;     // required by svm-liwc
};

/// Neural kinds log one row per epoch. SVM kinds log a single row with the
/// mean hinge loss of the four binary machines and the training accuracy.
TrainingResult train_model(ModelKind kind, std::span<const LyricDocument* const> train_docs, const RunConfig& cfg,
                           const TrainInputs& inputs);

struct ScoredPrediction {
  MoodLabel label = MoodLabel::Happiness;
  // Class probabilities for neural kinds, decision values for SVM kinds.
  std::array<double, kNumClasses> scores{};
};

/// Neural kinds need the embeddings they were trained with (SchemaMismatch
/// otherwise).
std::vector<ScoredPrediction> predict_documents(const TrainedModel& model, std::span<const LyricDocument* const> docs,
                                                const EmbeddingMatrix* embeddings);

/// Feature vector an SVM kind feeds to its classifier.
std::vector<double> svm_features(const TrainedModel& model, const LyricDocument& doc);

void save_trained_model(const TrainedModel& model, std::ostream& out);
TrainedModel load_trained_model(std::istream& in);
void save_trained_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_trained_model(const std::filesystem::path& path);

struct PreprocessResult {
  LabeledDataset dataset;
  std::size_t read = 0;
  std::size_t duplicates = 0;
  std::size_t empty = 0;  // dropped because cleaning left no tokens
};

/// Optional de-duplication, cleaning and segmentation, then a stratified split.
PreprocessResult preprocess_corpus(std::vector<LyricDocument> docs, const SegmenterLexicon& lexicon, SegmentMode mode,
                                   bool dedupe, double test_fraction, std::uint64_t seed);

/// Documents of one split, or every document for std::nullopt.
std::vector<const LyricDocument*> select_documents(const LabeledDataset& ds, std::optional<Split> split);

}  // namespace moodtag

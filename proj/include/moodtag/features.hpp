#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "moodtag/corpus.hpp"

namespace moodtag {

struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> schema;
};

/// Document frequencies fitted on a training corpus. Weight of term t in
/// document d is count(t, d) * ln(num_docs / doc_freq(t)); terms never seen
/// in training (and the reserved PAD/UNK slots) weigh 0.
class TfidfModel {
 public:
  TfidfModel() = default;
  TfidfModel(Vocabulary vocab, std::vector<std::uint64_t> doc_freq, std::uint64_t num_docs);

  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<std::uint64_t>& doc_freq() const { return doc_freq_; }
  std::uint64_t doc_freq(TokenId id) const { return doc_freq_.at(static_cast<std::size_t>(id)); }
  std::uint64_t num_docs() const { return num_docs_; }
  double idf(TokenId id) const;

 private:
  Vocabulary vocab_;
  std::vector<std::uint64_t> doc_freq_;
  std::uint64_t num_docs_ = 0;
};

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& train_docs, const Vocabulary& vocab);
/// Dense vector indexed like the vocabulary; schema is the vocabulary's token list.
FeatureVector transform_tfidf(const std::vector<std::string>& doc, const TfidfModel& model);

struct LexiconEntry {
  std::string word;
  std::string category;
  double weight = 1.0;
};

class CategoryLexicon {
 public:
  CategoryLexicon() = default;
  /// Rejects duplicate (word, category) pairs and non-positive weights.
  explicit CategoryLexicon(std::vector<LexiconEntry> entries);

  static CategoryLexicon load(const std::filesystem::path& path);
  static CategoryLexicon parse(std::istream& in);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  /// Distinct categories in first-appearance order.
  const std::vector<std::string>& categories() const { return categories_; }
  /// (category index, weight) pairs for a word.
  const std::vector<std::pair<std::size_t, double>>& lookup(const std::string& word) const;

 private:
  std::vector<LexiconEntry> entries_;
  std::vector<std::string> categories_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, double>>> by_word_;
};

struct LiwcOptions {
  // Tokens with at least this many characters count as long words.
  std::size_t long_word_chars = 3;
};

/// Schema: word_count, mean_tokens_per_line, long_word_fraction, then one
/// percentage per lexicon category. `line_count` of 0 is treated as one line.
FeatureVector liwc_features(const std::vector<std::string>& tokens, std::size_t line_count,
                            const CategoryLexicon& lex, const LiwcOptions& opts = {});
FeatureVector liwc_features(const LyricDocument& doc, const CategoryLexicon& lex, const LiwcOptions& opts = {});

/// CSV with header = schema; all rows must share one schema.
void write_features_csv(const std::vector<FeatureVector>& rows, std::ostream& out);

}  // namespace moodtag

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace moodtag {

enum class MoodLabel : std::uint8_t { Happiness = 0, Catharsis = 1, Sadness = 2, Quiet = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<MoodLabel, kNumClasses> kAllLabels = {
    MoodLabel::Happiness, MoodLabel::Catharsis, MoodLabel::Sadness, MoodLabel::Quiet};

constexpr std::size_t code(MoodLabel label) { return static_cast<std::size_t>(label); }
MoodLabel label_from_code(std::size_t code);
std::string_view label_name(MoodLabel label);
/// Case-insensitive match against the four class names.
std::optional<MoodLabel> parse_label(std::string_view name);
/// Argmax over per-class scores, ties to the smallest class code.
MoodLabel argmax_label(std::span<const double> scores);

using TokenId = std::int32_t;

struct LyricDocument {
  std::string id;
  std::optional<std::string> title;
  std::optional<std::string> artist;
  std::string raw_text;
  std::vector<std::string> tokens;
  std::optional<MoodLabel> label;
  // Non-empty lines after cleaning; 0 when unknown.
  std::size_t line_count = 0;
};

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kFirstWord = 2;

  Vocabulary();
  /// Tokens in index order starting at kFirstWord. Rejects duplicates and
  /// empty tokens.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

  /// Number of indices including the two reserved ones.
  std::size_t size() const { return index_to_token_.size(); }
  std::size_t word_count() const { return size() - kFirstWord; }

  std::optional<TokenId> find(std::string_view token) const;
  TokenId index_of(std::string_view token) const { return find(token).value_or(kUnk); }
  const std::string& token(TokenId id) const { return index_to_token_.at(static_cast<std::size_t>(id)); }
  std::uint64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }

  const std::vector<std::string>& tokens() const { return index_to_token_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  std::unordered_map<std::string, TokenId> token_to_index_;
  std::vector<std::string> index_to_token_;
  std::vector<std::uint64_t> counts_;
};

class SegmenterLexicon {
 public:
  SegmenterLexicon() = default;
  explicit SegmenterLexicon(const std::vector<std::string>& words);

  static SegmenterLexicon load(const std::filesystem::path& path);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t max_word_len() const { return max_word_len_; }
  bool contains(std::u32string_view word) const { return entries_.contains(std::u32string(word)); }

 private:
  std::unordered_set<std::u32string> entries_;
  std::size_t max_word_len_ = 0;
};

enum class SegmentMode { Lexicon, Whitespace };
std::optional<SegmentMode> parse_segment_mode(std::string_view name);

enum class Split : std::uint8_t { Train, Test };
std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

struct LabeledDataset {
  std::vector<LyricDocument> documents;
  std::vector<Split> split;
  std::uint64_t seed = 0;

  std::vector<const LyricDocument*> select(Split which) const;
};

struct ClassCounts {
  std::size_t total = 0;
  std::size_t train = 0;
  std::size_t test = 0;
  bool operator==(const ClassCounts&) const = default;
};

struct SyntheticConfig {
  std::size_t classes = 4;
  std::size_t docs_per_class = 500;
  std::size_t vocab_size = 500;
  std::size_t signal_bigrams_per_class = 3;
  std::size_t doc_len = 80;
  double noise_prob = 0.1;
  std::uint64_t seed = 7;
};

// Preprocessing

/// Strips LRC time tags and ID-tag header lines, keeps only CJK ideographs,
/// collapses whitespace.
std::string clean_lyric_text(std::string_view raw);
/// Cleans each line separately; empty results are dropped.
std::vector<std::string> clean_lyric_lines(std::string_view raw);

std::vector<std::string> segment(std::string_view text, const SegmenterLexicon& lexicon,
                                 SegmentMode mode);

/// Cleans and segments `doc.raw_text` into `doc.tokens`, filling `line_count`.
void preprocess_document(LyricDocument& doc, const SegmenterLexicon& lexicon, SegmentMode mode);

/// Keeps the first document of every group with byte-identical raw text.
std::vector<LyricDocument> deduplicate(std::vector<LyricDocument> docs);

// Vocabulary and encoding

Vocabulary build_vocabulary(const std::vector<LyricDocument>& docs, std::uint64_t min_count);
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, std::uint64_t min_count);

std::vector<TokenId> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   std::size_t max_len = 100);
std::vector<TokenId> encode_document(const LyricDocument& doc, const Vocabulary& vocab,
                                     std::size_t max_len = 100);

// Splits and statistics

/// Half-away-from-zero rounding of class_size * test_fraction.
std::size_t stratified_test_count(std::size_t class_size, double test_fraction);
LabeledDataset split_dataset(std::vector<LyricDocument> docs, double test_fraction, std::uint64_t seed);
std::array<ClassCounts, kNumClasses> dataset_stats(const LabeledDataset& ds);

std::vector<LyricDocument> generate_synthetic_corpus(const SyntheticConfig& cfg);
/// Surface form of synthetic token `index` (two CJK ideographs).
std::string synthetic_token(std::size_t index);
/// Signal bigrams owned by class `cls`, as token indices into the synthetic vocabulary.
std::vector<std::array<std::size_t, 2>> synthetic_signal_bigrams(const SyntheticConfig& cfg, std::size_t cls);

// File formats

/// JSON Lines with fields {id, title, artist, label, text}.
std::vector<LyricDocument> read_raw_jsonl(const std::filesystem::path& path);
void write_raw_jsonl(const std::vector<LyricDocument>& docs, const std::filesystem::path& path);
/// A directory with one subdirectory per class name, one lyric file each.
std::vector<LyricDocument> read_raw_directory(const std::filesystem::path& dir);
std::vector<LyricDocument> read_raw_input(const std::filesystem::path& path);

/// JSON Lines with fields {id, label_code, tokens, split} (plus line_count).
LabeledDataset read_processed(const std::filesystem::path& path);
void write_processed(const LabeledDataset& ds, const std::filesystem::path& path);

}  // namespace moodtag

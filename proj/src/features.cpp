#include "moodtag/features.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "moodtag/error.hpp"
#include "moodtag/utf8.hpp"

namespace moodtag {

TfidfModel::TfidfModel(Vocabulary vocab, std::vector<std::uint64_t> doc_freq, std::uint64_t num_docs)
    : vocab_(std::move(vocab)), doc_freq_(std::move(doc_freq)), num_docs_(num_docs) {
  if (doc_freq_.size() != vocab_.size())
    fail(Errc::DimensionMismatch, "doc_freq must have one entry per vocabulary index");
  if (num_docs_ < 1) fail(Errc::EmptyCorpus, "tf-idf model needs at least one document");
  for (std::size_t i = 0; i < doc_freq_.size(); ++i) {
    if (doc_freq_[i] > num_docs_) fail(Errc::InvalidArgument, "doc_freq exceeds num_docs");
    if (i < Vocabulary::kFirstWord && doc_freq_[i] != 0)
      fail(Errc::InvalidArgument, "reserved indices carry no document frequency");
  }
}

double TfidfModel::idf(TokenId id) const {
  const auto df = doc_freq(id);
  if (df == 0) return 0.0;
  return std::log(static_cast<double>(num_docs_) / static_cast<double>(df));
}

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& train_docs, const Vocabulary& vocab) {
  if (train_docs.empty()) fail(Errc::EmptyCorpus, "fit_tfidf needs at least one training document");
  std::vector<std::uint64_t> df(vocab.size(), 0);
  std::vector<std::size_t> last_seen(vocab.size(), SIZE_MAX);
  for (std::size_t d = 0; d < train_docs.size(); ++d) {
    for (const auto& tok : train_docs[d]) {
      const auto id = vocab.find(tok);
      if (!id) continue;
      const auto i = static_cast<std::size_t>(*id);
      if (last_seen[i] != d) {
        last_seen[i] = d;
        ++df[i];
      }
    }
  }
  return TfidfModel(vocab, std::move(df), train_docs.size());
}

FeatureVector transform_tfidf(const std::vector<std::string>& doc, const TfidfModel& model) {
  const auto& vocab = model.vocab();
  std::vector<double> tf(vocab.size(), 0.0);
  for (const auto& tok : doc) {
    if (const auto id = vocab.find(tok)) tf[static_cast<std::size_t>(*id)] += 1.0;
  }
  FeatureVector fv;
  fv.schema = vocab.tokens();
  fv.values.assign(vocab.size(), 0.0);
  for (std::size_t i = Vocabulary::kFirstWord; i < vocab.size(); ++i) {
    if (tf[i] != 0.0) fv.values[i] = tf[i] * model.idf(static_cast<TokenId>(i));
  }
  return fv;
}

// Category lexicon

CategoryLexicon::CategoryLexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
  std::unordered_map<std::string, std::size_t> cat_index;
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      fail(Errc::InvalidArgument, "weight for '" + e.word + "' must be positive");
    if (!seen.insert(e.word + '\t' + e.category).second)
      fail(Errc::DuplicateEntry, "(" + e.word + ", " + e.category + ")");
    auto [it, added] = cat_index.emplace(e.category, categories_.size());
    if (added) categories_.push_back(e.category);
    by_word_[e.word].emplace_back(it->second, e.weight);
  }
}

const std::vector<std::pair<std::size_t, double>>& CategoryLexicon::lookup(const std::string& word) const {
  static const std::vector<std::pair<std::size_t, double>> none;
  auto it = by_word_.find(word);
  return it == by_word_.end() ? none : it->second;
}

CategoryLexicon CategoryLexicon::parse(std::istream& in) {
  std::vector<LexiconEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty())
      fail(Errc::ParseError, "expected word<TAB>category<TAB>weight", lineno);
    LexiconEntry e{fields[0], fields[1], 1.0};
    if (fields.size() == 3) {
      std::size_t used = 0;
      try {
        e.weight = std::stod(fields[2], &used);
      } catch (const std::exception&) {
        fail(Errc::ParseError, "weight '" + fields[2] + "' is not a number", lineno);
      }
      if (used != fields[2].size() || !(e.weight > 0.0) || !std::isfinite(e.weight))
        fail(Errc::ParseError, "weight '" + fields[2] + "' must be a positive number", lineno);
    }
    if (!seen.insert(e.word + '\t' + e.category).second)
      fail(Errc::DuplicateEntry, "(" + e.word + ", " + e.category + ")", lineno);
    entries.push_back(std::move(e));
  }
  return CategoryLexicon(std::move(entries));
}

CategoryLexicon CategoryLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  return parse(in);
}

FeatureVector liwc_features(const std::vector<std::string>& tokens, std::size_t line_count,
                            const CategoryLexicon& lex, const LiwcOptions& opts) {
  FeatureVector fv;
  fv.schema = {"word_count", "mean_tokens_per_line", "long_word_fraction"};
  fv.schema.insert(fv.schema.end(), lex.categories().begin(), lex.categories().end());
  fv.values.assign(fv.schema.size(), 0.0);
  if (tokens.empty()) return fv;

  const double n = static_cast<double>(tokens.size());
  std::size_t long_words = 0;
  std::vector<double> weighted(lex.categories().size(), 0.0);
  for (const auto& t : tokens) {
    if (utf8::length(t) >= opts.long_word_chars) ++long_words;
    for (const auto& [cat, w] : lex.lookup(t)) weighted[cat] += w;
  }
  fv.values[0] = n;
  fv.values[1] = n / static_cast<double>(std::max<std::size_t>(1, line_count));
  fv.values[2] = static_cast<double>(long_words) / n;
  for (std::size_t c = 0; c < weighted.size(); ++c) fv.values[3 + c] = 100.0 * weighted[c] / n;
  return fv;
}

FeatureVector liwc_features(const LyricDocument& doc, const CategoryLexicon& lex, const LiwcOptions& opts) {
  return liwc_features(doc.tokens, doc.line_count, lex, opts);
}

void write_features_csv(const std::vector<FeatureVector>& rows, std::ostream& out) {
  if (rows.empty()) return;
  const auto& schema = rows.front().schema;
  for (std::size_t i = 0; i < schema.size(); ++i) out << (i ? "," : "") << schema[i];
  out << '\n';
  char buf[32];
  for (const auto& r : rows) {
    if (r.schema != schema) fail(Errc::SchemaMismatch, "feature rows disagree on schema");
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.values[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace moodtag

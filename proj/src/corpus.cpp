#include "moodtag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "moodtag/error.hpp"
#include "moodtag/random.hpp"
#include "moodtag/utf8.hpp"

namespace moodtag {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {"Happiness", "Catharsis", "Sadness",
                                                                   "Quiet"};

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' || cp == U'\f' ||
         cp == 0x3000;
}

std::string_view trim_ascii(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// LRC ID tags: [ti:...], [ar:...], [al:...], [by:...], [offset:...] and the
// less common au/length/re/ve.
bool is_metadata_line(std::string_view line) {
  line = trim_ascii(line);
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') return false;
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return false;
  if (line.find(']') != line.size() - 1) return false;
  const std::string key = lower_ascii(line.substr(1, colon - 1));
  static const std::unordered_set<std::string> keys = {"ti", "ar", "al", "by", "offset",
                                                       "au", "length", "re", "ve"};
  return keys.contains(key);
}

std::size_t count_digits(std::string_view s, std::size_t pos) {
  std::size_t n = 0;
  while (pos + n < s.size() && std::isdigit(static_cast<unsigned char>(s[pos + n]))) ++n;
  return n;
}

// Length of an [mm:ss], [mm:ss.xx] or [mm:ss.xxx] tag at `pos`, or 0.
std::size_t time_tag_length(std::string_view s, std::size_t pos) {
  if (s[pos] != '[') return 0;
  std::size_t p = pos + 1;
  const std::size_t minutes = count_digits(s, p);
  if (minutes == 0) return 0;
  p += minutes;
  if (p >= s.size() || s[p] != ':') return 0;
  ++p;
  if (count_digits(s, p) != 2) return 0;
  p += 2;
  if (p < s.size() && (s[p] == '.' || s[p] == ':')) {
    const std::size_t frac = count_digits(s, p + 1);
    if (frac < 2 || frac > 3) return 0;
    p += 1 + frac;
  }
  if (p >= s.size() || s[p] != ']') return 0;
  return p + 1 - pos;
}

std::string clean_line(std::string_view line) {
  std::string untagged;
  untagged.reserve(line.size());
  for (std::size_t i = 0; i < line.size();) {
    if (const std::size_t n = time_tag_length(line, i); n > 0) {
      untagged.push_back(' ');
      i += n;
    } else {
      untagged.push_back(line[i++]);
    }
  }
  std::string out;
  bool pending_space = false;
  for (char32_t cp : utf8::decode(untagged)) {
    if (!utf8::is_cjk_ideograph(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    utf8::append(out, cp);
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::u32string> split_on_space(std::u32string_view text) {
  std::vector<std::u32string> runs;
  std::u32string cur;
  for (char32_t cp : text) {
    if (is_space(cp)) {
      if (!cur.empty()) runs.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) runs.push_back(std::move(cur));
  return runs;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LyricDocument document_from_json(const nlohmann::json& j, std::size_t line) {
  LyricDocument doc;
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
    fail(Errc::ParseError, "missing string field 'id'", line);
  doc.id = j["id"].get<std::string>();
  if (doc.id.empty()) fail(Errc::ParseError, "empty id", line);
  if (j.contains("title") && j["title"].is_string()) doc.title = j["title"].get<std::string>();
  if (j.contains("artist") && j["artist"].is_string()) doc.artist = j["artist"].get<std::string>();
  if (!j.contains("text") || !j["text"].is_string())
    fail(Errc::ParseError, "document '" + doc.id + "' has no string field 'text'", line);
  doc.raw_text = j["text"].get<std::string>();
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) fail(Errc::UnknownLabel, "document '" + doc.id + "'", line);
    const auto name = j["label"].get<std::string>();
    auto label = parse_label(name);
    if (!label) fail(Errc::UnknownLabel, "document '" + doc.id + "' has label '" + name + "'", line);
    doc.label = *label;
  }
  return doc;
}

}  // namespace

MoodLabel label_from_code(std::size_t c) {
  if (c >= kNumClasses) fail(Errc::UnknownLabel, "label code " + std::to_string(c));
  return static_cast<MoodLabel>(c);
}

std::string_view label_name(MoodLabel label) { return kLabelNames[code(label)]; }

MoodLabel argmax_label(std::span<const double> scores) {
  if (scores.empty()) fail(Errc::InvalidArgument, "argmax over no scores");
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return label_from_code(best);
}

std::optional<MoodLabel> parse_label(std::string_view name) {
  const std::string lowered = lower_ascii(trim_ascii(name));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (lowered == lower_ascii(kLabelNames[c])) return static_cast<MoodLabel>(c);
  }
  return std::nullopt;
}

// Vocabulary

Vocabulary::Vocabulary() : index_to_token_{"<pad>", "<unk>"}, counts_{0, 0} {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts) : Vocabulary() {
  if (tokens.size() != counts.size())
    fail(Errc::LengthMismatch, "vocabulary tokens and counts differ in length");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) fail(Errc::InvalidArgument, "empty vocabulary token");
    const auto id = static_cast<TokenId>(index_to_token_.size());
    if (!token_to_index_.emplace(tokens[i], id).second)
      fail(Errc::DuplicateEntry, "vocabulary token '" + tokens[i] + "'");
    index_to_token_.push_back(std::move(tokens[i]));
    counts_.push_back(counts[i]);
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = token_to_index_.find(std::string(token));
  if (it == token_to_index_.end()) return std::nullopt;
  return it->second;
}

// Segmenter lexicon

SegmenterLexicon::SegmenterLexicon(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    std::u32string cps = utf8::decode(trim_ascii(w));
    if (cps.empty()) continue;
    max_word_len_ = std::max(max_word_len_, cps.size());
    entries_.insert(std::move(cps));
  }
}

SegmenterLexicon SegmenterLexicon::load(const std::filesystem::path& path) {
  std::vector<std::string> words;
  const std::string content = read_file(path);
  for (auto line : split_lines(content)) {
    line = trim_ascii(line);
    if (!line.empty() && line.front() != '#') words.emplace_back(line);
  }
  return SegmenterLexicon(words);
}

std::optional<SegmentMode> parse_segment_mode(std::string_view name) {
  if (name == "lexicon") return SegmentMode::Lexicon;
  if (name == "whitespace") return SegmentMode::Whitespace;
  return std::nullopt;
}

std::string_view split_name(Split split) { return split == Split::Train ? "train" : "test"; }

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  return std::nullopt;
}

std::vector<const LyricDocument*> LabeledDataset::select(Split which) const {
  std::vector<const LyricDocument*> out;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (split.at(i) == which) out.push_back(&documents[i]);
  }
  return out;
}

// Preprocessing

std::vector<std::string> clean_lyric_lines(std::string_view raw) {
  std::vector<std::string> out;
  for (auto line : split_lines(raw)) {
    if (is_metadata_line(line)) continue;
    std::string cleaned = clean_line(line);
    if (!cleaned.empty()) out.push_back(std::move(cleaned));
  }
  return out;
}

std::string clean_lyric_text(std::string_view raw) {
  std::string out;
  for (const auto& line : clean_lyric_lines(raw)) {
    if (!out.empty()) out.push_back(' ');
    out += line;
  }
  return out;
}

std::vector<std::string> segment(std::string_view text, const SegmenterLexicon& lexicon, SegmentMode mode) {
  std::vector<std::string> tokens;
  const auto runs = split_on_space(utf8::decode(text));
  if (mode == SegmentMode::Whitespace) {
    for (const auto& run : runs) tokens.push_back(utf8::encode(run));
    return tokens;
  }
  if (lexicon.empty()) fail(Errc::LexiconEmpty, "lexicon segmentation requires a non-empty lexicon");
  for (const auto& run : runs) {
    std::size_t pos = 0;
    while (pos < run.size()) {
      std::size_t take = 1;
      for (std::size_t len = std::min(lexicon.max_word_len(), run.size() - pos); len >= 2; --len) {
        if (lexicon.contains(std::u32string_view(run).substr(pos, len))) {
          take = len;
          break;
        }
      }
      tokens.push_back(utf8::encode(std::u32string_view(run).substr(pos, take)));
      pos += take;
    }
  }
  return tokens;
}

void preprocess_document(LyricDocument& doc, const SegmenterLexicon& lexicon, SegmentMode mode) {
  doc.tokens.clear();
  const auto lines = clean_lyric_lines(doc.raw_text);
  doc.line_count = lines.size();
  for (const auto& line : lines) {
    auto toks = segment(line, lexicon, mode);
    doc.tokens.insert(doc.tokens.end(), std::make_move_iterator(toks.begin()),
                      std::make_move_iterator(toks.end()));
  }
}

std::vector<LyricDocument> deduplicate(std::vector<LyricDocument> docs) {
  std::unordered_set<std::string> seen;
  std::vector<LyricDocument> out;
  for (auto& d : docs) {
    if (seen.insert(d.raw_text).second) out.push_back(std::move(d));
  }
  return out;
}

// Vocabulary and encoding

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, std::uint64_t min_count) {
  if (min_count < 1) fail(Errc::InvalidArgument, "min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& doc : docs)
    for (const auto& t : doc) ++freq[t];
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  if (kept.empty()) fail(Errc::EmptyVocabulary, "no token reaches min_count " + std::to_string(min_count));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (auto& [tok, n] : kept) {
    tokens.push_back(std::move(tok));
    counts.push_back(n);
  }
  return Vocabulary(std::move(tokens), std::move(counts));
}

Vocabulary build_vocabulary(const std::vector<LyricDocument>& docs, std::uint64_t min_count) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(docs.size());
  for (const auto& d : docs) tokens.push_back(d.tokens);
  return build_vocabulary(tokens, min_count);
}

std::vector<TokenId> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   std::size_t max_len) {
  std::vector<TokenId> out(max_len, Vocabulary::kPad);
  const std::size_t n = std::min(max_len, tokens.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = vocab.index_of(tokens[i]);
  return out;
}

std::vector<TokenId> encode_document(const LyricDocument& doc, const Vocabulary& vocab, std::size_t max_len) {
  return encode_tokens(doc.tokens, vocab, max_len);
}

// Splits

std::size_t stratified_test_count(std::size_t class_size, double test_fraction) {
  return static_cast<std::size_t>(std::round(static_cast<double>(class_size) * test_fraction));
}

LabeledDataset split_dataset(std::vector<LyricDocument> docs, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    fail(Errc::InvalidArgument, "test_fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].label) fail(Errc::InvalidArgument, "document '" + docs[i].id + "' is unlabeled");
    members[code(*docs[i].label)].push_back(i);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (members[c].size() < 2)
      fail(Errc::ClassTooSmall, std::string(kLabelNames[c]) + " has " + std::to_string(members[c].size()) +
                                    " documents (need >= 2)");
  }
  LabeledDataset ds;
  ds.seed = seed;
  ds.split.assign(docs.size(), Split::Train);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Rng rng(seed, c);
    auto& idx = members[c];
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t n_test = stratified_test_count(idx.size(), test_fraction);
    for (std::size_t k = 0; k < n_test; ++k) ds.split[idx[k]] = Split::Test;
  }
  ds.documents = std::move(docs);
  return ds;
}

std::array<ClassCounts, kNumClasses> dataset_stats(const LabeledDataset& ds) {
  std::array<ClassCounts, kNumClasses> stats{};
  for (std::size_t i = 0; i < ds.documents.size(); ++i) {
    const auto& d = ds.documents[i];
    if (!d.label) continue;
    auto& s = stats[code(*d.label)];
    ++s.total;
    if (i < ds.split.size() && ds.split[i] == Split::Test)
      ++s.test;
    else
      ++s.train;
  }
  return stats;
}

// Synthetic corpus

std::string synthetic_token(std::size_t index) {
  std::string out;
  utf8::append(out, static_cast<char32_t>(0x4E00 + index / 64));
  utf8::append(out, static_cast<char32_t>(0x6000 + index % 64));
  return out;
}

std::vector<std::array<std::size_t, 2>> synthetic_signal_bigrams(const SyntheticConfig& cfg, std::size_t cls) {
  std::vector<std::array<std::size_t, 2>> out;
  for (std::size_t b = 0; b < cfg.signal_bigrams_per_class; ++b) {
    const std::size_t first = 2 * (cls * cfg.signal_bigrams_per_class + b);
    out.push_back({first, first + 1});
  }
  return out;
}

std::vector<LyricDocument> generate_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.classes < 2 || cfg.classes > kNumClasses)
    fail(Errc::ConfigInfeasible, "classes must lie in [2, 4]");
  if (cfg.docs_per_class < 10) fail(Errc::ConfigInfeasible, "docs_per_class must be >= 10");
  if (cfg.signal_bigrams_per_class < 1) fail(Errc::ConfigInfeasible, "signal_bigrams_per_class must be >= 1");
  const std::size_t signal_tokens = kNumClasses * cfg.signal_bigrams_per_class * 2;
  if (cfg.vocab_size < signal_tokens + 10)
    fail(Errc::ConfigInfeasible, "vocab_size " + std::to_string(cfg.vocab_size) + " leaves no room for " +
                                     std::to_string(signal_tokens) + " signal tokens plus 10 noise tokens");
  if (cfg.doc_len < 4 * cfg.signal_bigrams_per_class)
    fail(Errc::ConfigInfeasible, "doc_len must be >= 4 * signal_bigrams_per_class");
  if (!(cfg.noise_prob >= 0.0 && cfg.noise_prob <= 1.0))
    fail(Errc::ConfigInfeasible, "noise_prob must lie in [0, 1]");

  // Zipfian noise distribution over the tokens that carry no signal.
  const std::size_t noise_tokens = cfg.vocab_size - signal_tokens;
  std::vector<double> cdf(noise_tokens);
  double acc = 0.0;
  for (std::size_t r = 0; r < noise_tokens; ++r) cdf[r] = acc += 1.0 / static_cast<double>(r + 1);
  for (auto& v : cdf) v /= acc;

  Rng rng(cfg.seed);
  std::vector<LyricDocument> docs;
  docs.reserve(cfg.classes * cfg.docs_per_class);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const auto bigrams = synthetic_signal_bigrams(cfg, c);
    for (std::size_t i = 0; i < cfg.docs_per_class; ++i) {
      std::vector<std::size_t> ids(cfg.doc_len);
      for (auto& id : ids) {
        const double u = rng.uniform();
        const auto rank = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        id = signal_tokens + std::min(rank, noise_tokens - 1);
      }
      std::vector<bool> occupied(cfg.doc_len, false);
      for (const auto& bg : bigrams) {
        if (rng.bernoulli(cfg.noise_prob)) continue;
        std::size_t pos;
        do {
          pos = static_cast<std::size_t>(rng.below(cfg.doc_len - 1));
        } while (occupied[pos] || occupied[pos + 1]);
        occupied[pos] = occupied[pos + 1] = true;
        ids[pos] = bg[0];
        ids[pos + 1] = bg[1];
      }
      LyricDocument doc;
      char buf[48];
      std::snprintf(buf, sizeof buf, "synth-%zu-%04zu", c, i);
      doc.id = buf;
      doc.label = label_from_code(c);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        doc.tokens.push_back(synthetic_token(ids[k]));
        if (k > 0) doc.raw_text.push_back(k % 10 == 0 ? '\n' : ' ');
        doc.raw_text += doc.tokens.back();
      }
      doc.line_count = (cfg.doc_len + 9) / 10;
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

// File formats

std::vector<LyricDocument> read_raw_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::vector<LyricDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ascii(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(Errc::ParseError, e.what(), lineno);
    }
    docs.push_back(document_from_json(j, lineno));
  }
  return docs;
}

void write_raw_jsonl(const std::vector<LyricDocument>& docs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  for (const auto& d : docs) {
    ordered_json j;
    j["id"] = d.id;
    j["title"] = d.title ? ordered_json(*d.title) : ordered_json(nullptr);
    j["artist"] = d.artist ? ordered_json(*d.artist) : ordered_json(nullptr);
    j["label"] = d.label ? ordered_json(std::string(label_name(*d.label))) : ordered_json(nullptr);
    j["text"] = d.raw_text;
    out << j.dump() << '\n';
  }
}

std::vector<LyricDocument> read_raw_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<LyricDocument> docs;
  for (const auto& cdir : class_dirs) {
    const std::string name = cdir.filename().string();
    auto label = parse_label(name);
    if (!label) fail(Errc::UnknownLabel, "directory '" + name + "' is not a class name");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cdir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      LyricDocument doc;
      doc.id = name + "/" + f.stem().string();
      doc.raw_text = read_file(f);
      doc.label = *label;
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::vector<LyricDocument> read_raw_input(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return read_raw_directory(path);
  return read_raw_jsonl(path);
}

LabeledDataset read_processed(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  LabeledDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ascii(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(Errc::ParseError, e.what(), lineno);
    }
    try {
      LyricDocument doc;
      doc.id = j.at("id").get<std::string>();
      const auto label_code = j.at("label_code").get<std::size_t>();
      if (label_code >= kNumClasses) fail(Errc::UnknownLabel, "label_code out of range", lineno);
      doc.label = label_from_code(label_code);
      doc.tokens = j.at("tokens").get<std::vector<std::string>>();
      const auto split = parse_split(j.at("split").get<std::string>());
      if (!split) fail(Errc::ParseError, "split must be 'train' or 'test'", lineno);
      doc.line_count = j.value("line_count", std::size_t{0});
      ds.documents.push_back(std::move(doc));
      ds.split.push_back(*split);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, e.what(), lineno);
    }
  }
  return ds;
}

void write_processed(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  for (std::size_t i = 0; i < ds.documents.size(); ++i) {
    const auto& d = ds.documents[i];
    ordered_json j;
    j["id"] = d.id;
    j["label_code"] = code(d.label.value());
    j["tokens"] = d.tokens;
    j["split"] = std::string(split_name(ds.split.at(i)));
    j["line_count"] = d.line_count;
    out << j.dump() << '\n';
  }
}

}  // namespace moodtag

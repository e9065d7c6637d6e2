#include "moodtag/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "moodtag/error.hpp"

namespace moodtag {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "seed for every random choice"},
      // paths
      {"input", "", "raw lyrics: JSON Lines file or class-per-subdirectory tree"},
      {"output", "", "output file"},
      {"dataset", "", "processed dataset (JSON Lines)"},
      {"embeddings", "", "word vectors in word2vec text format"},
      {"segment_lexicon", "", "word list for forward maximum matching"},
      {"liwc_lexicon", "", "category lexicon: word<TAB>category[<TAB>weight]"},
      {"model", "", "model file"},
      {"log", "", "training log CSV (default: <model>.log.csv)"},
      {"report_csv", "", "per-class report CSV"},
      {"confusion_csv", "", "confusion matrix CSV"},
      // preprocessing and split
      {"segment_mode", "lexicon", "lexicon | whitespace"},
      {"dedupe", "true", "drop documents with identical raw text"},
      {"test_fraction", "0.1", "per-class share of documents in the test split"},
      {"max_len", "100", "tokens kept per document for the neural models"},
      // synthetic corpus
      {"synth.classes", "4", "number of classes"},
      {"synth.docs_per_class", "500", "documents per class"},
      {"synth.vocab_size", "500", "synthetic vocabulary size"},
      {"synth.bigrams_per_class", "3", "planted signal bigrams per class"},
      {"synth.doc_len", "80", "tokens per document"},
      {"synth.noise", "0.1", "probability of omitting each planted bigram"},
      // word embeddings
      {"cbow.dim", "300", "vector dimension"},
      {"cbow.window", "5", "context radius"},
      {"cbow.negatives", "5", "negative samples per position"},
      {"cbow.epochs", "5", "passes over the corpus"},
      {"cbow.lr_start", "0.025", "initial learning rate"},
      {"cbow.lr_end", "0.0001", "final learning rate"},
      {"cbow.min_count", "5", "minimum token count to enter the vocabulary"},
      {"cbow.subsample", "0", "frequent-word subsampling threshold (0 = off)"},
      {"cbow.shrink_window", "false", "sample the context radius per position"},
      // neural models
      {"cnn.filters", "64", "filters per branch"},
      {"cnn.widths", "2,3,4,5", "kernel width of each branch"},
      {"cnn.dropout", "0.5", "dropout rate before the output layer"},
      {"cnn.bn_momentum", "0.9", "batch-norm running-statistics momentum"},
      {"cnn.bn_eps", "1e-5", "batch-norm epsilon"},
      {"cnn.order", "conv-tanh-norm", "conv-tanh-norm | conv-norm-tanh"},
      {"rnn.hidden", "128", "hidden units of the RNN and LSTM"},
      {"train.batch_size", "100", "mini-batch size"},
      {"train.epochs", "10", "training epochs"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"train.l2", "0.0001", "L2 coefficient on weights"},
      {"train.shuffle", "true", "reshuffle every epoch"},
      {"train.clip", "5", "gradient norm clip for recurrent models"},
      {"train.beta1", "0.9", "Adam first-moment decay"},
      {"train.beta2", "0.999", "Adam second-moment decay"},
      {"train.eps", "1e-8", "Adam epsilon"},
      // SVM baselines
      {"svm.C", "1", "soft-margin penalty"},
      {"svm.gamma", "auto", "RBF gamma, or auto = 1/(features * variance)"},
      {"svm.tol", "0.001", "KKT tolerance"},
      {"svm.max_passes", "10", "quiet sweeps before SMO stops"},
      {"tfidf.min_count", "1", "minimum training count for a TF-IDF term"},
      {"liwc.long_word_chars", "3", "characters that make a token a long word"},
      // evaluation and checks
      {"split", "test", "train | test | all"},
      {"gradcheck.epsilon", "1e-5", "central-difference step"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_.emplace(k.name, k.default_value);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  auto it = values_.find(key);
  if (it == values_.end()) fail(Errc::InvalidArgument, "unknown config key '" + std::string(key) + "'");
  it->second = std::string(trim(value));
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) fail(Errc::InvalidArgument, "expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::parse(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) fail(Errc::ParseError, "expected key=value", lineno);
    const auto key = trim(view.substr(0, eq));
    if (!values_.contains(key)) fail(Errc::ParseError, "unknown config key '" + std::string(key) + "'", lineno);
    set(key, view.substr(eq + 1));
  }
}

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open config file " + path.string());
  parse(in);
}

const std::string& RunConfig::str(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(Errc::InvalidArgument, "unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::uint64_t RunConfig::u64(std::string_view key) const {
  const auto& v = str(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    fail(Errc::InvalidArgument, std::string(key) + " must be a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t RunConfig::size(std::string_view key) const { return static_cast<std::size_t>(u64(key)); }

double RunConfig::real(std::string_view key) const {
  const auto& v = str(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out))
    fail(Errc::InvalidArgument, std::string(key) + " must be a finite number, got '" + v + "'");
  return out;
}

bool RunConfig::flag(std::string_view key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(Errc::InvalidArgument, std::string(key) + " must be true or false, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::size_list(std::string_view key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
      fail(Errc::InvalidArgument, std::string(key) + " must be a comma-separated list of integers");
    out.push_back(v);
  }
  if (out.empty()) fail(Errc::InvalidArgument, std::string(key) + " must not be empty");
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& k : config_keys()) out += std::string(k.name) + "=" + str(k.name) + "\n";
  return out;
}

}  // namespace moodtag

#include "moodtag/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "moodtag/error.hpp"

namespace moodtag {

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Rnn: return "rnn";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::SvmTfidf: return "svm-tfidf";
    case ModelKind::SvmLiwc: return "svm-liwc";
  }
  return "?";
}

std::string_view model_display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnn: return "CNN";
    case ModelKind::Rnn: return "RNN";
    case ModelKind::Lstm: return "LSTM";
    case ModelKind::SvmTfidf: return "TF-IDF+SVM";
    case ModelKind::SvmLiwc: return "LIWC+SVM";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto k : kAllModelKinds) {
    if (model_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

bool is_neural(ModelKind kind) { return kind == ModelKind::Cnn || kind == ModelKind::Rnn || kind == ModelKind::Lstm; }

SyntheticConfig synthetic_config(const RunConfig& cfg) {
  SyntheticConfig s;
  s.classes = cfg.size("synth.classes");
  s.docs_per_class = cfg.size("synth.docs_per_class");
  s.vocab_size = cfg.size("synth.vocab_size");
  s.signal_bigrams_per_class = cfg.size("synth.bigrams_per_class");
  s.doc_len = cfg.size("synth.doc_len");
  s.noise_prob = cfg.real("synth.noise");
  s.seed = cfg.u64("seed");
  return s;
}

CbowConfig cbow_config(const RunConfig& cfg) {
  CbowConfig c;
  c.dim = cfg.size("cbow.dim");
  c.window = cfg.size("cbow.window");
  c.negatives = cfg.size("cbow.negatives");
  c.epochs = cfg.size("cbow.epochs");
  c.lr_start = cfg.real("cbow.lr_start");
  c.lr_end = cfg.real("cbow.lr_end");
  c.min_count = cfg.u64("cbow.min_count");
  c.subsample = cfg.real("cbow.subsample");
  c.shrink_window = cfg.flag("cbow.shrink_window");
  c.seed = cfg.u64("seed");
  c.validate();
  return c;
}

nn::CnnConfig cnn_config(const RunConfig& cfg, std::size_t embed_dim) {
  nn::CnnConfig c;
  c.max_len = cfg.size("max_len");
  c.embed_dim = embed_dim;
  c.filters = cfg.size("cnn.filters");
  c.widths = cfg.size_list("cnn.widths");
  c.dropout = cfg.real("cnn.dropout");
  c.bn_momentum = cfg.real("cnn.bn_momentum");
  c.bn_eps = cfg.real("cnn.bn_eps");
  const auto& order = cfg.str("cnn.order");
  if (order == "conv-tanh-norm")
    c.order = nn::BranchOrder::ConvTanhNorm;
  else if (order == "conv-norm-tanh")
    c.order = nn::BranchOrder::ConvNormTanh;
  else
    fail(Errc::InvalidArgument, "cnn.order must be conv-tanh-norm or conv-norm-tanh");
  if (!(c.bn_eps > 0.0)) fail(Errc::InvalidArgument, "cnn.bn_eps must be positive");
  if (!(c.bn_momentum >= 0.0 && c.bn_momentum < 1.0)) fail(Errc::InvalidArgument, "cnn.bn_momentum must lie in [0, 1)");
  return c;
}

nn::RecurrentConfig recurrent_config(const RunConfig& cfg, std::size_t embed_dim) {
  nn::RecurrentConfig c;
  c.embed_dim = embed_dim;
  c.hidden = cfg.size("rnn.hidden");
  if (c.hidden < 1) fail(Errc::InvalidArgument, "rnn.hidden must be at least 1");
  return c;
}

nn::TrainConfig train_config(const RunConfig& cfg) {
  nn::TrainConfig t;
  t.batch_size = cfg.size("train.batch_size");
  t.epochs = cfg.size("train.epochs");
  t.lr = cfg.real("train.lr");
  t.l2 = cfg.real("train.l2");
  t.seed = cfg.u64("seed");
  t.shuffle = cfg.flag("train.shuffle");
  t.clip = cfg.real("train.clip");
  t.beta1 = cfg.real("train.beta1");
  t.beta2 = cfg.real("train.beta2");
  t.eps = cfg.real("train.eps");
  t.validate();
  return t;
}

SmoOptions smo_options(const RunConfig& cfg) {
  SmoOptions o;
  o.C = cfg.real("svm.C");
  if (cfg.str("svm.gamma") != "auto") o.gamma = cfg.real("svm.gamma");
  o.tol = cfg.real("svm.tol");
  o.max_passes = cfg.size("svm.max_passes");
  o.seed = cfg.u64("seed");
  if (!(o.C > 0.0) || !(o.gamma > 0.0) || !(o.tol > 0.0))
    fail(Errc::InvalidArgument, "svm.C, svm.gamma and svm.tol must be positive");
  if (o.max_passes < 1) fail(Errc::InvalidArgument, "svm.max_passes must be at least 1");
  return o;
}

std::string embedding_fingerprint(const EmbeddingMatrix& emb) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t dim = emb.dim();
  mix(&dim, sizeof dim);
  for (const auto& tok : emb.vocab().tokens()) {
    mix(tok.data(), tok.size());
    mix("\n", 1);
  }
  for (double v : emb.input()) mix(&v, sizeof v);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string training_log_csv(const std::vector<TrainingRow>& rows) {
  std::string out = "epoch,loss,accuracy\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f,%.6f\n", r.epoch, r.loss, r.accuracy);
    out += buf;
  }
  return out;
}

PreprocessResult preprocess_corpus(std::vector<LyricDocument> docs, const SegmenterLexicon& lexicon, SegmentMode mode,
                                   bool dedupe, double test_fraction, std::uint64_t seed) {
  PreprocessResult out;
  out.read = docs.size();
  if (dedupe) docs = deduplicate(std::move(docs));
  out.duplicates = out.read - docs.size();
  std::vector<LyricDocument> kept;
  for (auto& d : docs) {
    if (!d.label) fail(Errc::UnknownLabel, "document " + d.id + " has no label");
    preprocess_document(d, lexicon, mode);
    if (d.tokens.empty()) {
      ++out.empty;
      continue;
    }
    kept.push_back(std::move(d));
  }
  out.dataset = split_dataset(std::move(kept), test_fraction, seed);
  return out;
}

std::vector<const LyricDocument*> select_documents(const LabeledDataset& ds, std::optional<Split> split) {
  if (split) return ds.select(*split);
  std::vector<const LyricDocument*> out;
  for (const auto& d : ds.documents) out.push_back(&d);
  return out;
}

namespace {

std::vector<MoodLabel> labels_of(std::span<const LyricDocument* const> docs) {
  std::vector<MoodLabel> out;
  for (const auto* d : docs) {
    if (!d->label) fail(Errc::UnknownLabel, "document " + d->id + " has no label");
    out.push_back(*d->label);
  }
  return out;
}

std::vector<std::vector<TokenId>> encode_all(std::span<const LyricDocument* const> docs, const Vocabulary& vocab,
                                             std::size_t max_len) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(docs.size());
  for (const auto* d : docs) out.push_back(encode_document(*d, vocab, max_len));
  return out;
}

void train_neural(TrainingResult& result, std::span<const LyricDocument* const> docs, const RunConfig& cfg,
                  const TrainInputs& inputs) {
  if (!inputs.embeddings) fail(Errc::InvalidArgument, "neural models need word embeddings");
  const EmbeddingMatrix& emb = *inputs.embeddings;
  auto& m = result.model;
  m.max_len = cfg.size("max_len");
  if (m.max_len < 1) fail(Errc::InvalidArgument, "max_len must be at least 1");
  m.embeddings_fingerprint = embedding_fingerprint(emb);
  const auto tcfg = train_config(cfg);
  const std::uint64_t seed = cfg.u64("seed");
  switch (m.kind) {
    case ModelKind::Cnn: m.network = nn::CnnClassifier(cnn_config(cfg, emb.dim()), seed); break;
    case ModelKind::Rnn: m.network = nn::RnnClassifier(recurrent_config(cfg, emb.dim()), seed); break;
    default: m.network = nn::LstmClassifier(recurrent_config(cfg, emb.dim()), seed); break;
  }
  nn::EncodedSet data;
  data.docs = encode_all(docs, emb.vocab(), m.max_len);
  for (auto l : labels_of(docs)) data.labels.push_back(code(l));
  const auto history = nn::fit(*m.network, data, emb, tcfg);
  for (std::size_t e = 0; e < history.size(); ++e) result.log.push_back({e + 1, history[e].loss, history[e].accuracy});
}

void train_svm(TrainingResult& result, std::span<const LyricDocument* const> docs, const RunConfig& cfg,
               const TrainInputs& inputs) {
  auto& m = result.model;
  const auto labels = labels_of(docs);
  if (m.kind == ModelKind::SvmTfidf) {
    std::vector<std::vector<std::string>> token_lists;
    for (const auto* d : docs) token_lists.push_back(d->tokens);
    const Vocabulary vocab = build_vocabulary(token_lists, cfg.u64("tfidf.min_count"));
    m.tfidf = fit_tfidf(token_lists, vocab);
  } else {
    if (!inputs.lexicon) fail(Errc::InvalidArgument, "svm-liwc needs a category lexicon");
    m.lexicon = *inputs.lexicon;
    m.liwc.long_word_chars = cfg.size("liwc.long_word_chars");
  }

  DenseMatrix X;
  X.reserve(docs.size());
  for (const auto* d : docs) X.push_back(svm_features(m, *d));
  if (m.kind == ModelKind::SvmLiwc) {
    m.standardizer = Standardizer::fit(X);
    for (auto& row : X) row = m.standardizer->transform(std::move(row));
  }

  SmoOptions opts = smo_options(cfg);
  if (cfg.str("svm.gamma") == "auto") opts.gamma = default_gamma(X);
  m.svm = train_one_vs_rest(X, labels, opts);

  double hinge = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto values = m.svm->decision_values(X[i]);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double y = code(labels[i]) == c ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - y * values[c]);
    }
    if (argmax_label(values) == labels[i]) ++correct;
  }
  const double n = static_cast<double>(X.size());
  result.log.push_back({1, hinge / (n * kNumClasses), static_cast<double>(correct) / n});
}

}  // namespace

TrainingResult train_model(ModelKind kind, std::span<const LyricDocument* const> train_docs, const RunConfig& cfg,
                           const TrainInputs& inputs) {
  if (train_docs.empty()) fail(Errc::EmptyDataset, "no training documents");
  TrainingResult result;
  result.model.kind = kind;
  if (is_neural(kind))
    train_neural(result, train_docs, cfg, inputs);
  else
    train_svm(result, train_docs, cfg, inputs);
  return result;
}

std::vector<double> svm_features(const TrainedModel& model, const LyricDocument& doc) {
  if (model.kind == ModelKind::SvmTfidf) {
    if (!model.tfidf) fail(Errc::SchemaMismatch, "model lacks its tf-idf table");
    auto v = transform_tfidf(doc.tokens, *model.tfidf).values;
    l2_normalize(v);
    return v;
  }
  if (model.kind == ModelKind::SvmLiwc) {
    if (!model.lexicon) fail(Errc::SchemaMismatch, "model lacks its category lexicon");
    return liwc_features(doc, *model.lexicon, model.liwc).values;
  }
  fail(Errc::SchemaMismatch, "not an SVM model");
}

std::vector<ScoredPrediction> predict_documents(const TrainedModel& model, std::span<const LyricDocument* const> docs,
                                                const EmbeddingMatrix* embeddings) {
  std::vector<ScoredPrediction> out;
  if (docs.empty()) return out;
  if (is_neural(model.kind)) {
    if (!model.network) fail(Errc::SchemaMismatch, "model lacks its network");
    if (!embeddings) fail(Errc::InvalidArgument, "neural models need word embeddings");
    if (embedding_fingerprint(*embeddings) != model.embeddings_fingerprint)
      fail(Errc::SchemaMismatch, "embeddings differ from the ones the model was trained with");
    const auto encoded = encode_all(docs, embeddings->vocab(), model.max_len);
    const auto preds = nn::predict(*model.network, encoded, *embeddings);
    for (std::size_t i = 0; i < docs.size(); ++i) out.push_back({preds.labels[i], preds.probs[i]});
    return out;
  }
  if (!model.svm) fail(Errc::SchemaMismatch, "model lacks its SVM");
  for (const auto* d : docs) {
    auto x = svm_features(model, *d);
    if (model.standardizer) x = model.standardizer->transform(std::move(x));
    if (x.size() != model.svm->models[0].dim())
      fail(Errc::SchemaMismatch, "feature dimension " + std::to_string(x.size()) + " does not match the SVM's " +
                                     std::to_string(model.svm->models[0].dim()));
    const auto values = model.svm->decision_values(x);
    out.push_back({argmax_label(values), values});
  }
  return out;
}

// Persistence

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next() {
    std::string s;
    if (!std::getline(in_, s)) fail(Errc::ParseError, "model file ends early");
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  }

  // "keyword rest" with a required keyword.
  std::string field(std::string_view keyword) {
    const std::string s = next();
    if (s.size() <= keyword.size() || s.compare(0, keyword.size(), keyword) != 0 || s[keyword.size()] != ' ')
      fail(Errc::ParseError, "expected '" + std::string(keyword) + " ...', got '" + s + "'");
    return s.substr(keyword.size() + 1);
  }

  std::vector<double> numbers(std::size_t n) {
    std::istringstream ss(next());
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      out.push_back(std::strtod(tok.c_str(), &end));
      if (end != tok.c_str() + tok.size()) fail(Errc::ParseError, "bad number '" + tok + "'");
    }
    if (out.size() != n) fail(Errc::ParseError, "expected " + std::to_string(n) + " numbers");
    return out;
  }

  std::istream& stream() { return in_; }

 private:
  std::istream& in_;
};

std::uint64_t to_u64(const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::ParseError, "expected an integer, got '" + s + "'");
  }
}

void write_row(std::ostream& out, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << fmt17(v[i]);
  out << '\n';
}

}  // namespace

void save_trained_model(const TrainedModel& model, std::ostream& out) {
  out << "moodtag-model 1\nkind " << model_kind_name(model.kind) << '\n';
  if (is_neural(model.kind)) {
    if (!model.network) fail(Errc::SchemaMismatch, "model lacks its network");
    out << "max_len " << model.max_len << "\nembeddings " << model.embeddings_fingerprint << '\n';
    nn::save_model(*model.network, out);
    return;
  }
  if (!model.svm) fail(Errc::SchemaMismatch, "model lacks its SVM");
  if (model.kind == ModelKind::SvmTfidf) {
    const auto& t = *model.tfidf;
    const auto& vocab = t.vocab();
    out << "tfidf " << t.num_docs() << ' ' << vocab.word_count() << '\n';
    for (std::size_t i = Vocabulary::kFirstWord; i < vocab.size(); ++i) {
      const auto id = static_cast<TokenId>(i);
      out << vocab.token(id) << ' ' << vocab.count(id) << ' ' << t.doc_freq(id) << '\n';
    }
  } else {
    out << "long_word_chars " << model.liwc.long_word_chars << '\n';
    out << "lexicon " << model.lexicon->entries().size() << '\n';
    for (const auto& e : model.lexicon->entries()) out << e.word << '\t' << e.category << '\t' << fmt17(e.weight) << '\n';
    out << "standardizer " << model.standardizer->mean.size() << '\n';
    write_row(out, model.standardizer->mean);
    write_row(out, model.standardizer->scale);
  }
  model.svm->write(out);
}

TrainedModel load_trained_model(std::istream& in) {
  LineReader r(in);
  if (r.next() != "moodtag-model 1") fail(Errc::ParseError, "not a version-1 moodtag model file");
  const std::string kind_name = r.field("kind");
  const auto kind = parse_model_kind(kind_name);
  if (!kind) fail(Errc::ParseError, "unknown model kind '" + kind_name + "'");
  TrainedModel m;
  m.kind = *kind;
  if (is_neural(m.kind)) {
    m.max_len = to_u64(r.field("max_len"));
    m.embeddings_fingerprint = r.field("embeddings");
    m.network = nn::load_model(in);
    if (static_cast<std::size_t>(nn::architecture(*m.network)) != static_cast<std::size_t>(m.kind))
      fail(Errc::ParseError, "network architecture disagrees with model kind");
    return m;
  }
  if (m.kind == ModelKind::SvmTfidf) {
    std::istringstream head(r.field("tfidf"));
    std::string docs_s, terms_s;
    head >> docs_s >> terms_s;
    const auto num_docs = to_u64(docs_s);
    const auto terms = to_u64(terms_s);
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts, df = {0, 0};
    for (std::uint64_t i = 0; i < terms; ++i) {
      std::istringstream row(r.next());
      std::string tok, c, d;
      if (!(row >> tok >> c >> d)) fail(Errc::ParseError, "bad tf-idf row");
      tokens.push_back(tok);
      counts.push_back(to_u64(c));
      df.push_back(to_u64(d));
    }
    m.tfidf = TfidfModel(Vocabulary(std::move(tokens), std::move(counts)), std::move(df), num_docs);
  } else {
    m.liwc.long_word_chars = to_u64(r.field("long_word_chars"));
    const auto n = to_u64(r.field("lexicon"));
    std::vector<LexiconEntry> entries;
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::string line = r.next();
      const auto t1 = line.find('\t');
      const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos) fail(Errc::ParseError, "bad lexicon row");
      entries.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                         std::strtod(line.c_str() + t2 + 1, nullptr)});
    }
    m.lexicon = CategoryLexicon(std::move(entries));
    const auto dim = to_u64(r.field("standardizer"));
    m.standardizer = Standardizer{r.numbers(dim), r.numbers(dim)};
  }
  m.svm = MulticlassSvm::read(in);
  return m;
}

void save_trained_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write model file " + path.string());
  save_trained_model(model, out);
  if (!out) fail(Errc::Io, "failed writing model file " + path.string());
}

TrainedModel load_trained_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open model file " + path.string());
  return load_trained_model(in);
}

}  // namespace moodtag

#include "moodtag/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "moodtag/error.hpp"

namespace moodtag {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

bool trainable(TokenId id) { return id >= Vocabulary::kFirstWord; }

std::vector<double> context_mean(std::span<const TokenId> context, const EmbeddingMatrix& emb) {
  if (context.empty()) fail(Errc::EmptyContext, "CBOW step needs at least one context word");
  std::vector<double> h(emb.dim(), 0.0);
  for (TokenId w : context) {
    if (w == Vocabulary::kPad) fail(Errc::InvalidArgument, "PAD cannot appear in a CBOW context");
    const auto row = emb.input_row(w);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (auto& v : h) v *= inv;
  return h;
}

}  // namespace

void CbowConfig::validate() const {
  if (window < 1) fail(Errc::InvalidArgument, "window must be >= 1");
  if (negatives < 1) fail(Errc::InvalidArgument, "negatives must be >= 1");
  if (dim < 1) fail(Errc::InvalidArgument, "dim must be >= 1");
  if (!(lr_end > 0.0) || lr_start < lr_end) fail(Errc::InvalidArgument, "require lr_start >= lr_end > 0");
  if (min_count < 1) fail(Errc::InvalidArgument, "min_count must be >= 1");
  if (subsample < 0.0) fail(Errc::InvalidArgument, "subsample must be >= 0");
}

EmbeddingMatrix::EmbeddingMatrix(Vocabulary vocab, std::size_t dim)
    : vocab_(std::move(vocab)), dim_(dim), input_(vocab_.size() * dim, 0.0), output_(vocab_.size() * dim, 0.0) {
  if (dim < 1) fail(Errc::InvalidArgument, "embedding dimension must be >= 1");
}

std::size_t EmbeddingMatrix::offset(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= rows())
    fail(Errc::InvalidArgument, "token index " + std::to_string(id) + " outside the embedding matrix");
  return static_cast<std::size_t>(id) * dim_;
}

EmbeddingMatrix init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingMatrix emb(vocab, dim);
  Rng rng(seed);
  const double half = 0.5 / static_cast<double>(dim);
  for (std::size_t r = Vocabulary::kFirstWord; r < emb.rows(); ++r) {
    for (auto& v : emb.input_row(static_cast<TokenId>(r))) v = rng.uniform(-half, half);
  }
  return emb;
}

// Unigram table

UnigramTable::UnigramTable(const Vocabulary& vocab, double power) : prob_(vocab.size(), 0.0) {
  if (vocab.word_count() == 0) fail(Errc::EmptyVocabulary, "unigram table needs at least one word");
  double total = 0.0;
  for (std::size_t i = Vocabulary::kFirstWord; i < vocab.size(); ++i) {
    prob_[i] = std::pow(static_cast<double>(vocab.count(static_cast<TokenId>(i))), power);
    total += prob_[i];
  }
  if (!(total > 0.0)) fail(Errc::EmptyVocabulary, "all vocabulary counts are zero");
  for (auto& p : prob_) p /= total;
  cdf_.resize(prob_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < prob_.size(); ++i) cdf_[i] = acc += prob_[i];
}

TokenId UnigramTable::sample(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin() + Vocabulary::kFirstWord, cdf_.end(), u);
  if (it == cdf_.end()) --it;
  // Skip zero-probability rows that share a cdf value with their predecessor.
  auto idx = static_cast<std::size_t>(it - cdf_.begin());
  while (prob_[idx] == 0.0 && idx + 1 < prob_.size()) ++idx;
  return static_cast<TokenId>(idx);
}

std::vector<TokenId> negative_sample(const UnigramTable& table, TokenId target, std::size_t k, Rng& rng) {
  std::vector<TokenId> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    TokenId s = table.sample(rng);
    for (int attempt = 1; attempt < 100 && s == target; ++attempt) s = table.sample(rng);
    out.push_back(s);
  }
  return out;
}

// CBOW objective

double cbow_loss(TokenId center, std::span<const TokenId> context, std::span<const TokenId> negatives,
                 const EmbeddingMatrix& emb) {
  const auto h = context_mean(context, emb);
  double loss = -log_sigmoid(dot(h, emb.output_row(center)));
  for (TokenId n : negatives) loss -= log_sigmoid(-dot(h, emb.output_row(n)));
  return loss;
}

CbowGradients cbow_gradients(TokenId center, std::span<const TokenId> context,
                             std::span<const TokenId> negatives, const EmbeddingMatrix& emb) {
  const std::size_t d = emb.dim();
  const auto h = context_mean(context, emb);
  std::vector<double> grad_h(d, 0.0);
  std::map<TokenId, std::vector<double>> out_grads;
  CbowGradients g;

  auto visit_output = [&](TokenId w, double score_grad) {
    const auto u = emb.output_row(w);
    auto& gu = out_grads.try_emplace(w, d, 0.0).first->second;
    for (std::size_t i = 0; i < d; ++i) {
      grad_h[i] += score_grad * u[i];
      gu[i] += score_grad * h[i];
    }
  };
  const double pos = dot(h, emb.output_row(center));
  g.loss = -log_sigmoid(pos);
  visit_output(center, sigmoid(pos) - 1.0);
  for (TokenId n : negatives) {
    const double s = dot(h, emb.output_row(n));
    g.loss -= log_sigmoid(-s);
    visit_output(n, sigmoid(s));
  }

  std::map<TokenId, double> multiplicity;
  for (TokenId w : context) multiplicity[w] += 1.0;
  const double inv = 1.0 / static_cast<double>(context.size());
  for (const auto& [w, m] : multiplicity) {
    std::vector<double> gv(d);
    for (std::size_t i = 0; i < d; ++i) gv[i] = grad_h[i] * m * inv;
    g.input.emplace_back(w, std::move(gv));
  }
  for (auto& [w, gu] : out_grads) g.output.emplace_back(w, std::move(gu));
  return g;
}

double cbow_update(TokenId center, std::span<const TokenId> context, std::span<const TokenId> negatives,
                   EmbeddingMatrix& emb, double lr) {
  const auto g = cbow_gradients(center, context, negatives, emb);
  for (const auto& [w, gu] : g.output) {
    auto row = emb.output_row(w);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] -= lr * gu[i];
  }
  for (const auto& [w, gv] : g.input) {
    if (!trainable(w)) continue;
    auto row = emb.input_row(w);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] -= lr * gv[i];
  }
  return g.loss;
}

double cbow_step(TokenId center, std::span<const TokenId> context, EmbeddingMatrix& emb,
                 const UnigramTable& table, std::size_t k, double lr, Rng& rng) {
  if (context.empty()) fail(Errc::EmptyContext, "CBOW step needs at least one context word");
  const auto negatives = negative_sample(table, center, k, rng);
  return cbow_update(center, context, negatives, emb, lr);
}

// Training

CbowResult train_cbow(const std::vector<std::vector<TokenId>>& corpus, const Vocabulary& vocab,
                      const CbowConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) fail(Errc::EmptyCorpus, "CBOW training corpus is empty");
  const TokenId limit = static_cast<TokenId>(vocab.size());
  for (const auto& doc : corpus) {
    for (TokenId t : doc) {
      if (t < 0 || t >= limit) fail(Errc::InvalidArgument, "token index outside the vocabulary");
    }
  }

  CbowResult result{init_embeddings(vocab, cfg.dim, cfg.seed), {}};
  if (cfg.epochs == 0) return result;
  EmbeddingMatrix& emb = result.embeddings;
  const UnigramTable table(vocab);
  Rng rng(cfg.seed, 1);

  std::uint64_t total_words = 0;
  for (std::size_t i = Vocabulary::kFirstWord; i < vocab.size(); ++i)
    total_words += vocab.count(static_cast<TokenId>(i));
  auto keep_probability = [&](TokenId w) {
    if (cfg.subsample <= 0.0) return 1.0;
    const double f = static_cast<double>(vocab.count(w));
    const double t = cfg.subsample * static_cast<double>(total_words);
    return std::min(1.0, (std::sqrt(f / t) + 1.0) * t / f);
  };

  // Positions with at least one trainable context word at full radius; the
  // learning rate decays linearly across epochs * positions steps.
  auto eligible_steps = [&]() {
    std::uint64_t n = 0;
    for (const auto& doc : corpus) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!trainable(doc[i])) continue;
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(doc.size(), i + cfg.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j != i && trainable(doc[j])) {
            ++n;
            break;
          }
        }
      }
    }
    return n;
  };
  const std::uint64_t total_steps = std::max<std::uint64_t>(1, eligible_steps() * cfg.epochs);
  std::uint64_t step = 0;

  std::vector<TokenId> sentence;
  std::vector<TokenId> context;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::uint64_t count = 0;
    for (const auto& doc : corpus) {
      sentence.clear();
      for (TokenId t : doc) {
        if (!trainable(t)) {
          // PAD/UNK keep their slot so window distances match the document.
          sentence.push_back(t);
        } else if (keep_probability(t) >= 1.0 || rng.uniform() < keep_probability(t)) {
          sentence.push_back(t);
        }
      }
      for (std::size_t i = 0; i < sentence.size(); ++i) {
        if (!trainable(sentence[i])) continue;
        std::size_t radius = cfg.window;
        if (cfg.shrink_window) radius = 1 + static_cast<std::size_t>(rng.below(cfg.window));
        context.clear();
        const std::size_t lo = i >= radius ? i - radius : 0;
        const std::size_t hi = std::min(sentence.size(), i + radius + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j != i && trainable(sentence[j])) context.push_back(sentence[j]);
        }
        if (context.empty()) continue;
        const double frac = static_cast<double>(std::min(step, total_steps - 1)) /
                            static_cast<double>(std::max<std::uint64_t>(1, total_steps - 1));
        const double lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
        loss_sum += cbow_step(sentence[i], context, emb, table, cfg.negatives, lr, rng);
        ++count;
        ++step;
      }
    }
    result.epoch_loss.push_back(count ? loss_sum / static_cast<double>(count) : 0.0);
  }
  return result;
}

// Queries

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(Errc::DimensionMismatch, "cosine of vectors with different lengths");
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) fail(Errc::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<std::pair<std::string, double>> nearest_neighbors(const std::string& word,
                                                              const EmbeddingMatrix& emb, std::size_t top_k) {
  const auto& vocab = emb.vocab();
  const auto query = vocab.find(word);
  if (!query) fail(Errc::UnknownWord, "'" + word + "' is not in the vocabulary");
  const auto q = emb.input_row(*query);
  std::vector<std::pair<double, TokenId>> scored;
  for (std::size_t r = Vocabulary::kFirstWord; r < emb.rows(); ++r) {
    const auto id = static_cast<TokenId>(r);
    if (id == *query) continue;
    const auto row = emb.input_row(id);
    const bool zero = std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; });
    scored.emplace_back(zero ? 0.0 : cosine_similarity(q, row), id);
  }
  const std::size_t k = std::min(top_k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(vocab.token(scored[i].second), scored[i].first);
  return out;
}

// Persistence

void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << emb.vocab().word_count() << ' ' << emb.dim() << '\n';
  char buf[64];
  for (std::size_t r = Vocabulary::kFirstWord; r < emb.rows(); ++r) {
    const auto id = static_cast<TokenId>(r);
    out << emb.vocab().token(id);
    for (double v : emb.input_row(id)) {
      std::snprintf(buf, sizeof buf, " %.6f", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(Errc::Io, "write failed for " + path.string());
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) fail(Errc::ParseError, "empty embedding file", 1);
  std::size_t words = 0, dim = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> words >> dim) || (hs >> extra) || dim == 0)
      fail(Errc::ParseError, "header must be '<words> <dim>'", lineno);
  }
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> rows;
  while (next_line()) {
    if (tokens.size() == words)
      fail(Errc::ParseError, "more rows than the header's " + std::to_string(words), lineno);
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::vector<double> row;
    std::string field;
    while (ls >> field) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size() || !std::isfinite(v))
        fail(Errc::ParseError, "bad value '" + field + "'", lineno);
      row.push_back(v);
    }
    if (row.size() != dim)
      fail(Errc::ParseError, "expected " + std::to_string(dim) + " values, found " + std::to_string(row.size()),
           lineno);
    tokens.push_back(tok);
    rows.push_back(std::move(row));
  }
  if (tokens.size() != words)
    fail(Errc::ParseError, "header declares " + std::to_string(words) + " rows, file has " +
                               std::to_string(tokens.size()), lineno + 1);
  Vocabulary vocab;
  try {
    vocab = Vocabulary(tokens, std::vector<std::uint64_t>(tokens.size(), 0));
  } catch (const Error& e) {
    fail(Errc::ParseError, e.what());
  }
  EmbeddingMatrix emb(std::move(vocab), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto dst = emb.input_row(static_cast<TokenId>(i + Vocabulary::kFirstWord));
    std::copy(rows[i].begin(), rows[i].end(), dst.begin());
  }
  return emb;
}

}  // namespace moodtag

#include "moodtag/nn/models.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "moodtag/error.hpp"

namespace moodtag::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->grad.fill(0.0);
}

void check_batch(const SequenceBatch& batch, std::size_t embed_dim, const char* what) {
  if (batch.inputs.rank() != 3 || batch.inputs.dim(2) != embed_dim)
    fail(Errc::DimensionMismatch, std::string(what) + " expects N x T x " + std::to_string(embed_dim) +
                                      " inputs, got " + batch.inputs.shape_string());
  if (batch.lengths.size() != batch.inputs.dim(0))
    fail(Errc::DimensionMismatch, std::string(what) + ": one length per sample required");
  for (auto len : batch.lengths) {
    if (len < 1 || len > batch.inputs.dim(1)) fail(Errc::DimensionMismatch, "sequence length out of range");
  }
}

}  // namespace

SequenceBatch embed_batch(std::span<const std::vector<TokenId>> docs, const EmbeddingMatrix& emb) {
  if (docs.empty()) fail(Errc::EmptyDataset, "cannot embed an empty batch");
  const std::size_t T = docs.front().size();
  const std::size_t D = emb.dim();
  if (T == 0) fail(Errc::InvalidArgument, "encoded documents must have positive length");
  SequenceBatch batch{Tensor({docs.size(), T, D}), std::vector<std::size_t>(docs.size(), 1)};
  for (std::size_t n = 0; n < docs.size(); ++n) {
    if (docs[n].size() != T) fail(Errc::DimensionMismatch, "encoded documents differ in length");
    std::size_t non_pad = 0;
    for (std::size_t t = 0; t < T; ++t) {
      const TokenId id = docs[n][t];
      if (id == Vocabulary::kPad) continue;
      ++non_pad;
      const auto row = emb.input_row(id);
      std::copy(row.begin(), row.end(), batch.inputs.data() + (n * T + t) * D);
    }
    batch.lengths[n] = std::max<std::size_t>(1, non_pad);
  }
  return batch;
}

// CNN

CnnClassifier::CnnClassifier(CnnConfig cfg, std::uint64_t seed) : config(std::move(cfg)) {
  if (config.widths.empty() || config.filters < 1 || config.embed_dim < 1)
    fail(Errc::InvalidArgument, "CNN needs at least one branch, filter and input dimension");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) fail(Errc::InvalidArgument, "dropout must lie in [0, 1)");
  Rng rng(seed);
  for (std::size_t b = 0; b < config.widths.size(); ++b) {
    if (config.widths[b] > config.max_len) fail(Errc::InputTooShort, "kernel wider than max_len");
    CnnBranch br{Conv1dLayer(config.widths[b], config.filters, config.embed_dim, "conv" + std::to_string(b)),
                 BatchNormLayer(config.filters, "norm" + std::to_string(b), config.bn_momentum, config.bn_eps)};
    br.conv.init(rng);
    branches.push_back(std::move(br));
  }
  head = DenseLayer(config.filters * config.widths.size(), kNumClasses, "head");
  head.init(rng);
}

std::vector<Parameter*> CnnClassifier::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : branches) {
    out.insert(out.end(), {&b.conv.weight, &b.conv.bias, &b.norm.gamma, &b.norm.beta});
  }
  out.insert(out.end(), {&head.weight, &head.bias});
  return out;
}

std::vector<const Parameter*> CnnClassifier::parameters() const {
  auto ps = const_cast<CnnClassifier*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

Tensor cnn_forward(const SequenceBatch& batch, CnnClassifier& model, Mode mode, std::uint64_t dropout_seed,
                   CnnCache* cache) {
  if (mode == Mode::Infer) return cnn_infer(batch, model);
  const auto& cfg = model.config;
  check_batch(batch, cfg.embed_dim, "cnn_forward");
  require_shape(batch.inputs, {batch.inputs.dim(0), cfg.max_len, cfg.embed_dim}, "cnn_forward input");
  const std::size_t N = batch.inputs.dim(0);
  const std::size_t F = cfg.filters;
  const std::size_t B = model.branches.size();

  CnnCache local;
  CnnCache& c = cache ? *cache : local;
  c.branches.assign(B, {});
  c.features = Tensor({N, B * F});
  for (std::size_t b = 0; b < B; ++b) {
    auto& br = model.branches[b];
    auto& bc = c.branches[b];
    bc.conv_out = conv1d_forward(batch.inputs, br.conv);
    if (cfg.order == BranchOrder::ConvTanhNorm) {
      bc.act = tanh_forward(bc.conv_out);
      bc.post = batchnorm_train(bc.act, br.norm, bc.norm);
    } else {
      bc.act = batchnorm_train(bc.conv_out, br.norm, bc.norm);
      bc.post = tanh_forward(bc.act);
    }
    bc.pool = global_max_pool(bc.post);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f) c.features.at(n, b * F + f) = bc.pool.output.at(n, f);
  }
  Rng rng(dropout_seed);
  c.head_in = dropout_forward(c.features, cfg.dropout, Mode::Train, rng, &c.dropout);
  if (cache) c.inputs = batch.inputs;
  return dense_forward(c.head_in, model.head);
}

Tensor cnn_infer(const SequenceBatch& batch, const CnnClassifier& model) {
  const auto& cfg = model.config;
  check_batch(batch, cfg.embed_dim, "cnn_infer");
  require_shape(batch.inputs, {batch.inputs.dim(0), cfg.max_len, cfg.embed_dim}, "cnn_infer input");
  const std::size_t N = batch.inputs.dim(0);
  const std::size_t F = cfg.filters;
  const std::size_t B = model.branches.size();
  Tensor features({N, B * F});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& br = model.branches[b];
    Tensor h = conv1d_forward(batch.inputs, br.conv);
    if (cfg.order == BranchOrder::ConvTanhNorm)
      h = batchnorm_infer(tanh_forward(h), br.norm);
    else
      h = tanh_forward(batchnorm_infer(h, br.norm));
    const auto pooled = global_max_pool(h);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f) features.at(n, b * F + f) = pooled.output.at(n, f);
  }
  return dense_forward(features, model.head);
}

void cnn_backward(CnnClassifier& model, const CnnCache& cache, const Tensor& grad_logits) {
  const std::size_t B = model.branches.size();
  const std::size_t F = model.config.filters;
  if (cache.branches.size() != B || cache.head_in.rank() != 2 || !grad_logits.same_shape(Tensor({cache.head_in.dim(0), kNumClasses})) ||
      cache.inputs.empty())
    fail(Errc::StaleCache, "CNN cache does not match this model or gradient");
  const std::size_t N = cache.head_in.dim(0);
  auto params = model.parameters();
  zero_grads(params);

  const Tensor d_head_in = dense_backward(cache.head_in, grad_logits, model.head);
  const Tensor d_features = dropout_backward(cache.dropout, d_head_in);
  for (std::size_t b = 0; b < B; ++b) {
    auto& br = model.branches[b];
    const auto& bc = cache.branches[b];
    Tensor d_pool({N, F});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f) d_pool.at(n, f) = d_features.at(n, b * F + f);
    const Tensor d_post = global_max_pool_backward(bc.pool, d_pool, bc.post.shape());
    Tensor d_conv;
    if (model.config.order == BranchOrder::ConvTanhNorm) {
      d_conv = tanh_backward(bc.act, batchnorm_backward(bc.norm, d_post, br.norm));
    } else {
      d_conv = batchnorm_backward(bc.norm, tanh_backward(bc.post, d_post), br.norm);
    }
    conv1d_backward(cache.inputs, d_conv, br.conv, nullptr);
  }
}

// Elman RNN

RnnClassifier::RnnClassifier(RecurrentConfig cfg, std::uint64_t seed)
    : config(cfg),
      w_x("rnn.w_x", {cfg.hidden, cfg.embed_dim}, true),
      w_h("rnn.w_h", {cfg.hidden, cfg.hidden}, true),
      b("rnn.b", {cfg.hidden}, false),
      head(cfg.hidden, kNumClasses, "head") {
  Rng rng(seed);
  const double limit = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  fill_uniform(w_x.value, limit, rng);
  fill_uniform(w_h.value, limit, rng);
  head.init(rng);
}

std::vector<Parameter*> RnnClassifier::parameters() { return {&w_x, &w_h, &b, &head.weight, &head.bias}; }

std::vector<const Parameter*> RnnClassifier::parameters() const { return {&w_x, &w_h, &b, &head.weight, &head.bias}; }

Tensor rnn_forward(const SequenceBatch& batch, const RnnClassifier& model, RnnCache* cache) {
  const std::size_t H = model.config.hidden, D = model.config.embed_dim;
  check_batch(batch, D, "rnn_forward");
  const std::size_t N = batch.inputs.dim(0), T = batch.inputs.dim(1);
  const ConstMatMap Wx(model.w_x.value.data(), ix(H), ix(D));
  const ConstMatMap Wh(model.w_h.value.data(), ix(H), ix(H));
  const ConstVecMap bias(model.b.value.data(), ix(H));
  Tensor last({N, H});
  if (cache) {
    cache->hidden.assign(N, {});
    cache->lengths = batch.lengths;
  }
  std::vector<double> hs;
  Eigen::VectorXd a(ix(H));
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t len = batch.lengths[n];
    hs.assign((len + 1) * H, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      const ConstVecMap x(batch.inputs.data() + (n * T + t) * D, ix(D));
      const ConstVecMap h_prev(hs.data() + t * H, ix(H));
      a.noalias() = Wx * x;
      a.noalias() += Wh * h_prev;
      a += bias;
      VecMap(hs.data() + (t + 1) * H, ix(H)) = a.array().tanh();
    }
    std::copy(hs.begin() + static_cast<std::ptrdiff_t>(len * H), hs.end(), last.data() + n * H);
    if (cache) cache->hidden[n] = hs;
  }
  if (cache) {
    cache->inputs = batch.inputs;
    cache->last = last;
  }
  return dense_forward(last, model.head);
}

void rnn_backward(RnnClassifier& model, const RnnCache& cache, const Tensor& grad_logits) {
  const std::size_t H = model.config.hidden, D = model.config.embed_dim;
  if (cache.inputs.empty() || cache.last.rank() != 2 || grad_logits.rank() != 2 ||
      grad_logits.dim(0) != cache.last.dim(0) || cache.hidden.size() != cache.last.dim(0))
    fail(Errc::StaleCache, "RNN cache does not match the gradient");
  auto params = model.parameters();
  zero_grads(params);
  const std::size_t N = cache.last.dim(0), T = cache.inputs.dim(1);
  const Tensor d_last = dense_backward(cache.last, grad_logits, model.head);
  const ConstMatMap Wh(model.w_h.value.data(), ix(H), ix(H));
  MatMap dWx(model.w_x.grad.data(), ix(H), ix(D));
  MatMap dWh(model.w_h.grad.data(), ix(H), ix(H));
  VecMap db(model.b.grad.data(), ix(H));
  Eigen::VectorXd dh(ix(H)), da(ix(H));
  for (std::size_t n = 0; n < N; ++n) {
    const auto& hs = cache.hidden[n];
    const std::size_t len = cache.lengths[n];
    dh = ConstVecMap(d_last.data() + n * H, ix(H));
    for (std::size_t t = len; t-- > 0;) {
      const ConstVecMap h(hs.data() + (t + 1) * H, ix(H));
      const ConstVecMap h_prev(hs.data() + t * H, ix(H));
      const ConstVecMap x(cache.inputs.data() + (n * T + t) * D, ix(D));
      da = dh.array() * (1.0 - h.array().square());
      dWx.noalias() += da * x.transpose();
      dWh.noalias() += da * h_prev.transpose();
      db += da;
      dh.noalias() = Wh.transpose() * da;
    }
  }
}

// LSTM

LstmClassifier::LstmClassifier(RecurrentConfig cfg, std::uint64_t seed)
    : config(cfg),
      w_x("lstm.w_x", {4 * cfg.hidden, cfg.embed_dim}, true),
      w_h("lstm.w_h", {4 * cfg.hidden, cfg.hidden}, true),
      b("lstm.b", {4 * cfg.hidden}, false),
      head(cfg.hidden, kNumClasses, "head") {
  Rng rng(seed);
  const double limit = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  fill_uniform(w_x.value, limit, rng);
  fill_uniform(w_h.value, limit, rng);
  for (std::size_t k = cfg.hidden; k < 2 * cfg.hidden; ++k) b.value[k] = 1.0;
  head.init(rng);
}

std::vector<Parameter*> LstmClassifier::parameters() { return {&w_x, &w_h, &b, &head.weight, &head.bias}; }

std::vector<const Parameter*> LstmClassifier::parameters() const { return {&w_x, &w_h, &b, &head.weight, &head.bias}; }

Tensor lstm_forward(const SequenceBatch& batch, const LstmClassifier& model, LstmCache* cache) {
  const std::size_t H = model.config.hidden, D = model.config.embed_dim;
  check_batch(batch, D, "lstm_forward");
  const std::size_t N = batch.inputs.dim(0), T = batch.inputs.dim(1);
  const ConstMatMap Wx(model.w_x.value.data(), ix(4 * H), ix(D));
  const ConstMatMap Wh(model.w_h.value.data(), ix(4 * H), ix(H));
  const ConstVecMap bias(model.b.value.data(), ix(4 * H));
  Tensor last({N, H});
  if (cache) {
    cache->gates.assign(N, {});
    cache->cell.assign(N, {});
    cache->cell_tanh.assign(N, {});
    cache->hidden.assign(N, {});
    cache->lengths = batch.lengths;
  }
  std::vector<double> gates, cs, cts, hs;
  Eigen::VectorXd z(ix(4 * H));
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t len = batch.lengths[n];
    gates.assign(len * 4 * H, 0.0);
    cs.assign((len + 1) * H, 0.0);
    cts.assign((len + 1) * H, 0.0);
    hs.assign((len + 1) * H, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      const ConstVecMap x(batch.inputs.data() + (n * T + t) * D, ix(D));
      const ConstVecMap h_prev(hs.data() + t * H, ix(H));
      z.noalias() = Wx * x;
      z.noalias() += Wh * h_prev;
      z += bias;
      double* g = gates.data() + t * 4 * H;
      for (std::size_t k = 0; k < 3 * H; ++k) g[k] = sigmoid(z[ix(k)]);
      for (std::size_t k = 3 * H; k < 4 * H; ++k) g[k] = std::tanh(z[ix(k)]);
      for (std::size_t k = 0; k < H; ++k) {
        const double c = g[H + k] * cs[t * H + k] + g[k] * g[3 * H + k];
        cs[(t + 1) * H + k] = c;
        cts[(t + 1) * H + k] = std::tanh(c);
        hs[(t + 1) * H + k] = g[2 * H + k] * cts[(t + 1) * H + k];
      }
    }
    std::copy(hs.begin() + static_cast<std::ptrdiff_t>(len * H), hs.end(), last.data() + n * H);
    if (cache) {
      cache->gates[n] = gates;
      cache->cell[n] = cs;
      cache->cell_tanh[n] = cts;
      cache->hidden[n] = hs;
    }
  }
  if (cache) {
    cache->inputs = batch.inputs;
    cache->last = last;
  }
  return dense_forward(last, model.head);
}

void lstm_backward(LstmClassifier& model, const LstmCache& cache, const Tensor& grad_logits) {
  const std::size_t H = model.config.hidden, D = model.config.embed_dim;
  if (cache.inputs.empty() || cache.last.rank() != 2 || grad_logits.rank() != 2 ||
      grad_logits.dim(0) != cache.last.dim(0) || cache.hidden.size() != cache.last.dim(0))
    fail(Errc::StaleCache, "LSTM cache does not match the gradient");
  auto params = model.parameters();
  zero_grads(params);
  const std::size_t N = cache.last.dim(0), T = cache.inputs.dim(1);
  const Tensor d_last = dense_backward(cache.last, grad_logits, model.head);
  const ConstMatMap Wh(model.w_h.value.data(), ix(4 * H), ix(H));
  MatMap dWx(model.w_x.grad.data(), ix(4 * H), ix(D));
  MatMap dWh(model.w_h.grad.data(), ix(4 * H), ix(H));
  VecMap db(model.b.grad.data(), ix(4 * H));
  Eigen::VectorXd dh(ix(H)), dc(ix(H)), dz(ix(4 * H));
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t len = cache.lengths[n];
    const auto& gates = cache.gates[n];
    const auto& cs = cache.cell[n];
    const auto& cts = cache.cell_tanh[n];
    const auto& hs = cache.hidden[n];
    dh = ConstVecMap(d_last.data() + n * H, ix(H));
    dc.setZero();
    for (std::size_t t = len; t-- > 0;) {
      const double* g = gates.data() + t * 4 * H;
      for (std::size_t k = 0; k < H; ++k) {
        const double i = g[k], f = g[H + k], o = g[2 * H + k], cand = g[3 * H + k];
        const double ct = cts[(t + 1) * H + k];
        const double dck = dc[ix(k)] + dh[ix(k)] * o * (1.0 - ct * ct);
        dz[ix(k)] = dck * cand * i * (1.0 - i);
        dz[ix(H + k)] = dck * cs[t * H + k] * f * (1.0 - f);
        dz[ix(2 * H + k)] = dh[ix(k)] * ct * o * (1.0 - o);
        dz[ix(3 * H + k)] = dck * i * (1.0 - cand * cand);
        dc[ix(k)] = dck * f;
      }
      const ConstVecMap x(cache.inputs.data() + (n * T + t) * D, ix(D));
      const ConstVecMap h_prev(hs.data() + t * H, ix(H));
      dWx.noalias() += dz * x.transpose();
      dWh.noalias() += dz * h_prev.transpose();
      db += dz;
      dh.noalias() = Wh.transpose() * dz;
    }
  }
}

// Shared surface

std::string_view architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::Cnn: return "cnn";
    case Architecture::Rnn: return "rnn";
    case Architecture::Lstm: return "lstm";
  }
  return "?";
}

std::optional<Architecture> parse_architecture(std::string_view name) {
  if (name == "cnn") return Architecture::Cnn;
  if (name == "rnn") return Architecture::Rnn;
  if (name == "lstm") return Architecture::Lstm;
  return std::nullopt;
}

Architecture architecture(const NeuralModel& model) { return static_cast<Architecture>(model.index()); }

std::vector<Parameter*> parameters(NeuralModel& model) {
  return std::visit([](auto& m) { return m.parameters(); }, model);
}

std::size_t input_dim(const NeuralModel& model) {
  return std::visit([](const auto& m) { return m.config.embed_dim; }, model);
}

Tensor infer_logits(const NeuralModel& model, const SequenceBatch& batch) {
  switch (model.index()) {
    case 0: return cnn_infer(batch, std::get<CnnClassifier>(model));
    case 1: return rnn_forward(batch, std::get<RnnClassifier>(model), nullptr);
    default: return lstm_forward(batch, std::get<LstmClassifier>(model), nullptr);
  }
}

// Persistence

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_values(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << fmt17(values[i]);
  out << '\n';
}

void write_tensor(std::ostream& out, const Parameter& p) {
  out << "tensor " << p.name << ' ' << p.value.rank();
  for (auto d : p.value.shape()) out << ' ' << d;
  out << '\n';
  write_values(out, p.value.values());
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string s;
    while (std::getline(in_, s)) {
      ++lineno_;
      if (!s.empty() && s.back() == '\r') s.pop_back();
      if (!s.empty()) return s;
    }
    fail(Errc::ParseError, "unexpected end of model file", lineno_);
  }

  std::vector<double> values(std::size_t n) {
    std::istringstream ss(line());
    std::vector<double> out;
    out.reserve(n);
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) fail(Errc::ParseError, "bad number '" + tok + "'", lineno_);
      out.push_back(v);
    }
    if (out.size() != n)
      fail(Errc::ParseError, "expected " + std::to_string(n) + " values, got " + std::to_string(out.size()), lineno_);
    return out;
  }

  void tensor_into(Parameter& p) {
    std::istringstream ss(line());
    std::string kw, name;
    std::size_t rank = 0;
    ss >> kw >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) ss >> d;
    if (kw != "tensor" || name != p.name || shape != p.value.shape())
      fail(Errc::ParseError, "expected tensor " + p.name + " " + p.value.shape_string(), lineno_);
    auto v = values(p.value.size());
    std::copy(v.begin(), v.end(), p.value.data());
  }

  void buffer_into(const std::string& name, std::vector<double>& dst) {
    std::istringstream ss(line());
    std::string kw, got;
    std::size_t n = 0;
    ss >> kw >> got >> n;
    if (kw != "buffer" || got != name || n != dst.size())
      fail(Errc::ParseError, "expected buffer " + name, lineno_);
    dst = values(n);
  }

  std::size_t lineno() const { return lineno_; }

 private:
  std::istream& in_;
  std::size_t lineno_ = 0;
};

std::map<std::string, std::string> read_config(Reader& r, std::size_t count) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string s = r.line();
    const auto sp = s.find(' ');
    if (sp == std::string::npos) fail(Errc::ParseError, "config line needs 'key value'", r.lineno());
    kv[s.substr(0, sp)] = s.substr(sp + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(Errc::ParseError, "model config lacks '" + key + "'");
  return it->second;
}

std::size_t need_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  return static_cast<std::size_t>(std::stoull(need(kv, key)));
}

double need_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  return std::strtod(need(kv, key).c_str(), nullptr);
}

}  // namespace

void save_model(const NeuralModel& model, std::ostream& out) {
  out << "moodtag-nn 1\narch " << architecture_name(architecture(model)) << '\n';
  if (const auto* cnn = std::get_if<CnnClassifier>(&model)) {
    const auto& c = cnn->config;
    std::string widths;
    for (std::size_t i = 0; i < c.widths.size(); ++i) widths += (i ? "," : "") + std::to_string(c.widths[i]);
    out << "config 8\n"
        << "max_len " << c.max_len << "\nembed_dim " << c.embed_dim << "\nfilters " << c.filters << "\nwidths "
        << widths << "\ndropout " << fmt17(c.dropout) << "\nbn_momentum " << fmt17(c.bn_momentum) << "\nbn_eps "
        << fmt17(c.bn_eps) << "\norder " << (c.order == BranchOrder::ConvTanhNorm ? "conv-tanh-norm" : "conv-norm-tanh")
        << '\n';
    for (const Parameter* p : cnn->parameters()) write_tensor(out, *p);
    for (std::size_t b = 0; b < cnn->branches.size(); ++b) {
      const auto& norm = cnn->branches[b].norm;
      out << "buffer norm" << b << ".running_mean " << norm.channels << '\n';
      write_values(out, norm.running_mean);
      out << "buffer norm" << b << ".running_var " << norm.channels << '\n';
      write_values(out, norm.running_var);
    }
  } else {
    const auto& c = std::visit([](const auto& m) -> const RecurrentConfig& {
      if constexpr (std::is_same_v<std::decay_t<decltype(m)>, CnnClassifier>) {
        static const RecurrentConfig none;
        return none;
      } else {
        return m.config;
      }
    }, model);
    out << "config 2\nembed_dim " << c.embed_dim << "\nhidden " << c.hidden << '\n';
    const auto params = std::visit([](const auto& m) { return m.parameters(); }, model);
    for (const Parameter* p : params) write_tensor(out, *p);
  }
  out << "end\n";
}

NeuralModel load_model(std::istream& in) {
  Reader r(in);
  if (r.line() != "moodtag-nn 1") fail(Errc::ParseError, "not a version-1 neural model", r.lineno());
  const std::string arch_line = r.line();
  if (arch_line.rfind("arch ", 0) != 0) fail(Errc::ParseError, "missing arch line", r.lineno());
  const auto arch = parse_architecture(arch_line.substr(5));
  if (!arch) fail(Errc::ParseError, "unknown architecture '" + arch_line.substr(5) + "'", r.lineno());
  const std::string cfg_line = r.line();
  if (cfg_line.rfind("config ", 0) != 0) fail(Errc::ParseError, "missing config count", r.lineno());
  const auto kv = read_config(r, static_cast<std::size_t>(std::stoull(cfg_line.substr(7))));

  NeuralModel model;
  try {
    if (*arch == Architecture::Cnn) {
      CnnConfig c;
      c.max_len = need_size(kv, "max_len");
      c.embed_dim = need_size(kv, "embed_dim");
      c.filters = need_size(kv, "filters");
      c.widths.clear();
      std::stringstream ws(need(kv, "widths"));
      std::string w;
      while (std::getline(ws, w, ',')) c.widths.push_back(static_cast<std::size_t>(std::stoull(w)));
      c.dropout = need_double(kv, "dropout");
      c.bn_momentum = need_double(kv, "bn_momentum");
      c.bn_eps = need_double(kv, "bn_eps");
      const auto& order = need(kv, "order");
      if (order == "conv-tanh-norm")
        c.order = BranchOrder::ConvTanhNorm;
      else if (order == "conv-norm-tanh")
        c.order = BranchOrder::ConvNormTanh;
      else
        fail(Errc::ParseError, "unknown branch order '" + order + "'");
      model = CnnClassifier(c, 0);
    } else {
      RecurrentConfig c;
      c.embed_dim = need_size(kv, "embed_dim");
      c.hidden = need_size(kv, "hidden");
      if (*arch == Architecture::Rnn)
        model = RnnClassifier(c, 0);
      else
        model = LstmClassifier(c, 0);
    }
  } catch (const std::invalid_argument&) {
    fail(Errc::ParseError, "non-numeric model config value");
  } catch (const std::out_of_range&) {
    fail(Errc::ParseError, "model config value out of range");
  }
  for (Parameter* p : parameters(model)) r.tensor_into(*p);
  if (auto* cnn = std::get_if<CnnClassifier>(&model)) {
    for (std::size_t b = 0; b < cnn->branches.size(); ++b) {
      auto& norm = cnn->branches[b].norm;
      r.buffer_into("norm" + std::to_string(b) + ".running_mean", norm.running_mean);
      r.buffer_into("norm" + std::to_string(b) + ".running_var", norm.running_var);
    }
  }
  if (r.line() != "end") fail(Errc::ParseError, "missing end marker", r.lineno());
  return model;
}

}  // namespace moodtag::nn

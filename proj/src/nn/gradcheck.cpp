#include "moodtag/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moodtag/embeddings.hpp"
#include "moodtag/error.hpp"
#include "moodtag/nn/models.hpp"

namespace moodtag::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

double check_tensor(std::span<double> values, std::span<const double> analytic, const std::function<double()>& loss,
                    const GradCheckOptions& opts, Rng& rng) {
  if (values.size() != analytic.size()) fail(Errc::DimensionMismatch, "gradient and tensor sizes differ");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (idx.size() > opts.max_entries) {
    // Partial Fisher-Yates: the first max_entries slots become the sample.
    for (std::size_t i = 0; i < opts.max_entries; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(opts.max_entries);
  }
  double worst = 0.0;
  for (std::size_t i : idx) {
    const double saved = values[i];
    values[i] = saved + opts.epsilon;
    const double up = loss();
    values[i] = saved - opts.epsilon;
    const double down = loss();
    values[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) fail(Errc::NonFiniteLoss, "loss is not finite during gradient check");
    const double numeric = (up - down) / (2.0 * opts.epsilon);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Appends one entry per tensor for a component.
struct Collector {
  std::vector<GradCheckEntry>& out;
  const GradCheckOptions& opts;
  Rng& rng;
  std::string component;
  double threshold;

  void operator()(const std::string& name, std::span<double> values, std::span<const double> analytic,
                  const std::function<double()>& loss) {
    out.push_back({component, name, check_tensor(values, analytic, loss, opts, rng), threshold});
  }
  void operator()(Parameter& p, const std::function<double()>& loss) {
    const std::vector<double> analytic(p.grad.values().begin(), p.grad.values().end());
    (*this)(p.name, p.value.values(), analytic, loss);
  }
};

std::vector<std::size_t> random_labels(std::size_t n, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = static_cast<std::size_t>(rng.below(kNumClasses));
  return labels;
}

}  // namespace

std::vector<GradCheckEntry> check_layers(const GradCheckOptions& opts) {
  std::vector<GradCheckEntry> out;
  Rng rng(opts.seed, 11);

  {
    Collector c{out, opts, rng, "conv1d", opts.layer_threshold};
    Conv1dLayer layer(3, 2, 3, "conv");
    layer.init(rng);
    for (double& b : layer.bias.value.values()) b = rng.normal();
    Tensor x = random_tensor({2, 6, 3}, rng);
    const Tensor r = random_tensor({2, 4, 2}, rng);
    auto loss = [&] { return dot(r, conv1d_forward(x, layer)); };
    Tensor gx;
    conv1d_backward(x, r, layer, &gx);
    c("input", x.values(), gx.values(), loss);
    c(layer.weight, loss);
    c(layer.bias, loss);
  }
  {
    Collector c{out, opts, rng, "tanh", opts.layer_threshold};
    Tensor x = random_tensor({3, 5}, rng);
    const Tensor r = random_tensor({3, 5}, rng);
    auto loss = [&] { return dot(r, tanh_forward(x)); };
    const Tensor gx = tanh_backward(tanh_forward(x), r);
    c("input", x.values(), gx.values(), loss);
  }
  {
    Collector c{out, opts, rng, "batchnorm", opts.layer_threshold};
    BatchNormLayer layer(3, "norm");
    for (double& g : layer.gamma.value.values()) g = 1.0 + 0.5 * rng.normal();
    for (double& b : layer.beta.value.values()) b = rng.normal();
    Tensor x = random_tensor({2, 4, 3}, rng);
    const Tensor r = random_tensor({2, 4, 3}, rng);
    auto loss = [&] {
      BatchNormLayer scratch = layer;
      BatchNormCache cache;
      return dot(r, batchnorm_train(x, scratch, cache));
    };
    BatchNormCache cache;
    BatchNormLayer scratch = layer;
    batchnorm_train(x, scratch, cache);
    const Tensor gx = batchnorm_backward(cache, r, scratch);
    layer.gamma.grad = scratch.gamma.grad;
    layer.beta.grad = scratch.beta.grad;
    c("input", x.values(), gx.values(), loss);
    c(layer.gamma, loss);
    c(layer.beta, loss);
  }
  {
    Collector c{out, opts, rng, "maxpool", opts.layer_threshold};
    Tensor x = random_tensor({2, 5, 3}, rng);
    const Tensor r = random_tensor({2, 3}, rng);
    auto loss = [&] { return dot(r, global_max_pool(x).output); };
    const Tensor gx = global_max_pool_backward(global_max_pool(x), r, x.shape());
    c("input", x.values(), gx.values(), loss);
  }
  {
    Collector c{out, opts, rng, "dropout", opts.layer_threshold};
    Tensor x = random_tensor({4, 6}, rng);
    const Tensor r = random_tensor({4, 6}, rng);
    const std::uint64_t mask_seed = rng.next();
    auto loss = [&] {
      Rng mask_rng(mask_seed);
      return dot(r, dropout_forward(x, 0.5, Mode::Train, mask_rng, nullptr));
    };
    Rng mask_rng(mask_seed);
    DropoutMask mask;
    dropout_forward(x, 0.5, Mode::Train, mask_rng, &mask);
    const Tensor gx = dropout_backward(mask, r);
    c("input", x.values(), gx.values(), loss);
  }
  {
    Collector c{out, opts, rng, "dense", opts.layer_threshold};
    DenseLayer layer(4, 3, "dense");
    layer.init(rng);
    for (double& b : layer.bias.value.values()) b = rng.normal();
    Tensor x = random_tensor({3, 4}, rng);
    const Tensor r = random_tensor({3, 3}, rng);
    auto loss = [&] { return dot(r, dense_forward(x, layer)); };
    const Tensor gx = dense_backward(x, r, layer);
    c("input", x.values(), gx.values(), loss);
    c(layer.weight, loss);
    c(layer.bias, loss);
  }
  {
    Collector c{out, opts, rng, "softmax_ce", opts.layer_threshold};
    Tensor logits = random_tensor({3, kNumClasses}, rng, 2.0);
    const auto labels = random_labels(3, rng);
    auto loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
    const Tensor g = softmax_cross_entropy(logits, labels).grad_logits;
    c("logits", logits.values(), g.values(), loss);
  }
  return out;
}

std::vector<GradCheckEntry> check_cnn(const GradCheckOptions& opts) {
  std::vector<GradCheckEntry> out;
  Rng rng(opts.seed, 12);
  CnnConfig cfg;
  cfg.max_len = 7;
  cfg.embed_dim = 5;
  cfg.filters = 3;
  cfg.widths = {2, 3};
  CnnClassifier model(cfg, opts.seed);
  for (auto& br : model.branches) {
    for (double& g : br.norm.gamma.value.values()) g = 1.0 + 0.3 * rng.normal();
    for (double& b : br.norm.beta.value.values()) b = 0.3 * rng.normal();
    for (double& b : br.conv.bias.value.values()) b = 0.3 * rng.normal();
  }
  SequenceBatch batch{random_tensor({2, 7, 5}, rng), {7, 7}};
  const auto labels = random_labels(2, rng);
  const std::uint64_t dropout_seed = rng.next();

  auto loss = [&] {
    Tensor logits = cnn_forward(batch, model, Mode::Train, dropout_seed, nullptr);
    return softmax_cross_entropy(logits, labels).loss;
  };
  CnnCache cache;
  const Tensor logits = cnn_forward(batch, model, Mode::Train, dropout_seed, &cache);
  cnn_backward(model, cache, softmax_cross_entropy(logits, labels).grad_logits);

  Collector c{out, opts, rng, "cnn", opts.model_threshold};
  for (Parameter* p : model.parameters()) c(*p, loss);
  return out;
}

namespace {

template <class Model, class Cache, class Forward, class Backward>
std::vector<GradCheckEntry> check_recurrent(const GradCheckOptions& opts, const char* component, std::uint64_t stream,
                                            Forward forward, Backward backward) {
  std::vector<GradCheckEntry> out;
  Rng rng(opts.seed, stream);
  Model model(RecurrentConfig{4, 3}, opts.seed);
  for (double& b : model.b.value.values()) b += 0.3 * rng.normal();
  for (double& w : model.w_h.value.values()) w *= 2.0;
  SequenceBatch batch{random_tensor({2, 5, 4}, rng), {5, 3}};
  const auto labels = random_labels(2, rng);

  auto loss = [&] { return softmax_cross_entropy(forward(batch, model, nullptr), labels).loss; };
  Cache cache;
  const Tensor logits = forward(batch, model, &cache);
  backward(model, cache, softmax_cross_entropy(logits, labels).grad_logits);

  Collector c{out, opts, rng, component, opts.model_threshold};
  for (Parameter* p : model.parameters()) c(*p, loss);
  return out;
}

}  // namespace

std::vector<GradCheckEntry> check_rnn(const GradCheckOptions& opts) {
  return check_recurrent<RnnClassifier, RnnCache>(
      opts, "rnn", 13, [](const SequenceBatch& b, const RnnClassifier& m, RnnCache* c) { return rnn_forward(b, m, c); },
      [](RnnClassifier& m, const RnnCache& c, const Tensor& g) { rnn_backward(m, c, g); });
}

std::vector<GradCheckEntry> check_lstm(const GradCheckOptions& opts) {
  return check_recurrent<LstmClassifier, LstmCache>(
      opts, "lstm", 14,
      [](const SequenceBatch& b, const LstmClassifier& m, LstmCache* c) { return lstm_forward(b, m, c); },
      [](LstmClassifier& m, const LstmCache& c, const Tensor& g) { lstm_backward(m, c, g); });
}

std::vector<GradCheckEntry> check_cbow(const GradCheckOptions& opts) {
  std::vector<GradCheckEntry> out;
  Rng rng(opts.seed, 15);
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  for (int i = 0; i < 8; ++i) {
    words.push_back("w" + std::to_string(i));
    counts.push_back(static_cast<std::uint64_t>(10 - i));
  }
  const Vocabulary vocab(words, counts);
  EmbeddingMatrix emb(vocab, 6);
  for (double& v : emb.input()) v = 0.5 * rng.normal();
  for (double& v : emb.output()) v = 0.5 * rng.normal();
  // Reserved rows stay zero as in training.
  for (TokenId id : {Vocabulary::kPad, Vocabulary::kUnk}) {
    std::ranges::fill(emb.input_row(id), 0.0);
    std::ranges::fill(emb.output_row(id), 0.0);
  }
  const TokenId center = 3;
  const std::vector<TokenId> context = {2, 4, 5, 4};
  const std::vector<TokenId> negatives = {6, 7, 9};

  auto loss = [&] { return cbow_loss(center, context, negatives, emb); };
  const auto grads = cbow_gradients(center, context, negatives, emb);

  Collector c{out, opts, rng, "cbow", opts.model_threshold};
  auto check_group = [&](const std::string& name, const auto& pairs, bool input) {
    std::vector<double> values, analytic;
    std::vector<std::pair<TokenId, std::size_t>> where;
    for (const auto& [row, g] : pairs) {
      auto span = input ? emb.input_row(row) : emb.output_row(row);
      for (std::size_t j = 0; j < g.size(); ++j) analytic.push_back(g[j]);
      values.insert(values.end(), span.begin(), span.end());
      where.emplace_back(row, g.size());
    }
    // Perturb a flat copy and write it back into the matrix before each evaluation.
    auto flat_loss = [&] {
      std::size_t k = 0;
      for (const auto& [row, n] : where) {
        auto span = input ? emb.input_row(row) : emb.output_row(row);
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k), n, span.begin());
        k += n;
      }
      return loss();
    };
    c(name, values, analytic, flat_loss);
    flat_loss();
  };
  check_group("input_vectors", grads.input, true);
  check_group("output_vectors", grads.output, false);
  return out;
}

std::vector<GradCheckEntry> run_gradcheck(std::string_view target, const GradCheckOptions& opts) {
  std::vector<GradCheckEntry> out;
  auto append = [&](std::vector<GradCheckEntry> part) { out.insert(out.end(), part.begin(), part.end()); };
  const bool all = target == "all";
  bool matched = all;
  if (all || target == "layers") append(check_layers(opts)), matched = true;
  if (all || target == "cnn") append(check_cnn(opts)), matched = true;
  if (all || target == "rnn") append(check_rnn(opts)), matched = true;
  if (all || target == "lstm") append(check_lstm(opts)), matched = true;
  if (all || target == "cbow") append(check_cbow(opts)), matched = true;
  if (!matched) fail(Errc::InvalidArgument, "unknown gradcheck target '" + std::string(target) + "'");
  return out;
}

}  // namespace moodtag::nn

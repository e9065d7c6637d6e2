#include "moodtag/nn/train.hpp"

#include <cmath>
#include <numeric>

#include "moodtag/error.hpp"

namespace moodtag::nn {

AdamState::AdamState(std::span<Parameter* const> params, AdamConfig cfg) : config(cfg) {
  for (const Parameter* p : params) {
    m.emplace_back(p->value.size(), 0.0);
    v.emplace_back(p->value.size(), 0.0);
  }
}

void adam_update(std::span<Parameter* const> params, AdamState& state) {
  if (params.size() != state.m.size()) fail(Errc::DimensionMismatch, "Adam state built for a different parameter set");
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.value.size()) fail(Errc::DimensionMismatch, "Adam moment shape differs for " + p.name);
    const double l2 = p.decay ? c.l2 : 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad[i] + l2 * p.value[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      p.value[i] -= c.lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + c.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) fail(Errc::InvalidArgument, "batch_size must be at least 1");
  if (!(lr >= 0.0) || !(l2 >= 0.0)) fail(Errc::InvalidArgument, "lr and l2 must be non-negative");
  if (!(clip > 0.0)) fail(Errc::InvalidArgument, "clip must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
    fail(Errc::InvalidArgument, "Adam betas must lie in [0, 1) and eps must be positive");
}

double l2_penalty(std::span<Parameter* const> params, double l2) {
  double sum = 0.0;
  for (const Parameter* p : params) {
    if (!p->decay) continue;
    for (double w : p->value.values()) sum += w * w;
  }
  return 0.5 * l2 * sum;
}

namespace {

// Forward in train mode and backward for one batch; returns the loss and
// fills `correct`.
double train_batch(NeuralModel& model, const SequenceBatch& batch, std::span<const std::size_t> labels,
                   std::uint64_t dropout_seed, std::size_t& correct) {
  Tensor logits;
  SoftmaxLoss sl;
  auto score = [&] {
    sl = softmax_cross_entropy(logits, labels);
    for (std::size_t n = 0; n < labels.size(); ++n) {
      const std::span<const double> row(logits.data() + n * kNumClasses, kNumClasses);
      if (code(argmax_label(row)) == labels[n]) ++correct;
    }
  };
  if (auto* cnn = std::get_if<CnnClassifier>(&model)) {
    CnnCache cache;
    logits = cnn_forward(batch, *cnn, Mode::Train, dropout_seed, &cache);
    score();
    cnn_backward(*cnn, cache, sl.grad_logits);
  } else if (auto* rnn = std::get_if<RnnClassifier>(&model)) {
    RnnCache cache;
    logits = rnn_forward(batch, *rnn, &cache);
    score();
    rnn_backward(*rnn, cache, sl.grad_logits);
  } else {
    auto& lstm = std::get<LstmClassifier>(model);
    LstmCache cache;
    logits = lstm_forward(batch, lstm, &cache);
    score();
    lstm_backward(lstm, cache, sl.grad_logits);
  }
  return sl.loss;
}

}  // namespace

std::vector<EpochStats> fit(NeuralModel& model, const EncodedSet& data, const EmbeddingMatrix& emb,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) fail(Errc::EmptyDataset, "no training documents");
  if (data.labels.size() != data.size()) fail(Errc::LengthMismatch, "one label per document required");
  if (emb.dim() != input_dim(model))
    fail(Errc::DimensionMismatch, "embedding dimension " + std::to_string(emb.dim()) + " does not match model input " +
                                      std::to_string(input_dim(model)));
  for (auto l : data.labels) {
    if (l >= kNumClasses) fail(Errc::UnknownLabel, "label code " + std::to_string(l));
  }

  auto params = parameters(model);
  AdamState adam(params, AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.l2});
  const bool recurrent = architecture(model) != Architecture::Cnn;
  Rng order_rng(cfg.seed, 0);
  Rng dropout_rng(cfg.seed, 2);

  std::vector<std::size_t> order(data.size());
  std::vector<EpochStats> history;
  std::vector<std::vector<TokenId>> batch_docs;
  std::vector<std::size_t> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_docs.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_docs.push_back(data.docs[order[i]]);
        batch_labels.push_back(data.labels[order[i]]);
      }
      const SequenceBatch batch = embed_batch(batch_docs, emb);
      const double ce = train_batch(model, batch, batch_labels, dropout_rng.next(), correct);
      const double loss = ce + l2_penalty(params, cfg.l2);
      if (!std::isfinite(loss))
        fail(Errc::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch + 1));
      loss_sum += loss * static_cast<double>(end - start);
      if (recurrent) clip_global_norm(params, cfg.clip);
      adam_update(params, adam);
    }
    const double n = static_cast<double>(data.size());
    history.push_back({loss_sum / n, static_cast<double>(correct) / n});
  }
  return history;
}

Predictions predict(const NeuralModel& model, std::span<const std::vector<TokenId>> docs, const EmbeddingMatrix& emb,
                    std::size_t batch_size) {
  if (batch_size < 1) fail(Errc::InvalidArgument, "batch_size must be at least 1");
  Predictions out;
  for (std::size_t start = 0; start < docs.size(); start += batch_size) {
    const std::size_t end = std::min(docs.size(), start + batch_size);
    const SequenceBatch batch = embed_batch(docs.subspan(start, end - start), emb);
    const Tensor logits = infer_logits(model, batch);
    const Tensor probs = softmax(logits);
    for (std::size_t n = 0; n < end - start; ++n) {
      std::array<double, kNumClasses> row{};
      std::copy_n(probs.data() + n * kNumClasses, kNumClasses, row.begin());
      out.probs.push_back(row);
      out.labels.push_back(argmax_label(std::span<const double>(logits.data() + n * kNumClasses, kNumClasses)));
    }
  }
  return out;
}

}  // namespace moodtag::nn

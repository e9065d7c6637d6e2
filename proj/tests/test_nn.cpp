#include "doctest.h"

#include <cmath>
#include <sstream>

#include "moodtag/error.hpp"
#include "moodtag/nn/gradcheck.hpp"
#include "moodtag/nn/layers.hpp"
#include "moodtag/nn/models.hpp"
#include "moodtag/nn/train.hpp"

using namespace moodtag;
using namespace moodtag::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

// Random embeddings plus documents whose class is marked by one token.
struct ToyTask {
  EmbeddingMatrix emb;
  EncodedSet data;
};

ToyTask toy_task(std::size_t docs, std::size_t len, std::size_t dim, std::uint64_t seed) {
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  for (int i = 0; i < 20; ++i) {
    words.push_back("w" + std::to_string(i));
    counts.push_back(1);
  }
  ToyTask t{EmbeddingMatrix(Vocabulary(words, counts), dim), {}};
  Rng rng(seed);
  for (auto& v : t.emb.input()) v = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < 2; ++i)
    for (auto& v : t.emb.input_row(static_cast<TokenId>(i))) v = 0;
  for (std::size_t n = 0; n < docs; ++n) {
    const std::size_t label = n % kNumClasses;
    std::vector<TokenId> doc(len, Vocabulary::kPad);
    const std::size_t used = len - rng.below(len / 2);
    for (std::size_t k = 0; k < used; ++k) doc[k] = static_cast<TokenId>(6 + rng.below(14));
    doc[rng.below(used)] = static_cast<TokenId>(2 + label);
    t.data.docs.push_back(doc);
    t.data.labels.push_back(label);
  }
  return t;
}

CnnConfig small_cnn(std::size_t len, std::size_t dim) {
  CnnConfig cfg;
  cfg.max_len = len;
  cfg.embed_dim = dim;
  cfg.filters = 6;
  cfg.widths = {2, 3};
  return cfg;
}

std::string saved(const NeuralModel& model) {
  std::ostringstream out;
  save_model(model, out);
  return out.str();
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("tensor shapes and indexing") {
    Tensor t({2, 3, 4}, 1.5);
    CHECK(t.size() == 24);
    CHECK(t.shape_string() == "(2x3x4)");
    t.at(1, 2, 3) = 7;
    CHECK(t[23] == 7);
    CHECK_THROWS_AS(require_shape(t, {2, 3}, "t"), Error);
    CHECK_NOTHROW(require_shape(t, {2, 3, 4}, "t"));
  }

  TEST_CASE("convolution matches a direct loop") {
    const auto x = random_tensor({2, 6, 3}, 1);
    Conv1dLayer conv(3, 4, 3, "c");
    Rng rng(2);
    conv.init(rng);
    for (auto& v : conv.bias.value.values()) v = rng.uniform(-1, 1);
    const auto y = conv1d_forward(x, conv);
    REQUIRE(y.shape() == std::vector<std::size_t>{2, 4, 4});
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t f = 0; f < 4; ++f) {
          double s = conv.bias.value[f];
          for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t d = 0; d < 3; ++d) s += conv.weight.value.at(f, k, d) * x.at(n, t + k, d);
          CHECK(y.at(n, t, f) == doctest::Approx(s).epsilon(1e-12));
        }
    CHECK_THROWS_AS(conv1d_forward(random_tensor({1, 2, 3}, 3), conv), Error);
  }

  TEST_CASE("max pooling keeps the first maximum") {
    Tensor x({1, 3, 2});
    x.at(0, 0, 0) = 1;
    x.at(0, 1, 0) = 1;
    x.at(0, 2, 0) = 0;
    x.at(0, 0, 1) = -2;
    x.at(0, 1, 1) = -1;
    x.at(0, 2, 1) = -3;
    const auto p = global_max_pool(x);
    CHECK(p.output[0] == 1);
    CHECK(p.output[1] == -1);
    CHECK(p.argmax == std::vector<std::size_t>{0, 1});
    Tensor g({1, 2}, 1.0);
    const auto back = global_max_pool_backward(p, g, x.shape());
    CHECK(back.at(0, 0, 0) == 1);
    CHECK(back.at(0, 1, 0) == 0);
    CHECK(back.at(0, 1, 1) == 1);
  }

  TEST_CASE("batch norm normalises in train mode and tracks running statistics") {
    const auto x = random_tensor({8, 3}, 4);
    BatchNormLayer bn(3, "bn", 0.9, 1e-5);
    BatchNormCache cache;
    const auto y = batchnorm_train(x, bn, cache);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0, var = 0, xm = 0, xv = 0;
      for (std::size_t n = 0; n < 8; ++n) mean += y.at(n, c) / 8, xm += x.at(n, c) / 8;
      for (std::size_t n = 0; n < 8; ++n) var += std::pow(y.at(n, c) - mean, 2) / 8, xv += std::pow(x.at(n, c) - xm, 2);
      CHECK(std::abs(mean) < 1e-12);
      CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
      CHECK(bn.running_mean[c] == doctest::Approx(0.1 * xm));
      CHECK(bn.running_var[c] == doctest::Approx(0.9 + 0.1 * xv / 7));
    }
    const auto before = bn.running_mean;
    batchnorm_infer(x, bn);
    CHECK(bn.running_mean == before);
    CHECK_THROWS_AS(batchnorm_train(random_tensor({1, 3}, 5), bn, cache), Error);
  }

  TEST_CASE("dropout scales survivors and is the identity at inference") {
    const Tensor x({200, 50}, 1.0);
    Rng rng(3);
    DropoutMask mask;
    const auto y = dropout_forward(x, 0.5, Mode::Train, rng, &mask);
    double sum = 0;
    for (double v : y.values()) {
      CHECK((v == 0.0 || v == 2.0));
      sum += v;
    }
    CHECK(std::abs(sum / y.size() - 1.0) < 3 * std::sqrt(1.0 / y.size()));
    const auto same = dropout_forward(x, 0.5, Mode::Infer, rng, nullptr);
    CHECK(same.storage() == x.storage());
    const auto g = dropout_backward(mask, Tensor({200, 50}, 1.0));
    CHECK(g.storage() == y.storage());
  }

  TEST_CASE("softmax cross-entropy is stable and its gradient sums to zero") {
    Tensor logits({2, 4});
    logits.at(0, 0) = 1000;
    logits.at(1, 3) = -1000;
    const std::size_t labels[] = {0, 2};
    const auto r = softmax_cross_entropy(logits, labels);
    CHECK(std::isfinite(r.loss));
    CHECK(r.probs.at(0, 0) == doctest::Approx(1.0));
    CHECK(r.loss == doctest::Approx(0.5 * std::log(3.0)));
    for (std::size_t n = 0; n < 2; ++n) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += r.grad_logits.at(n, k);
      CHECK(std::abs(s) < 1e-15);
    }
  }

  TEST_CASE("global norm clipping") {
    Parameter a("a", {2}, true), b("b", {1}, false);
    a.grad[0] = 3;
    a.grad[1] = 0;
    b.grad[0] = 4;
    Parameter* ps[] = {&a, &b};
    CHECK(clip_global_norm(ps, 1.0) == doctest::Approx(5.0));
    CHECK(a.grad[0] == doctest::Approx(0.6));
    CHECK(b.grad[0] == doctest::Approx(0.8));
    CHECK(clip_global_norm(ps, 10.0) == doctest::Approx(1.0));
    CHECK(a.grad[0] == doctest::Approx(0.6));
  }

  TEST_CASE("adam takes a bias-corrected first step and decays weights only") {
    Parameter w("w", {2}, true), b("b", {1}, false);
    w.value[0] = 1;
    w.value[1] = -1;
    w.grad[0] = 0.5;
    b.value[0] = 1;
    Parameter* ps[] = {&w, &b};
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.l2 = 0.2;
    AdamState state(ps, cfg);
    adam_update(ps, state);
    // First step moves each coordinate by lr * g / (|g| + eps').
    CHECK(w.value[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(w.value[1] == doctest::Approx(-0.9).epsilon(1e-6));
    CHECK(b.value[0] == 1.0);
    CHECK(l2_penalty(ps, 0.2) == doctest::Approx(0.1 * (0.81 + 0.81)).epsilon(1e-5));
  }

  TEST_CASE("every analytic gradient agrees with central differences") {
    const auto results = run_gradcheck("all", {});
    CHECK(results.size() > 20);
    for (const auto& e : results) {
      INFO(e.component << " " << e.tensor << " " << e.max_rel_error);
      CHECK(e.passed());
    }
    CHECK_THROWS_AS(run_gradcheck("transformer", {}), Error);
  }

  TEST_CASE("a wrong tanh derivative is caught") {
    set_tanh_derivative_fault(true);
    const auto results = run_gradcheck("layers", {});
    set_tanh_derivative_fault(false);
    bool tanh_failed = false;
    for (const auto& e : results) {
      if (e.component == "tanh") tanh_failed |= !e.passed();
      if (e.component == "dense") CHECK(e.passed());
    }
    CHECK(tanh_failed);
  }

  TEST_CASE("lstm forget gate bias starts at one") {
    RecurrentConfig cfg;
    cfg.embed_dim = 3;
    cfg.hidden = 4;
    const LstmClassifier lstm(cfg, 1);
    for (std::size_t h = 0; h < 4; ++h) {
      CHECK(lstm.b.value[4 + h] == 1.0);
      CHECK(lstm.b.value[h] == 0.0);
    }
  }

  TEST_CASE("recurrent models ignore padding beyond each length") {
    RecurrentConfig cfg;
    cfg.embed_dim = 3;
    cfg.hidden = 5;
    const RnnClassifier rnn(cfg, 2);
    const LstmClassifier lstm(cfg, 2);
    SequenceBatch batch{random_tensor({1, 6, 3}, 9), {4}};
    SequenceBatch changed = batch;
    for (std::size_t t = 4; t < 6; ++t)
      for (std::size_t d = 0; d < 3; ++d) changed.inputs.at(0, t, d) = 5.0;
    CHECK(rnn_forward(batch, rnn, nullptr).storage() == rnn_forward(changed, rnn, nullptr).storage());
    CHECK(lstm_forward(batch, lstm, nullptr).storage() == lstm_forward(changed, lstm, nullptr).storage());
  }

  TEST_CASE("training is deterministic and learns a marker-token task") {
    auto task = toy_task(80, 10, 5, 4);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 40;
    cfg.lr = 0.01;
    NeuralModel a = CnnClassifier(small_cnn(10, 5), 3);
    NeuralModel b = CnnClassifier(small_cnn(10, 5), 3);
    const auto log_a = fit(a, task.data, task.emb, cfg);
    const auto log_b = fit(b, task.data, task.emb, cfg);
    CHECK(saved(a) == saved(b));
    REQUIRE(log_a.size() == 40);
    for (std::size_t e = 0; e < 40; ++e) CHECK(log_a[e].loss == log_b[e].loss);
    CHECK(log_a.back().loss < log_a.front().loss);
    const auto p = predict(a, task.data.docs, task.emb, 7);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      hits += code(p.labels[i]) == task.data.labels[i];
      double s = 0;
      for (double v : p.probs[i]) s += v;
      CHECK(s == doctest::Approx(1.0));
    }
    CHECK(hits >= 72);
  }

  TEST_CASE("fit validates its inputs") {
    auto task = toy_task(8, 6, 4, 1);
    NeuralModel m = CnnClassifier(small_cnn(6, 4), 1);
    TrainConfig cfg;
    CHECK_THROWS_AS(fit(m, EncodedSet{}, task.emb, cfg), Error);
    auto bad = task.data;
    bad.labels[0] = 9;
    CHECK_THROWS_AS(fit(m, bad, task.emb, cfg), Error);
    bad = task.data;
    bad.labels.pop_back();
    CHECK_THROWS_AS(fit(m, bad, task.emb, cfg), Error);
    NeuralModel wide = CnnClassifier(small_cnn(6, 7), 1);
    CHECK_THROWS_AS(fit(wide, task.data, task.emb, cfg), Error);
    cfg.lr = 1e300;
    cfg.epochs = 3;
    try {
      fit(m, task.data, task.emb, cfg);
      FAIL("expected a numerical failure");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonFiniteLoss);
    }
  }

  TEST_CASE("saved networks reload with identical predictions") {
    auto task = toy_task(24, 8, 4, 6);
    RecurrentConfig rc;
    rc.embed_dim = 4;
    rc.hidden = 5;
    CnnConfig cc = small_cnn(8, 4);
    cc.order = BranchOrder::ConvNormTanh;
    std::vector<NeuralModel> models = {CnnClassifier(cc, 2), RnnClassifier(rc, 2), LstmClassifier(rc, 2)};
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    for (auto& m : models) {
      fit(m, task.data, task.emb, cfg);
      std::istringstream in(saved(m));
      const auto back = load_model(in);
      CHECK(architecture(back) == architecture(m));
      CHECK(saved(back) == saved(m));
      const auto p = predict(m, task.data.docs, task.emb);
      const auto q = predict(back, task.data.docs, task.emb);
      CHECK(p.labels == q.labels);
      CHECK(p.probs == q.probs);
    }
    std::istringstream junk("moodtag-nn 1\narch gru\n");
    CHECK_THROWS_AS(load_model(junk), Error);
  }
}

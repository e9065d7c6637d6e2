#include "doctest.h"

#include <cmath>

#include "moodtag/embeddings.hpp"
#include "moodtag/error.hpp"
#include "support.hpp"

using namespace moodtag;

namespace {

Vocabulary small_vocab() { return Vocabulary({"a", "b", "c", "d", "e"}, {10, 8, 4, 2, 1}); }

EmbeddingMatrix random_matrix(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingMatrix emb(vocab, dim);
  Rng rng(seed);
  for (TokenId w = Vocabulary::kFirstWord; w < static_cast<TokenId>(vocab.size()); ++w) {
    for (auto& v : emb.input_row(w)) v = rng.uniform(-0.5, 0.5);
    for (auto& v : emb.output_row(w)) v = rng.uniform(-0.5, 0.5);
  }
  return emb;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("embeddings") {
  TEST_CASE("initialisation bounds and zero reserved rows") {
    const auto vocab = small_vocab();
    const auto emb = init_embeddings(vocab, 8, 3);
    for (TokenId w = 0; w < static_cast<TokenId>(vocab.size()); ++w) {
      for (double v : emb.input_row(w)) {
        if (w < Vocabulary::kFirstWord)
          CHECK(v == 0.0);
        else
          CHECK(std::abs(v) <= 0.5 / 8);
      }
      for (double v : emb.output_row(w)) CHECK(v == 0.0);
    }
    CHECK(init_embeddings(vocab, 8, 3).input() == emb.input());
  }

  TEST_CASE("unigram table follows count^0.75") {
    const auto vocab = small_vocab();
    const UnigramTable table(vocab);
    double z = 0;
    for (double c : {10.0, 8.0, 4.0, 2.0, 1.0}) z += std::pow(c, 0.75);
    CHECK(table.probability(0) == 0.0);
    CHECK(table.probability(1) == 0.0);
    CHECK(table.probability(2) == doctest::Approx(std::pow(10.0, 0.75) / z));
    CHECK(table.probability(6) == doctest::Approx(1.0 / z));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(table.sample(rng) >= Vocabulary::kFirstWord);
  }

  TEST_CASE("negative samples avoid the target when possible") {
    const auto vocab = small_vocab();
    const UnigramTable table(vocab);
    Rng rng(2);
    for (int i = 0; i < 200; ++i)
      for (TokenId n : negative_sample(table, 2, 5, rng)) CHECK(n != 2);
  }

  TEST_CASE("loss matches the closed form") {
    const auto vocab = small_vocab();
    const auto emb = random_matrix(vocab, 4, 7);
    const TokenId ctx[] = {3, 4, 4};
    const TokenId neg[] = {5, 6};
    std::vector<double> h(4);
    for (TokenId w : ctx)
      for (int i = 0; i < 4; ++i) h[i] += emb.input_row(w)[i] / 3.0;
    auto score = [&](TokenId w) {
      double s = 0;
      for (int i = 0; i < 4; ++i) s += h[i] * emb.output_row(w)[i];
      return s;
    };
    const double expected = -std::log(sig(score(2))) - std::log(sig(-score(5))) - std::log(sig(-score(6)));
    CHECK(cbow_loss(2, ctx, neg, emb) == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("gradients match central differences") {
    const auto vocab = small_vocab();
    auto emb = random_matrix(vocab, 3, 9);
    const TokenId ctx[] = {3, 4, 3};
    const TokenId neg[] = {5, 2, 5};
    const auto g = cbow_gradients(2, ctx, neg, emb);
    CHECK(g.loss == doctest::Approx(cbow_loss(2, ctx, neg, emb)));
    const double eps = 1e-6;
    auto check_rows = [&](const auto& grads, auto row_of) {
      for (const auto& [w, grad] : grads) {
        auto row = row_of(w);
        for (std::size_t i = 0; i < row.size(); ++i) {
          const double keep = row[i];
          row[i] = keep + eps;
          const double up = cbow_loss(2, ctx, neg, emb);
          row[i] = keep - eps;
          const double down = cbow_loss(2, ctx, neg, emb);
          row[i] = keep;
          CHECK(grad[i] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-6));
        }
      }
    };
    check_rows(g.input, [&](TokenId w) { return emb.input_row(w); });
    check_rows(g.output, [&](TokenId w) { return emb.output_row(w); });
    CHECK(g.input.size() == 2);
    CHECK(g.output.size() == 2);
  }

  TEST_CASE("a small update lowers the loss for fixed negatives") {
    const auto vocab = small_vocab();
    auto emb = random_matrix(vocab, 6, 4);
    const TokenId ctx[] = {3, 4};
    const TokenId neg[] = {5, 6};
    const double before = cbow_update(2, ctx, neg, emb, 0.05);
    CHECK(cbow_loss(2, ctx, neg, emb) < before);
  }

  TEST_CASE("contexts must be non-empty and free of PAD") {
    const auto vocab = small_vocab();
    auto emb = random_matrix(vocab, 2, 1);
    const UnigramTable table(vocab);
    Rng rng(0);
    CHECK_THROWS_AS(cbow_step(2, {}, emb, table, 2, 0.1, rng), Error);
    const TokenId pad[] = {Vocabulary::kPad};
    CHECK_THROWS_AS(cbow_loss(2, pad, {}, emb), Error);
  }

  TEST_CASE("training is deterministic and validates its config") {
    const auto vocab = small_vocab();
    const std::vector<std::vector<TokenId>> corpus = {{2, 3, 4, 2, 5, 6}, {3, 2, 2, 4}};
    CbowConfig cfg;
    cfg.dim = 5;
    cfg.window = 2;
    cfg.epochs = 3;
    cfg.min_count = 1;
    const auto a = train_cbow(corpus, vocab, cfg);
    const auto b = train_cbow(corpus, vocab, cfg);
    CHECK(a.embeddings.input() == b.embeddings.input());
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.epoch_loss.size() == 3);
    cfg.lr_end = 1.0;
    CHECK_THROWS_AS(train_cbow(corpus, vocab, cfg), Error);
    cfg = {};
    CHECK_THROWS_AS(train_cbow({}, vocab, cfg), Error);
    CHECK_THROWS_AS(train_cbow({{99}}, vocab, cfg), Error);
  }

  TEST_CASE("cosine similarity and neighbours") {
    const double a[] = {1, 0}, b[] = {1, 1}, z[] = {0, 0};
    CHECK(cosine_similarity(a, b) == doctest::Approx(std::sqrt(0.5)));
    CHECK_THROWS_AS(cosine_similarity(a, z), Error);
    EmbeddingMatrix emb(Vocabulary({"x", "y", "z"}, {1, 1, 1}), 2);
    emb.input_row(2)[0] = 1;
    emb.input_row(3)[0] = 0.9;
    emb.input_row(3)[1] = 0.1;
    emb.input_row(4)[1] = 1;
    const auto nn = nearest_neighbors("x", emb, 2);
    REQUIRE(nn.size() == 2);
    CHECK(nn[0].first == "y");
    CHECK(nn[1].first == "z");
    CHECK_THROWS_AS(nearest_neighbors("q", emb, 1), Error);
  }

  TEST_CASE("embedding files round-trip within 1e-6") {
    testing::ScratchDir dir("emb");
    const auto vocab = small_vocab();
    const auto emb = random_matrix(vocab, 7, 12);
    save_embeddings(emb, dir / "emb.txt");
    const auto back = load_embeddings(dir / "emb.txt");
    CHECK(back.dim() == 7);
    CHECK(back.vocab().tokens() == vocab.tokens());
    for (TokenId w = Vocabulary::kFirstWord; w < static_cast<TokenId>(vocab.size()); ++w)
      for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(back.input_row(w)[i] - emb.input_row(w)[i]) <= 1e-6);
    CHECK(testing::slurp(dir / "emb.txt").rfind("5 7\n", 0) == 0);
  }

  TEST_CASE("malformed embedding files are rejected with a line") {
    testing::ScratchDir dir("emb-bad");
    testing::spit(dir / "short.txt", "2 3\na 1 2 3\nb 1 2\n");
    try {
      load_embeddings(dir / "short.txt");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
      CHECK(e.line() == 3);
    }
    testing::spit(dir / "count.txt", "3 1\na 1\n");
    CHECK_THROWS_AS(load_embeddings(dir / "count.txt"), Error);
  }
}

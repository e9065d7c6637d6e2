#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "moodtag/error.hpp"
#include "moodtag/features.hpp"
#include "moodtag/random.hpp"
#include "oracles.hpp"

using namespace moodtag;

namespace {

std::vector<std::vector<std::string>> random_corpus(std::size_t docs, std::size_t terms, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> out(docs);
  for (auto& d : out) {
    const std::size_t len = 5 + rng.below(20);
    for (std::size_t i = 0; i < len; ++i) d.push_back("t" + std::to_string(rng.below(terms)));
  }
  return out;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("tf-idf matches a brute-force recomputation") {
    auto train = random_corpus(10, 50, 11);
    // One term present in every document.
    for (auto& d : train) d.push_back("everywhere");
    const auto model = fit_tfidf(train, build_vocabulary(train, 1));
    for (const auto& doc : train) {
      const auto fv = transform_tfidf(doc, model);
      const auto expected = oracle::tfidf_weights(train, doc);
      for (std::size_t i = 0; i < fv.schema.size(); ++i) {
        const auto it = expected.find(fv.schema[i]);
        CHECK(fv.values[i] == doctest::Approx(it == expected.end() ? 0.0 : it->second).epsilon(1e-12));
      }
      const auto idx = model.vocab().index_of("everywhere");
      CHECK(fv.values[static_cast<std::size_t>(idx)] == 0.0);
    }
  }

  TEST_CASE("unseen terms and reserved slots weigh zero") {
    const std::vector<std::vector<std::string>> train = {{"a", "b"}, {"a"}};
    const auto model = fit_tfidf(train, build_vocabulary(train, 1));
    const auto fv = transform_tfidf({"b", "b", "c"}, model);
    CHECK(fv.values.size() == model.vocab().size());
    CHECK(fv.values[0] == 0.0);
    CHECK(fv.values[1] == 0.0);
    CHECK(fv.values[static_cast<std::size_t>(model.vocab().index_of("b"))] == doctest::Approx(2 * std::log(2.0)));
    CHECK(fv.schema.front() == "<pad>");
  }

  TEST_CASE("tf-idf weights are non-negative and scale with term frequency") {
    const auto train = random_corpus(30, 40, 5);
    const auto model = fit_tfidf(train, build_vocabulary(train, 1));
    for (const auto& doc : random_corpus(20, 60, 6)) {
      auto doubled = doc;
      doubled.insert(doubled.end(), doc.begin(), doc.end());
      const auto a = transform_tfidf(doc, model).values;
      const auto b = transform_tfidf(doubled, model).values;
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] >= 0.0);
        CHECK(b[i] == doctest::Approx(2 * a[i]));
      }
    }
  }

  TEST_CASE("tf-idf model rejects inconsistent statistics") {
    CHECK_THROWS_AS(fit_tfidf({}, Vocabulary({"a"}, {1})), Error);
    CHECK_THROWS_AS(TfidfModel(Vocabulary({"a"}, {1}), {0, 0, 3}, 2), Error);
    CHECK_THROWS_AS(TfidfModel(Vocabulary({"a"}, {1}), {0, 0}, 2), Error);
  }

  TEST_CASE("lexicon parsing accepts comments and optional weights") {
    std::istringstream in("# header\n爱\tpositive\n哭\tnegative\t2.5\n爱\temotion\n\n");
    const auto lex = CategoryLexicon::parse(in);
    CHECK(lex.categories() == std::vector<std::string>{"positive", "negative", "emotion"});
    CHECK(lex.lookup("爱").size() == 2);
    CHECK(lex.lookup("哭")[0].second == 2.5);
    CHECK(lex.lookup("笑").empty());
  }

  TEST_CASE("lexicon parsing reports the offending line") {
    std::istringstream dup("爱\tpositive\n爱\tpositive\n");
    std::istringstream bad("爱\tpositive\n哭\tnegative\t-1\n");
    std::istringstream shape("爱\n");
    try {
      CategoryLexicon::parse(dup);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DuplicateEntry);
      CHECK(e.line() == 2);
    }
    try {
      CategoryLexicon::parse(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(CategoryLexicon::parse(shape), Error);
  }

  TEST_CASE("liwc features count words, lines, long words and category shares") {
    const CategoryLexicon lex({{"爱", "positive", 1.0}, {"眼泪", "negative", 1.0}, {"爱情", "positive", 2.0}});
    const auto fv = liwc_features({"爱", "爱情", "眼泪", "一个人", "走"}, 2, lex);
    CHECK(fv.schema ==
          std::vector<std::string>{"word_count", "mean_tokens_per_line", "long_word_fraction", "positive", "negative"});
    CHECK(fv.values[0] == 5);
    CHECK(fv.values[1] == 2.5);
    CHECK(fv.values[2] == doctest::Approx(0.2));
    CHECK(fv.values[3] == doctest::Approx(60.0));
    CHECK(fv.values[4] == doctest::Approx(20.0));

    LiwcOptions two;
    two.long_word_chars = 2;
    CHECK(liwc_features({"爱", "爱情", "眼泪", "一个人", "走"}, 0, lex, two).values[2] == doctest::Approx(0.6));
    const auto empty = liwc_features(std::vector<std::string>{}, 0, lex);
    for (double v : empty.values) CHECK(v == 0.0);
  }

  TEST_CASE("feature csv has the schema header and refuses mixed schemas") {
    const CategoryLexicon lex({{"爱", "positive", 1.0}});
    std::vector<FeatureVector> rows = {liwc_features({"爱"}, 1, lex), liwc_features({"走", "爱"}, 1, lex)};
    std::ostringstream out;
    write_features_csv(rows, out);
    CHECK(out.str().rfind("word_count,mean_tokens_per_line,long_word_fraction,positive\n", 0) == 0);
    rows.push_back(transform_tfidf({"a"}, fit_tfidf({{"a"}}, Vocabulary({"a"}, {1}))));
    std::ostringstream again;
    CHECK_THROWS_AS(write_features_csv(rows, again), Error);
  }
}

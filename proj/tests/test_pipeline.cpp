#include "doctest.h"

#include <sstream>

#include "moodtag/error.hpp"
#include "moodtag/pipeline.hpp"
#include "support.hpp"

using namespace moodtag;

namespace {

struct SmallSetup {
  LabeledDataset ds;
  EmbeddingMatrix emb;
  CategoryLexicon lexicon;
  RunConfig cfg;
};

SmallSetup small_setup() {
  SmallSetup s;
  s.cfg.set("synth.docs_per_class", "20");
  s.cfg.set("synth.doc_len", "24");
  s.cfg.set("synth.vocab_size", "80");
  s.cfg.set("max_len", "24");
  s.cfg.set("cbow.dim", "6");
  s.cfg.set("cbow.min_count", "1");
  s.cfg.set("cbow.epochs", "1");
  s.cfg.set("cnn.filters", "4");
  s.cfg.set("cnn.widths", "2,3");
  s.cfg.set("rnn.hidden", "4");
  s.cfg.set("train.epochs", "2");
  s.cfg.set("train.batch_size", "16");
  s.ds = split_dataset(generate_synthetic_corpus(synthetic_config(s.cfg)), 0.25, 3);
  const auto vocab = build_vocabulary(s.ds.documents, 1);
  std::vector<std::vector<TokenId>> corpus;
  for (const auto& d : s.ds.documents) corpus.push_back(encode_document(d, vocab, d.tokens.size()));
  s.emb = train_cbow(corpus, vocab, cbow_config(s.cfg)).embeddings;
  std::vector<LexiconEntry> entries;
  for (std::size_t i = 0; i < 12; ++i) entries.push_back({synthetic_token(i), "cat" + std::to_string(i % 4), 1.0});
  s.lexicon = CategoryLexicon(entries);
  return s;
}

std::string saved(const TrainedModel& m) {
  std::ostringstream out;
  save_trained_model(m, out);
  return out.str();
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("model kinds have stable names") {
    for (auto kind : kAllModelKinds) CHECK(parse_model_kind(model_kind_name(kind)) == kind);
    CHECK(model_display_name(ModelKind::SvmTfidf) == "TF-IDF+SVM");
    CHECK_FALSE(parse_model_kind("gru"));
    CHECK(is_neural(ModelKind::Lstm));
    CHECK_FALSE(is_neural(ModelKind::SvmLiwc));
  }

  TEST_CASE("preprocessing counts duplicates and documents left empty") {
    std::vector<LyricDocument> docs;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (int i = 0; i < 4; ++i) {
        LyricDocument d;
        d.id = std::to_string(c) + "-" + std::to_string(i);
        d.label = label_from_code(c);
        d.raw_text = "[00:01.00]歌" + std::to_string(c) + " 词" + std::to_string(i);
        docs.push_back(d);
      }
    }
    docs.push_back(docs.front());
    docs.back().id = "copy";
    docs.push_back(docs.front());
    docs.back().id = "latin";
    docs.back().raw_text = "[00:01.00]only latin";
    const auto r = preprocess_corpus(docs, {}, SegmentMode::Whitespace, true, 0.25, 1);
    CHECK(r.read == 18);
    CHECK(r.duplicates == 1);
    CHECK(r.empty == 1);
    CHECK(r.dataset.documents.size() == 16);
    CHECK(select_documents(r.dataset, std::nullopt).size() == 16);
    CHECK(select_documents(r.dataset, Split::Test).size() == 4);
    const auto kept = preprocess_corpus(docs, {}, SegmentMode::Whitespace, false, 0.25, 1);
    CHECK(kept.duplicates == 0);
    CHECK(kept.dataset.documents.size() == 17);
  }

  TEST_CASE("every model kind trains, predicts and survives a save and load") {
    auto s = small_setup();
    const auto train = s.ds.select(Split::Train);
    const auto test = s.ds.select(Split::Test);
    for (auto kind : kAllModelKinds) {
      INFO(model_kind_name(kind));
      const auto result = train_model(kind, train, s.cfg, {&s.emb, &s.lexicon});
      CHECK(result.log.size() == (is_neural(kind) ? 2 : 1));
      const auto text = saved(result.model);
      std::istringstream in(text);
      const auto back = load_trained_model(in);
      CHECK(saved(back) == text);
      const auto p = predict_documents(result.model, test, &s.emb);
      const auto q = predict_documents(back, test, &s.emb);
      REQUIRE(p.size() == test.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i].label == q[i].label);
        CHECK(p[i].scores == q[i].scores);
      }
      // Same inputs, same bytes.
      CHECK(saved(train_model(kind, train, s.cfg, {&s.emb, &s.lexicon}).model) == text);
      CHECK(training_log_csv(result.log).rfind("epoch,loss,accuracy\n", 0) == 0);
    }
  }

  TEST_CASE("neural models refuse embeddings they were not trained with") {
    auto s = small_setup();
    const auto train = s.ds.select(Split::Train);
    const auto model = train_model(ModelKind::Cnn, train, s.cfg, {&s.emb, nullptr}).model;
    CHECK(model.embeddings_fingerprint == embedding_fingerprint(s.emb));
    auto other = s.emb;
    other.input()[other.dim() * 2] += 1e-9;
    CHECK(embedding_fingerprint(other) != embedding_fingerprint(s.emb));
    try {
      predict_documents(model, train, &other);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::SchemaMismatch);
    }
    CHECK_THROWS_AS(predict_documents(model, train, nullptr), Error);
  }

  TEST_CASE("training checks its inputs") {
    auto s = small_setup();
    const auto train = s.ds.select(Split::Train);
    CHECK_THROWS_AS(train_model(ModelKind::Rnn, train, s.cfg, {}), Error);
    CHECK_THROWS_AS(train_model(ModelKind::SvmLiwc, train, s.cfg, {}), Error);
    CHECK_THROWS_AS(train_model(ModelKind::SvmTfidf, {}, s.cfg, {}), Error);
  }

  TEST_CASE("model files are versioned and checked on load") {
    testing::ScratchDir dir("pipeline");
    testing::spit(dir / "v2.model", "moodtag-model 2\nkind cnn\n");
    CHECK_THROWS_AS(load_trained_model(dir / "v2.model"), Error);
    testing::spit(dir / "kind.model", "moodtag-model 1\nkind forest\n");
    CHECK_THROWS_AS(load_trained_model(dir / "kind.model"), Error);
    CHECK_THROWS_AS(load_trained_model(dir / "absent.model"), Error);
  }
}

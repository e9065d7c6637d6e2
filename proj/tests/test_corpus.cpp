#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "moodtag/corpus.hpp"
#include "moodtag/error.hpp"
#include "moodtag/random.hpp"
#include "moodtag/utf8.hpp"
#include "support.hpp"

using namespace moodtag;

namespace {

Errc error_code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

LyricDocument labeled(std::string id, MoodLabel label, std::string text) {
  LyricDocument d;
  d.id = std::move(id);
  d.label = label;
  d.raw_text = std::move(text);
  return d;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("labels round-trip through codes and names") {
    for (auto label : kAllLabels) {
      CHECK(label_from_code(code(label)) == label);
      CHECK(parse_label(label_name(label)) == label);
    }
    CHECK(parse_label("sadness") == MoodLabel::Sadness);
    CHECK_FALSE(parse_label("anger"));
    CHECK(error_code_of([] { label_from_code(4); }) == Errc::UnknownLabel);
  }

  TEST_CASE("argmax ties go to the smallest code") {
    const double scores[] = {0.1, 0.4, 0.4, 0.1};
    CHECK(argmax_label(scores) == MoodLabel::Catharsis);
    CHECK(error_code_of([] { argmax_label({}); }) == Errc::InvalidArgument);
  }

  TEST_CASE("utf8 decode and encode are inverse on valid text") {
    const std::string text = "我爱你 abc";
    CHECK(utf8::encode(utf8::decode(text)) == text);
    CHECK(utf8::length(text) == 7);
    CHECK(utf8::decode("\xff")[0] == U'�');
    CHECK(utf8::is_cjk_ideograph(U'爱'));
    CHECK_FALSE(utf8::is_cjk_ideograph(U'a'));
  }

  TEST_CASE("cleaning strips time tags, header lines and non-ideographs") {
    CHECK(clean_lyric_text("[ti:歌名]\n[ar:歌手]\n[00:12.34]我爱你 hello\n[01:02.00][01:30.5]中国") == "我爱你 中国");
    CHECK(clean_lyric_text("[00:01.00]你好，世界！") == "你好 世界");
    CHECK(clean_lyric_text("[00:01.00]la la la") == "");
    // Bracketed text that is not a tag is kept as content.
    CHECK(clean_lyric_text("[副歌]想你") == "副歌 想你");
    const auto lines = clean_lyric_lines("[00:01.00]一\n\n[00:02.00]abc\n[00:03.00]二三");
    CHECK(lines == std::vector<std::string>{"一", "二三"});
  }

  TEST_CASE("forward maximum matching takes the longest lexicon word") {
    const SegmenterLexicon lex({"我爱", "中国", "中国人", "人民"});
    CHECK(segment("我爱中国人民", lex, SegmentMode::Lexicon) == std::vector<std::string>{"我爱", "中国人", "民"});
    CHECK(segment("你 好", lex, SegmentMode::Lexicon) == std::vector<std::string>{"你", "好"});
    CHECK(segment("你 好", {}, SegmentMode::Whitespace) == std::vector<std::string>{"你", "好"});
    CHECK(error_code_of([] { segment("你", SegmenterLexicon{}, SegmentMode::Lexicon); }) == Errc::LexiconEmpty);
  }

  TEST_CASE("segmentation never loses characters") {
    Rng rng(3);
    const SegmenterLexicon lex({"一二", "二三", "一二三", "四五"});
    for (int trial = 0; trial < 200; ++trial) {
      std::u32string text;
      const std::size_t n = 1 + rng.below(20);
      for (std::size_t i = 0; i < n; ++i) text.push_back(U"一二三四五六"[rng.below(6)]);
      std::string joined;
      for (const auto& t : segment(utf8::encode(text), lex, SegmentMode::Lexicon)) joined += t;
      CHECK(joined == utf8::encode(text));
    }
  }

  TEST_CASE("preprocessing fills tokens and line count") {
    LyricDocument d = labeled("a", MoodLabel::Quiet, "[00:01.00]我爱中国\n[00:02.00]你好\n");
    preprocess_document(d, SegmenterLexicon({"我爱", "中国"}), SegmentMode::Lexicon);
    CHECK(d.tokens == std::vector<std::string>{"我爱", "中国", "你", "好"});
    CHECK(d.line_count == 2);
  }

  TEST_CASE("de-duplication keeps the first of identical raw texts") {
    std::vector<LyricDocument> docs = {labeled("a", MoodLabel::Quiet, "一"), labeled("b", MoodLabel::Sadness, "一"),
                                       labeled("c", MoodLabel::Quiet, "一 ")};
    const auto kept = deduplicate(docs);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].id == "a");
    CHECK(kept[1].id == "c");
  }

  TEST_CASE("vocabulary orders by count then token and reserves PAD and UNK") {
    const auto vocab = build_vocabulary(std::vector<std::vector<std::string>>{{"b", "a", "b"}, {"c", "a", "d"}}, 1);
    CHECK(vocab.size() == 6);
    CHECK(vocab.token(Vocabulary::kFirstWord) == "a");
    CHECK(vocab.token(3) == "b");
    CHECK(vocab.index_of("zzz") == Vocabulary::kUnk);
    const auto pruned = build_vocabulary(std::vector<std::vector<std::string>>{{"b", "a", "b"}, {"c", "a"}}, 2);
    CHECK(pruned.word_count() == 2);
    CHECK(error_code_of([] { build_vocabulary(std::vector<std::vector<std::string>>{{"x"}}, 2); }) ==
          Errc::EmptyVocabulary);
    CHECK(error_code_of([] { Vocabulary({"x", "x"}, {1, 1}); }) == Errc::DuplicateEntry);
  }

  TEST_CASE("encoding pads and truncates to max_len") {
    const Vocabulary vocab({"a", "b"}, {2, 1});
    CHECK(encode_tokens({"a", "q"}, vocab, 4) == std::vector<TokenId>{2, 1, 0, 0});
    CHECK(encode_tokens({"a", "b", "a"}, vocab, 2) == std::vector<TokenId>{2, 3});
  }

  TEST_CASE("stratified split sizes follow half-away-from-zero rounding") {
    CHECK(stratified_test_count(2870, 0.1) == 287);
    CHECK(stratified_test_count(2812, 0.1) == 281);
    CHECK(stratified_test_count(2848, 0.1) == 285);
    CHECK(stratified_test_count(2897, 0.1) == 290);
    CHECK(stratified_test_count(25, 0.1) == 3);
    CHECK(stratified_test_count(15, 0.1) == 2);
  }

  TEST_CASE("split is stratified, disjoint and seed-determined") {
    std::vector<LyricDocument> docs;
    const std::size_t sizes[] = {40, 33, 27, 51};
    for (std::size_t c = 0; c < kNumClasses; ++c)
      for (std::size_t i = 0; i < sizes[c]; ++i)
        docs.push_back(labeled(std::to_string(c) + "-" + std::to_string(i), label_from_code(c), "x"));
    const auto a = split_dataset(docs, 0.2, 9);
    const auto b = split_dataset(docs, 0.2, 9);
    const auto other = split_dataset(docs, 0.2, 10);
    CHECK(a.split == b.split);
    CHECK(a.split != other.split);
    const auto stats = dataset_stats(a);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      CHECK(stats[c].total == sizes[c]);
      CHECK(stats[c].test == stratified_test_count(sizes[c], 0.2));
      CHECK(stats[c].train + stats[c].test == sizes[c]);
    }
    CHECK(a.select(Split::Train).size() + a.select(Split::Test).size() == docs.size());
  }

  TEST_CASE("split rejects tiny classes and bad fractions") {
    std::vector<LyricDocument> docs;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      for (int i = 0; i < 3; ++i) docs.push_back(labeled(std::to_string(c * 10 + i), label_from_code(c), "x"));
    CHECK(error_code_of([&] { split_dataset(docs, 0.0, 1); }) == Errc::InvalidArgument);
    docs.pop_back();
    docs.pop_back();
    CHECK(error_code_of([&] { split_dataset(docs, 0.5, 1); }) == Errc::ClassTooSmall);
  }

  TEST_CASE("synthetic corpus plants every class bigram unless dropped") {
    SyntheticConfig cfg;
    cfg.docs_per_class = 30;
    cfg.noise_prob = 0.0;
    const auto docs = generate_synthetic_corpus(cfg);
    REQUIRE(docs.size() == 120);
    for (const auto& d : docs) {
      CHECK(d.tokens.size() == cfg.doc_len);
      for (const auto& bg : synthetic_signal_bigrams(cfg, code(*d.label))) {
        bool found = false;
        for (std::size_t k = 0; k + 1 < d.tokens.size(); ++k)
          found |= d.tokens[k] == synthetic_token(bg[0]) && d.tokens[k + 1] == synthetic_token(bg[1]);
        CHECK(found);
      }
      // Raw text survives cleaning and whitespace segmentation unchanged.
      LyricDocument copy = d;
      preprocess_document(copy, {}, SegmentMode::Whitespace);
      CHECK(copy.tokens == d.tokens);
    }
    CHECK(generate_synthetic_corpus(cfg)[17].tokens == docs[17].tokens);
  }

  TEST_CASE("synthetic corpus rejects infeasible configs") {
    SyntheticConfig cfg;
    cfg.vocab_size = 20;
    CHECK(error_code_of([&] { generate_synthetic_corpus(cfg); }) == Errc::ConfigInfeasible);
    cfg = {};
    cfg.noise_prob = 1.5;
    CHECK(error_code_of([&] { generate_synthetic_corpus(cfg); }) == Errc::ConfigInfeasible);
  }

  TEST_CASE("raw and processed files round-trip") {
    testing::ScratchDir dir("corpus");
    SyntheticConfig cfg;
    cfg.docs_per_class = 12;
    auto docs = generate_synthetic_corpus(cfg);
    docs[0].title = "标题";
    write_raw_jsonl(docs, dir / "raw.jsonl");
    const auto raw = read_raw_jsonl(dir / "raw.jsonl");
    REQUIRE(raw.size() == docs.size());
    CHECK(raw[0].title == "标题");
    CHECK(raw[5].raw_text == docs[5].raw_text);
    CHECK(raw[5].label == docs[5].label);

    auto ds = split_dataset(docs, 0.25, 4);
    write_processed(ds, dir / "data.jsonl");
    const auto back = read_processed(dir / "data.jsonl");
    CHECK(back.split == ds.split);
    REQUIRE(back.documents.size() == ds.documents.size());
    CHECK(back.documents[7].tokens == ds.documents[7].tokens);
    CHECK(back.documents[7].line_count == ds.documents[7].line_count);
  }

  TEST_CASE("parse errors carry the line number") {
    testing::ScratchDir dir("corpus-bad");
    testing::spit(dir / "raw.jsonl",
                  "{\"id\":\"a\",\"label\":\"Quiet\",\"text\":\"一\"}\n{\"id\":\"b\",\"label\":\"Anger\",\"text\":\"二\"}\n");
    try {
      read_raw_jsonl(dir / "raw.jsonl");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownLabel);
      CHECK(e.line() == 2);
    }
    testing::spit(dir / "broken.jsonl", "{\"id\":\n");
    CHECK(error_code_of([&] { read_raw_jsonl(dir / "broken.jsonl"); }) == Errc::ParseError);
    CHECK(error_code_of([&] { read_raw_jsonl(dir / "missing.jsonl"); }) == Errc::Io);
  }

  TEST_CASE("directory input takes the label from the folder name") {
    testing::ScratchDir dir("corpus-dir");
    std::filesystem::create_directories(dir / "Sadness");
    std::filesystem::create_directories(dir / "quiet");
    testing::spit(dir / "Sadness/one.lrc", "[00:01.00]哭泣");
    testing::spit(dir / "quiet/two.lrc", "[00:01.00]安静");
    auto docs = read_raw_input(dir.path());
    REQUIRE(docs.size() == 2);
    std::map<std::string, MoodLabel> by_text;
    for (const auto& d : docs) by_text[clean_lyric_text(d.raw_text)] = *d.label;
    CHECK(by_text["哭泣"] == MoodLabel::Sadness);
    CHECK(by_text["安静"] == MoodLabel::Quiet);
  }
}

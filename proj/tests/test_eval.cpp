#include "doctest.h"

#include <sstream>

#include "moodtag/error.hpp"
#include "moodtag/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace moodtag;

namespace {

std::vector<MoodLabel> labels(std::initializer_list<int> codes) {
  std::vector<MoodLabel> out;
  for (int c : codes) out.push_back(label_from_code(static_cast<std::size_t>(c)));
  return out;
}

std::vector<std::string> words_of(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("confusion matrix rows are truth and columns predictions") {
    const auto cm = confusion_matrix(labels({0, 1, 2, 3, 3}), labels({0, 1, 2, 2, 3}));
    CHECK(cm.counts[3][2] == 1);
    CHECK(cm.counts[2][3] == 0);
    CHECK(cm.total() == 5);
    CHECK(cm.trace() == 4);
    CHECK_THROWS_AS(confusion_matrix(labels({0}), labels({})), Error);
  }

  TEST_CASE("per-class metrics and the unweighted average") {
    const auto r = class_report(confusion_matrix(labels({0, 1, 2, 3, 3}), labels({0, 1, 2, 2, 3})));
    CHECK(r.per_class[2].precision == doctest::Approx(0.5));
    CHECK(r.per_class[3].recall == doctest::Approx(0.5));
    CHECK(r.per_class[3].f1 == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[3].support == 2);
    CHECK(r.average.precision == doctest::Approx(0.875));
    CHECK(r.average.f1 == doctest::Approx((1 + 1 + 2.0 / 3 + 2.0 / 3) / 4));
    CHECK(r.average.support == 5);
    CHECK(r.accuracy == doctest::Approx(0.8));
  }

  TEST_CASE("classes never predicted have zero precision instead of NaN") {
    const auto r = class_report(confusion_matrix(labels({0, 1}), labels({0, 0})));
    CHECK(r.per_class[1].precision == 0.0);
    CHECK(r.per_class[1].f1 == 0.0);
    CHECK(r.per_class[2].support == 0);
    CHECK_THROWS_AS(class_report(ConfusionMatrix{}), Error);
    CHECK_THROWS_AS(accuracy(ConfusionMatrix{}), Error);
  }

  TEST_CASE("rendered report has the four metric columns and an Avg/Total row") {
    const auto r = class_report(confusion_matrix(labels({0, 1, 2, 3, 3}), labels({0, 1, 2, 2, 3})));
    std::istringstream text(render_report(r));
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(text, line);) rows.push_back(words_of(line));
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == std::vector<std::string>{"Precision", "Recall", "F1-score", "Support"});
    CHECK(rows[3] == std::vector<std::string>{"Sadness", "0.50", "1.00", "0.67", "1"});
    CHECK(rows[5].front() == "Avg/Total");
    CHECK(rows[5].back() == "5");
    CHECK(report_csv(r).rfind("class,precision,recall,f1,support\n", 0) == 0);
    CHECK(confusion_csv(confusion_matrix(labels({3}), labels({2}))) ==
          "true,Happiness,Catharsis,Sadness,Quiet\nHappiness,0,0,0,0\nCatharsis,0,0,0,0\nSadness,0,0,0,0\n"
          "Quiet,0,0,1,0\n");
  }

  TEST_CASE("comparison table orders canonical models first") {
    const std::map<std::string, double> results = {{"Zeta", 0.5}, {"RNN", 0.6413}, {"CNN", 0.7273}};
    std::istringstream cols(comparison_table(results));
    std::string head, body;
    std::getline(cols, head);
    std::getline(cols, body);
    CHECK(words_of(head) == std::vector<std::string>{"Models", "CNN", "RNN", "Zeta"});
    CHECK(words_of(body) == std::vector<std::string>{"Accuracy", "(%)", "72.73", "64.13", "50.00"});
    std::istringstream rows(comparison_table({{"CNN", 0.7273}}, TableLayout::Rows));
    std::getline(rows, head);
    std::getline(rows, body);
    CHECK(words_of(body) == std::vector<std::string>{"CNN", "72.73"});
  }

  TEST_CASE("word frequency report ranks by count then token") {
    LabeledDataset ds;
    auto doc = [](MoodLabel l, std::vector<std::string> toks) {
      LyricDocument d;
      d.id = "x";
      d.label = l;
      d.tokens = std::move(toks);
      return d;
    };
    ds.documents = {doc(MoodLabel::Quiet, {"说", "爱", "的", "爱"}), doc(MoodLabel::Quiet, {"想", "说", "的"}),
                    doc(MoodLabel::Sadness, {"哭", "哭", "哭"})};
    ds.split.assign(3, Split::Train);
    const auto top = word_frequency_report(ds, MoodLabel::Quiet, 3, {"的"});
    REQUIRE(top.size() == 3);
    CHECK(top[0].second == 2);
    CHECK(top[0].first < top[1].first);
    CHECK(top[2] == std::pair<std::string, std::size_t>{"想", 1});
    CHECK_THROWS_AS(word_frequency_report(ds, MoodLabel::Happiness, 3), Error);
  }

  TEST_CASE("overlap score is the Jaccard index of the token sets") {
    const std::vector<std::string> a = {"爱", "说", "想", "爱"}, b = {"说", "梦"};
    CHECK(overlap_score(a, b) == doctest::Approx(0.25));
    CHECK(overlap_score({}, {}) == 0.0);
    CHECK(overlap_score(a, a) == 1.0);
  }

  TEST_CASE("published sad and quiet top words overlap on 19 of 39 tokens") {
    const auto& sad = oracle::sad_song_words();
    const auto& quiet = oracle::quiet_song_words();
    CHECK(sad.size() == 29);
    CHECK(quiet.size() == 29);
    const double expected = oracle::jaccard(sad, quiet);
    CHECK(expected == doctest::Approx(19.0 / 39.0).epsilon(1e-15));
    CHECK(overlap_score(sad, quiet) == expected);
  }

  TEST_CASE("stoplist files skip comments and blank lines") {
    testing::ScratchDir dir("stop");
    testing::spit(dir / "stop.txt", "# words\n的\n\n了\n");
    const auto stop = load_stoplist(dir / "stop.txt");
    CHECK(stop.size() == 2);
    CHECK(stop.contains("了"));
  }
}

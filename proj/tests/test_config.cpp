#include "doctest.h"

#include <set>
#include <sstream>

#include "moodtag/config.hpp"
#include "moodtag/error.hpp"
#include "moodtag/pipeline.hpp"
#include "support.hpp"

using namespace moodtag;

TEST_SUITE("config") {
  TEST_CASE("every documented key has a default and help text") {
    std::set<std::string> names;
    for (const auto& k : config_keys()) {
      CHECK(std::string_view(k.help).size() > 0);
      CHECK(names.insert(k.name).second);
    }
    const RunConfig cfg;
    CHECK(cfg.u64("seed") == 1);
    CHECK(cfg.real("test_fraction") == 0.1);
    CHECK(cfg.size_list("cnn.widths") == std::vector<std::size_t>{2, 3, 4, 5});
    CHECK(cfg.flag("dedupe"));
    CHECK_FALSE(cfg.has("model"));
  }

  TEST_CASE("files accept comments, blanks and whitespace around keys") {
    RunConfig cfg;
    std::istringstream in("# experiment\n\n  seed = 42 \ncnn.widths=3,5  # trailing\ntrain.shuffle = false\n");
    cfg.parse(in);
    CHECK(cfg.u64("seed") == 42);
    CHECK(cfg.size_list("cnn.widths") == std::vector<std::size_t>{3, 5});
    CHECK_FALSE(cfg.flag("train.shuffle"));
  }

  TEST_CASE("unknown keys and malformed lines report their line") {
    RunConfig cfg;
    std::istringstream unknown("seed=1\nbogus=2\n");
    try {
      cfg.parse(unknown);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
      CHECK(e.line() == 2);
    }
    std::istringstream no_equals("seed 1\n");
    CHECK_THROWS_AS(cfg.parse(no_equals), Error);
    CHECK_THROWS_AS(cfg.set("nope", "1"), Error);
    CHECK_THROWS_AS(cfg.set_assignment("seed"), Error);
  }

  TEST_CASE("typed accessors reject values of the wrong type") {
    RunConfig cfg;
    cfg.set("seed", "abc");
    CHECK_THROWS_AS(cfg.u64("seed"), Error);
    cfg.set("train.lr", "fast");
    CHECK_THROWS_AS(cfg.real("train.lr"), Error);
    cfg.set("dedupe", "perhaps");
    CHECK_THROWS_AS(cfg.flag("dedupe"), Error);
    cfg.set("cnn.widths", "2,,3");
    CHECK_THROWS_AS(cfg.size_list("cnn.widths"), Error);
  }

  TEST_CASE("dump reloads to the same configuration") {
    RunConfig cfg;
    cfg.set_assignment("train.lr=0.005");
    cfg.set("output", "out dir/model.txt");
    testing::ScratchDir dir("config");
    testing::spit(dir / "run.cfg", cfg.dump());
    RunConfig back;
    back.load(dir / "run.cfg");
    CHECK(back.dump() == cfg.dump());
    CHECK(back.str("output") == "out dir/model.txt");
  }

  TEST_CASE("config sections translate into module settings") {
    RunConfig cfg;
    cfg.set("cbow.dim", "16");
    cfg.set("cnn.filters", "8");
    cfg.set("cnn.order", "conv-norm-tanh");
    cfg.set("train.epochs", "3");
    cfg.set("svm.gamma", "0.25");
    cfg.set("synth.noise", "0");
    CHECK(cbow_config(cfg).dim == 16);
    const auto cnn = cnn_config(cfg, 16);
    CHECK(cnn.filters == 8);
    CHECK(cnn.embed_dim == 16);
    CHECK(cnn.order == nn::BranchOrder::ConvNormTanh);
    CHECK(train_config(cfg).epochs == 3);
    CHECK(smo_options(cfg).gamma == 0.25);
    CHECK(synthetic_config(cfg).noise_prob == 0.0);
    cfg.set("cnn.order", "sideways");
    CHECK_THROWS_AS(cnn_config(cfg, 16), Error);
    cfg.set("train.batch_size", "0");
    CHECK_THROWS_AS(train_config(cfg), Error);
  }
}

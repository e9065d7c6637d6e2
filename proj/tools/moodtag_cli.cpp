// moodtag: preprocess, synthesize, train, evaluate and tag Chinese lyrics.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or configuration
// error, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "moodtag/config.hpp"
#include "moodtag/corpus.hpp"
#include "moodtag/embeddings.hpp"
#include "moodtag/error.hpp"
#include "moodtag/eval.hpp"
#include "moodtag/features.hpp"
#include "moodtag/nn/gradcheck.hpp"
#include "moodtag/nn/layers.hpp"
#include "moodtag/pipeline.hpp"

namespace fs = std::filesystem;
using namespace moodtag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Raised for problems the user must fix before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settings shared by every subcommand: a config file, --set overrides and
// per-command flags that alias config keys.
struct CommandSettings {
  std::string config_file;
  std::vector<std::string> assignments;
  std::vector<std::pair<std::string, std::string>> aliases;  // key, flag value
  std::map<std::string, std::string> flag_values;

  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    aliases.emplace_back(key, flag);
    app->add_option(flag, flag_values[key], help);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load(config_file);
    for (const auto& [key, flag] : aliases) {
      const auto& v = flag_values.at(key);
      if (!v.empty()) cfg.set(key, v);
    }
    for (const auto& a : assignments) cfg.set_assignment(a);
    return cfg;
  }
};

void add_common(CLI::App* app, CommandSettings& s) {
  app->add_option("--config", s.config_file, "key=value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", s.assignments, "override one config key (key=value); repeatable");
  s.bind(app, "--seed", "seed", "random seed");
}

fs::path require_input(const RunConfig& cfg, const std::string& key) {
  const auto& v = cfg.str(key);
  if (v.empty()) throw UsageError("missing required setting '" + key + "'");
  if (!fs::exists(v)) throw UsageError(key + ": no such file or directory: " + v);
  return v;
}

fs::path require_output(const RunConfig& cfg, const std::string& key) {
  const auto& v = cfg.str(key);
  if (v.empty()) throw UsageError("missing required setting '" + key + "'");
  const fs::path p(v);
  if (p.has_parent_path() && !fs::is_directory(p.parent_path()))
    throw UsageError(key + ": directory does not exist: " + p.parent_path().string());
  return p;
}

void check_optional_output(const RunConfig& cfg, const std::string& key) {
  if (cfg.has(key)) require_output(cfg, key);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << text;
}

SegmentMode segment_mode_of(const RunConfig& cfg) {
  const auto mode = parse_segment_mode(cfg.str("segment_mode"));
  if (!mode) throw UsageError("segment_mode must be lexicon or whitespace");
  return *mode;
}

SegmenterLexicon segmenter_of(const RunConfig& cfg, SegmentMode mode) {
  if (mode == SegmentMode::Whitespace) return {};
  return SegmenterLexicon::load(require_input(cfg, "segment_lexicon"));
}

std::string stats_table(const LabeledDataset& ds) {
  const auto stats = dataset_stats(ds);
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %8s %8s %8s\n", "Class", "Total", "Train", "Test");
  out << buf;
  ClassCounts sum;
  for (auto label : kAllLabels) {
    const auto& c = stats[code(label)];
    std::snprintf(buf, sizeof buf, "%-10s %8zu %8zu %8zu\n", std::string(label_name(label)).c_str(), c.total, c.train,
                  c.test);
    out << buf;
    sum.total += c.total;
    sum.train += c.train;
    sum.test += c.test;
  }
  std::snprintf(buf, sizeof buf, "%-10s %8zu %8zu %8zu\n", "Total", sum.total, sum.train, sum.test);
  out << buf;
  return out.str();
}

// Subcommands

int run_preprocess(const RunConfig& cfg) {
  const auto input = require_input(cfg, "input");
  const auto output = require_output(cfg, "output");
  const SegmentMode mode = segment_mode_of(cfg);
  const SegmenterLexicon lexicon = segmenter_of(cfg, mode);
  const double fraction = cfg.real("test_fraction");
  const std::uint64_t seed = cfg.u64("seed");

  const auto result =
      preprocess_corpus(read_raw_input(input), lexicon, mode, cfg.flag("dedupe"), fraction, seed);
  const auto& ds = result.dataset;
  write_processed(ds, output);
  std::cout << "read " << result.read << " documents, dropped " << result.duplicates << " duplicates and " << result.empty
            << " empty after cleaning\n"
            << stats_table(ds);
  return kExitOk;
}

int run_synth(const RunConfig& cfg) {
  const auto output = require_output(cfg, "output");
  const auto docs = generate_synthetic_corpus(synthetic_config(cfg));
  write_raw_jsonl(docs, output);
  std::cout << "wrote " << docs.size() << " synthetic documents to " << output.string() << '\n';
  return kExitOk;
}

int run_train_embed(const RunConfig& cfg) {
  const auto dataset_path = require_input(cfg, "dataset");
  const auto output = require_output(cfg, "output");
  const CbowConfig cbow = cbow_config(cfg);
  const auto ds = read_processed(dataset_path);

  std::vector<std::vector<std::string>> sentences;
  for (const auto* d : ds.select(Split::Train)) sentences.push_back(d->tokens);
  const Vocabulary vocab = build_vocabulary(sentences, cbow.min_count);
  std::vector<std::vector<TokenId>> corpus;
  corpus.reserve(sentences.size());
  for (const auto& s : sentences) corpus.push_back(encode_tokens(s, vocab, s.size()));
  const auto result = train_cbow(corpus, vocab, cbow);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::fprintf(stderr, "epoch %zu loss %.6f\n", e + 1, result.epoch_loss[e]);
  save_embeddings(result.embeddings, output);
  std::cout << "wrote " << vocab.word_count() << " vectors of dimension " << cbow.dim << " to " << output.string()
            << '\n';
  return kExitOk;
}

int run_train(const RunConfig& cfg, const std::string& kind_name) {
  const auto kind = parse_model_kind(kind_name);
  if (!kind) throw UsageError("unknown model kind '" + kind_name + "' (cnn, rnn, lstm, svm-tfidf, svm-liwc)");
  const auto dataset_path = require_input(cfg, "dataset");
  const auto model_path = require_output(cfg, "model");
  const fs::path log_path = cfg.has("log") ? require_output(cfg, "log") : fs::path(model_path.string() + ".log.csv");
  std::optional<EmbeddingMatrix> emb;
  std::optional<CategoryLexicon> lexicon;
  if (is_neural(*kind)) emb = load_embeddings(require_input(cfg, "embeddings"));
  if (*kind == ModelKind::SvmLiwc) lexicon = CategoryLexicon::load(require_input(cfg, "liwc_lexicon"));

  const auto ds = read_processed(dataset_path);
  const auto train_docs = ds.select(Split::Train);
  if (train_docs.empty()) throw UsageError("the dataset has no training documents");
  TrainInputs inputs{emb ? &*emb : nullptr, lexicon ? &*lexicon : nullptr};
  const auto result = train_model(*kind, train_docs, cfg, inputs);
  save_trained_model(result.model, model_path);
  write_text(log_path, training_log_csv(result.log));
  for (const auto& row : result.log)
    std::fprintf(stderr, "epoch %zu loss %.6f accuracy %.4f\n", row.epoch, row.loss, row.accuracy);
  const auto& last = result.log.back();
  std::printf("%s trained on %zu documents: final loss %.6f, train accuracy %.2f%%\n",
              std::string(model_display_name(*kind)).c_str(), train_docs.size(), last.loss, 100.0 * last.accuracy);
  return kExitOk;
}

int run_evaluate(const RunConfig& cfg) {
  const auto model_path = require_input(cfg, "model");
  const auto dataset_path = require_input(cfg, "dataset");
  check_optional_output(cfg, "report_csv");
  check_optional_output(cfg, "confusion_csv");
  std::optional<Split> split;
  if (cfg.str("split") != "all") {
    split = parse_split(cfg.str("split"));
    if (!split) throw UsageError("split must be train, test or all");
  }
  const auto model = load_trained_model(model_path);
  std::optional<EmbeddingMatrix> emb;
  if (is_neural(model.kind)) emb = load_embeddings(require_input(cfg, "embeddings"));
  const auto ds = read_processed(dataset_path);
  const auto docs = select_documents(ds, split);
  if (docs.empty()) throw UsageError("the selected split is empty");

  const auto preds = predict_documents(model, docs, emb ? &*emb : nullptr);
  std::vector<MoodLabel> truth, predicted;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i]->label) fail(Errc::UnknownLabel, "document " + docs[i]->id + " has no label");
    truth.push_back(*docs[i]->label);
    predicted.push_back(preds[i].label);
  }
  const auto cm = confusion_matrix(truth, predicted);
  const auto report = class_report(cm);
  std::cout << render_report(report) << '\n'
            << render_confusion(cm) << '\n'
            << comparison_table({{std::string(model_display_name(model.kind)), report.accuracy}});
  if (cfg.has("report_csv")) write_text(cfg.str("report_csv"), report_csv(report));
  if (cfg.has("confusion_csv")) write_text(cfg.str("confusion_csv"), confusion_csv(cm));
  return kExitOk;
}

int run_tag(const RunConfig& cfg) {
  const auto model_path = require_input(cfg, "model");
  const auto input = require_input(cfg, "input");
  const SegmentMode mode = segment_mode_of(cfg);
  const SegmenterLexicon lexicon = segmenter_of(cfg, mode);
  const auto model = load_trained_model(model_path);
  std::optional<EmbeddingMatrix> emb;
  if (is_neural(model.kind)) emb = load_embeddings(require_input(cfg, "embeddings"));

  std::ifstream in(input, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + input.string());
  LyricDocument doc;
  doc.id = input.filename().string();
  doc.raw_text.assign(std::istreambuf_iterator<char>(in), {});
  preprocess_document(doc, lexicon, mode);
  if (doc.tokens.empty()) throw UsageError("no lyric text remains after cleaning " + input.string());

  const LyricDocument* docs[] = {&doc};
  const auto pred = predict_documents(model, docs, emb ? &*emb : nullptr).front();
  std::printf("%s\n", std::string(label_name(pred.label)).c_str());
  const char* what = is_neural(model.kind) ? "probability" : "decision";
  for (auto label : kAllLabels)
    std::printf("  %-10s %s %.6f\n", std::string(label_name(label)).c_str(), what, pred.scores[code(label)]);
  return kExitOk;
}

int run_gradcheck(const RunConfig& cfg, const std::string& target, bool corrupt_tanh) {
  nn::GradCheckOptions opts;
  opts.epsilon = cfg.real("gradcheck.epsilon");
  opts.seed = cfg.u64("seed");
  if (!(opts.epsilon > 0.0)) throw UsageError("gradcheck.epsilon must be positive");
  if (target != "all" && target != "layers" && target != "cnn" && target != "rnn" && target != "lstm" &&
      target != "cbow")
    throw UsageError("gradcheck target must be one of layers, cnn, rnn, lstm, cbow, all");
  nn::set_tanh_derivative_fault(corrupt_tanh);
  const auto entries = nn::run_gradcheck(target, opts);
  nn::set_tanh_derivative_fault(false);

  std::vector<std::string> offenders;
  for (const auto& e : entries) {
    std::printf("%-4s %-11s %-16s max rel error %.3e (limit %.0e)\n", e.passed() ? "ok" : "FAIL", e.component.c_str(),
                e.tensor.c_str(), e.max_rel_error, e.threshold);
    if (!e.passed() && std::find(offenders.begin(), offenders.end(), e.component) == offenders.end())
      offenders.push_back(e.component);
  }
  if (offenders.empty()) {
    std::printf("all %zu gradient checks passed\n", entries.size());
    return kExitOk;
  }
  std::string list;
  for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
  std::printf("gradient check failed for: %s\n", list.c_str());
  return kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mood tagging for Chinese song lyrics"};
  app.require_subcommand(0, 1);
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");

  CommandSettings pre, synth, embed, train, eval, tag, grad;

  auto* c_pre = app.add_subcommand("preprocess", "clean, segment and split a raw lyric collection");
  add_common(c_pre, pre);
  pre.bind(c_pre, "--input", "input", "JSON Lines file or class-per-subdirectory tree");
  pre.bind(c_pre, "--output", "output", "processed dataset to write");
  pre.bind(c_pre, "--segment-lexicon", "segment_lexicon", "word list for segmentation");
  pre.bind(c_pre, "--mode", "segment_mode", "lexicon | whitespace");

  auto* c_synth = app.add_subcommand("synth", "write a synthetic labelled corpus");
  add_common(c_synth, synth);
  synth.bind(c_synth, "--output", "output", "raw JSON Lines file to write");

  auto* c_embed = app.add_subcommand("train-embed", "train CBOW word vectors on a processed dataset");
  add_common(c_embed, embed);
  embed.bind(c_embed, "--dataset", "dataset", "processed dataset");
  embed.bind(c_embed, "--output", "output", "word2vec text file to write");

  std::string kind;
  auto* c_train = app.add_subcommand("train", "train one of cnn, rnn, lstm, svm-tfidf, svm-liwc");
  add_common(c_train, train);
  c_train->add_option("kind", kind, "model kind")->required();
  train.bind(c_train, "--dataset", "dataset", "processed dataset");
  train.bind(c_train, "--embeddings", "embeddings", "word vectors (neural kinds)");
  train.bind(c_train, "--lexicon", "liwc_lexicon", "category lexicon (svm-liwc)");
  train.bind(c_train, "--output", "model", "model file to write");
  train.bind(c_train, "--log", "log", "training log CSV");

  auto* c_eval = app.add_subcommand("evaluate", "report per-class metrics of a model on a dataset split");
  add_common(c_eval, eval);
  eval.bind(c_eval, "--model", "model", "model file");
  eval.bind(c_eval, "--dataset", "dataset", "processed dataset");
  eval.bind(c_eval, "--embeddings", "embeddings", "word vectors (neural kinds)");
  eval.bind(c_eval, "--split", "split", "train | test | all");
  eval.bind(c_eval, "--report-csv", "report_csv", "write the class report as CSV");
  eval.bind(c_eval, "--confusion-csv", "confusion_csv", "write the confusion matrix as CSV");

  auto* c_tag = app.add_subcommand("tag", "predict the mood of one lyric file");
  add_common(c_tag, tag);
  tag.bind(c_tag, "--model", "model", "model file");
  tag.bind(c_tag, "--embeddings", "embeddings", "word vectors (neural kinds)");
  tag.bind(c_tag, "--input", "input", "lyric file (plain text or LRC)");
  tag.bind(c_tag, "--segment-lexicon", "segment_lexicon", "word list for segmentation");
  tag.bind(c_tag, "--mode", "segment_mode", "lexicon | whitespace");

  std::string target = "all";
  bool corrupt_tanh = false;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  add_common(c_grad, grad);
  c_grad->add_option("target", target, "layers | cnn | rnn | lstm | cbow | all");
  c_grad->add_flag("--corrupt-tanh", corrupt_tanh, "inject a wrong tanh derivative (self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (list_keys) {
      for (const auto& k : config_keys())
        std::printf("%-24s %-16s %s\n", k.name, *k.default_value ? k.default_value : "\"\"", k.help);
      return kExitOk;
    }
    if (*c_pre) return run_preprocess(pre.resolve());
    if (*c_synth) return run_synth(synth.resolve());
    if (*c_embed) return run_train_embed(embed.resolve());
    if (*c_train) return run_train(train.resolve(), kind);
    if (*c_eval) return run_evaluate(eval.resolve());
    if (*c_tag) return run_tag(tag.resolve());
    if (*c_grad) return run_gradcheck(grad.resolve(), target, corrupt_tanh);
    std::cout << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "moodtag: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "moodtag: %s\n", e.what());
    return e.code() == Errc::NonFiniteLoss ? kExitNumeric : kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "moodtag: %s\n", e.what());
    return kExitUsage;
  }
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "moodtag/config.hpp"
#include "moodtag/corpus.hpp"
#include "moodtag/embeddings.hpp"
#include "moodtag/error.hpp"
#include "moodtag/eval.hpp"
#include "moodtag/features.hpp"
#include "moodtag/nn/gradcheck.hpp"
#include "moodtag/pipeline.hpp"
#include "moodtag/svm.hpp"

namespace py = pybind11;
using namespace moodtag;

namespace {

RunConfig config_from(const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

py::dict document_dict(const LyricDocument& d) {
  py::dict out;
  out["id"] = d.id;
  out["label"] = d.label ? py::cast(std::string(label_name(*d.label))) : py::none();
  out["text"] = d.raw_text;
  out["tokens"] = d.tokens;
  return out;
}

std::vector<LyricDocument> documents_from(const std::vector<std::vector<std::string>>& token_lists) {
  std::vector<LyricDocument> docs(token_lists.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    docs[i].id = std::to_string(i);
    docs[i].tokens = token_lists[i];
    docs[i].line_count = 1;
  }
  return docs;
}

// A trained model together with the embeddings a neural kind reads.
struct PyModel {
  TrainedModel model;
  std::optional<EmbeddingMatrix> embeddings;

  std::vector<std::pair<std::string, std::array<double, kNumClasses>>> predict(
      const std::vector<std::vector<std::string>>& token_lists) const {
    const auto docs = documents_from(token_lists);
    std::vector<const LyricDocument*> ptrs;
    for (const auto& d : docs) ptrs.push_back(&d);
    std::vector<std::pair<std::string, std::array<double, kNumClasses>>> out;
    for (const auto& p : predict_documents(model, ptrs, embeddings ? &*embeddings : nullptr))
      out.emplace_back(std::string(label_name(p.label)), p.scores);
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_moodtag, m) {
  m.doc() = "Mood tagging for Chinese song lyrics";

  static py::exception<Error> error(m, "MoodtagError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("LABELS") = py::make_tuple("Happiness", "Catharsis", "Sadness", "Quiet");

  m.def("config_defaults", [] {
    std::map<std::string, std::string> out;
    for (const auto& k : config_keys()) out[k.name] = k.default_value;
    return out;
  });

  m.def("clean_lyric_text", &clean_lyric_text, py::arg("raw"));
  m.def(
      "segment",
      [](const std::string& text, const std::vector<std::string>& lexicon) {
        if (lexicon.empty()) return segment(text, SegmenterLexicon{}, SegmentMode::Whitespace);
        return segment(text, SegmenterLexicon(lexicon), SegmentMode::Lexicon);
      },
      py::arg("text"), py::arg("lexicon") = std::vector<std::string>{},
      "Forward maximum matching against `lexicon`, or whitespace splitting when it is empty.");

  m.def(
      "synthetic_corpus",
      [](const std::map<std::string, std::string>& overrides) {
        py::list out;
        for (const auto& d : generate_synthetic_corpus(synthetic_config(config_from(overrides))))
          out.append(document_dict(d));
        return out;
      },
      py::arg("config") = std::map<std::string, std::string>{});

  m.def(
      "write_synthetic",
      [](const std::string& path, const std::map<std::string, std::string>& overrides) {
        const auto docs = generate_synthetic_corpus(synthetic_config(config_from(overrides)));
        write_raw_jsonl(docs, path);
        return docs.size();
      },
      py::arg("path"), py::arg("config") = std::map<std::string, std::string>{},
      "Writes a synthetic raw corpus as JSON Lines; returns the document count.");

  m.def(
      "preprocess",
      [](const std::string& input, const std::string& output, const std::map<std::string, std::string>& overrides,
         const std::vector<std::string>& lexicon) {
        const RunConfig cfg = config_from(overrides);
        const auto mode = parse_segment_mode(cfg.str("segment_mode"));
        if (!mode) throw Error(Errc::InvalidArgument, "segment_mode must be lexicon or whitespace");
        const auto result = preprocess_corpus(read_raw_input(input), SegmenterLexicon(lexicon), *mode,
                                              cfg.flag("dedupe"), cfg.real("test_fraction"), cfg.u64("seed"));
        write_processed(result.dataset, output);
        py::dict stats;
        for (auto label : kAllLabels) {
          const auto& c = dataset_stats(result.dataset)[code(label)];
          stats[py::str(std::string(label_name(label)))] = py::make_tuple(c.total, c.train, c.test);
        }
        return stats;
      },
      py::arg("input"), py::arg("output"), py::arg("config") = std::map<std::string, std::string>{},
      py::arg("lexicon") = std::vector<std::string>{},
      "Cleans, segments and splits a raw corpus; returns {class: (total, train, test)}.");

  m.def(
      "split_counts",
      [](const std::vector<std::size_t>& class_sizes, double test_fraction) {
        std::vector<std::size_t> out;
        for (auto n : class_sizes) out.push_back(stratified_test_count(n, test_fraction));
        return out;
      },
      py::arg("class_sizes"), py::arg("test_fraction") = 0.1);

  m.def(
      "tfidf",
      [](const std::vector<std::vector<std::string>>& train_docs, const std::vector<std::vector<std::string>>& docs) {
        const auto model = fit_tfidf(train_docs, build_vocabulary(train_docs, 1));
        std::vector<std::vector<double>> out;
        for (const auto& d : docs) out.push_back(transform_tfidf(d, model).values);
        return py::make_tuple(model.vocab().tokens(), out);
      },
      py::arg("train_docs"), py::arg("docs"),
      "Returns (schema, rows); schema[0:2] are the reserved padding and unknown slots.");

  m.def("rbf_kernel", [](const std::vector<double>& x, const std::vector<double>& z,
                         double gamma) { return rbf_kernel(x, z, gamma); },
        py::arg("x"), py::arg("z"), py::arg("gamma"));

  m.def(
      "train_embeddings",
      [](const std::vector<std::vector<std::string>>& sentences, const std::string& path,
         const std::map<std::string, std::string>& overrides) {
        const auto cfg = cbow_config(config_from(overrides));
        const Vocabulary vocab = build_vocabulary(sentences, cfg.min_count);
        std::vector<std::vector<TokenId>> corpus;
        for (const auto& s : sentences) corpus.push_back(encode_tokens(s, vocab, s.size()));
        const auto result = train_cbow(corpus, vocab, cfg);
        save_embeddings(result.embeddings, path);
        return result.epoch_loss;
      },
      py::arg("sentences"), py::arg("path"), py::arg("config") = std::map<std::string, std::string>{},
      "Trains CBOW vectors, writes them to `path` and returns the per-epoch loss.");

  m.def(
      "cosine_similarity",
      [](const std::string& path, const std::string& a, const std::string& b) {
        const auto emb = load_embeddings(path);
        const auto ia = emb.vocab().find(a), ib = emb.vocab().find(b);
        if (!ia || !ib) throw Error(Errc::UnknownWord, "word not in the embeddings");
        return cosine_similarity(emb.input_row(*ia), emb.input_row(*ib));
      },
      py::arg("embeddings"), py::arg("a"), py::arg("b"));

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", [](const PyModel& p) { return std::string(model_kind_name(p.model.kind)); })
      .def("predict", &PyModel::predict, py::arg("token_lists"),
           "List of (label, scores); scores are probabilities for neural kinds and decision values for SVMs.")
      .def("save", [](const PyModel& p, const std::string& path) { save_trained_model(p.model, path); });

  m.def(
      "train",
      [](const std::string& kind_name, const std::string& dataset, const std::map<std::string, std::string>& overrides,
         const std::optional<std::string>& embeddings, const std::optional<std::string>& lexicon) {
        const auto kind = parse_model_kind(kind_name);
        if (!kind) throw Error(Errc::InvalidArgument, "unknown model kind '" + kind_name + "'");
        const RunConfig cfg = config_from(overrides);
        PyModel out;
        std::optional<CategoryLexicon> lex;
        if (embeddings) out.embeddings = load_embeddings(*embeddings);
        if (lexicon) lex = CategoryLexicon::load(*lexicon);
        const auto ds = read_processed(dataset);
        const auto docs = ds.select(Split::Train);
        auto result = train_model(*kind, docs, cfg, {out.embeddings ? &*out.embeddings : nullptr, lex ? &*lex : nullptr});
        out.model = std::move(result.model);
        std::vector<std::tuple<std::size_t, double, double>> log;
        for (const auto& r : result.log) log.emplace_back(r.epoch, r.loss, r.accuracy);
        return py::make_tuple(std::move(out), log);
      },
      py::arg("kind"), py::arg("dataset"), py::arg("config") = std::map<std::string, std::string>{},
      py::arg("embeddings") = py::none(), py::arg("lexicon") = py::none(),
      "Trains on the train split of a processed dataset; returns (model, [(epoch, loss, accuracy)]).");

  m.def(
      "load_model",
      [](const std::string& path, const std::optional<std::string>& embeddings) {
        PyModel out;
        out.model = load_trained_model(path);
        if (embeddings) out.embeddings = load_embeddings(*embeddings);
        return out;
      },
      py::arg("path"), py::arg("embeddings") = py::none());

  m.def(
      "class_report",
      [](const std::vector<int>& truth, const std::vector<int>& predicted) {
        std::vector<MoodLabel> t, p;
        for (int c : truth) t.push_back(label_from_code(static_cast<std::size_t>(c)));
        for (int c : predicted) p.push_back(label_from_code(static_cast<std::size_t>(c)));
        const auto cm = confusion_matrix(t, p);
        const auto r = class_report(cm);
        py::dict out;
        for (auto label : kAllLabels) {
          const auto& c = r.per_class[code(label)];
          out[py::str(std::string(label_name(label)))] = py::make_tuple(c.precision, c.recall, c.f1, c.support);
        }
        out["Avg/Total"] = py::make_tuple(r.average.precision, r.average.recall, r.average.f1, r.average.support);
        out["accuracy"] = r.accuracy;
        out["text"] = render_report(r);
        return out;
      },
      py::arg("truth"), py::arg("predicted"), "Class codes 0..3 in, per-class metrics and rendered text out.");

  m.def(
      "gradcheck",
      [](const std::string& target) {
        std::vector<std::tuple<std::string, std::string, double, bool>> out;
        for (const auto& e : nn::run_gradcheck(target, {}))
          out.emplace_back(e.component, e.tensor, e.max_rel_error, e.passed());
        return out;
      },
      py::arg("target") = "all");
}

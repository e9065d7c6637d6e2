#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "moodtag/corpus.hpp"

namespace moodtag {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t trace() const;
};

ConfusionMatrix confusion_matrix(std::span<const MoodLabel> truth, std::span<const MoodLabel> predicted);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassReport {
  std::array<ClassMetrics, kNumClasses> per_class;
  ClassMetrics average;  // unweighted mean over classes; support is the total
  double accuracy = 0.0;
};

/// Throws EmptyMatrix when the matrix holds no documents.
ClassReport class_report(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

/// Aligned text: one row per class plus Avg/Total, columns
/// Precision, Recall, F1-score, Support, two decimals.
std::string render_report(const ClassReport& report);
std::string report_csv(const ClassReport& report);
std::string render_confusion(const ConfusionMatrix& cm);
std::string confusion_csv(const ConfusionMatrix& cm);

/// Canonical model names in display order.
inline constexpr std::array<const char*, 5> kComparisonModels = {"TF-IDF+SVM", "LIWC+SVM", "CNN", "RNN", "LSTM"};

enum class TableLayout {
  Columns,  // one column per model, a single "Accuracy (%)" row
  Rows,     // one "name value" row per model
};

/// Accuracies in [0, 1] rendered as percentages with two decimals. Canonical
/// names come first in canonical order; any others follow alphabetically.
std::string comparison_table(const std::map<std::string, double>& results, TableLayout layout = TableLayout::Columns);

/// Token counts over every document of `label`, stoplist removed, highest
/// count first with lexicographic tie-breaking. Throws UnknownClass when the
/// class has no documents.
std::vector<std::pair<std::string, std::size_t>> word_frequency_report(
    const LabeledDataset& ds, MoodLabel label, std::size_t top_k, const std::unordered_set<std::string>& stoplist = {});

/// Jaccard similarity of the token sets; 0 when both are empty.
double overlap_score(std::span<const std::string> a, std::span<const std::string> b);

/// One word per line, '#' comments and blank lines ignored.
std::unordered_set<std::string> load_stoplist(const std::filesystem::path& path);

}  // namespace moodtag

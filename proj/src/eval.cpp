#include "moodtag/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "moodtag/error.hpp"

namespace moodtag {

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : counts)
    for (auto v : row) s += v;
  return s;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) s += counts[c][c];
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const MoodLabel> truth, std::span<const MoodLabel> predicted) {
  if (truth.size() != predicted.size())
    fail(Errc::LengthMismatch, std::to_string(truth.size()) + " true labels but " + std::to_string(predicted.size()) +
                                   " predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts[code(truth[i])][code(predicted[i])];
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) fail(Errc::EmptyMatrix, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

ClassReport class_report(const ConfusionMatrix& cm) {
  ClassReport r;
  r.accuracy = accuracy(cm);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += cm.counts[c][k];
      col += cm.counts[k][c];
    }
    const double hit = static_cast<double>(cm.counts[c][c]);
    auto& m = r.per_class[c];
    m.precision = col ? hit / static_cast<double>(col) : 0.0;
    m.recall = row ? hit / static_cast<double>(row) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.support = row;
    r.average.precision += m.precision / kNumClasses;
    r.average.recall += m.recall / kNumClasses;
    r.average.f1 += m.f1 / kNumClasses;
    r.average.support += row;
  }
  return r;
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_report(const ClassReport& report) {
  constexpr std::size_t kName = 10, kCol = 10;
  std::ostringstream out;
  out << pad_right("", kName);
  for (const char* h : {"Precision", "Recall", "F1-score", "Support"}) out << pad_left(h, kCol);
  out << '\n';
  auto row = [&](const std::string& name, const ClassMetrics& m) {
    out << pad_right(name, kName) << pad_left(fixed2(m.precision), kCol) << pad_left(fixed2(m.recall), kCol)
        << pad_left(fixed2(m.f1), kCol) << pad_left(std::to_string(m.support), kCol) << '\n';
  };
  for (auto label : kAllLabels) row(std::string(label_name(label)), report.per_class[code(label)]);
  row("Avg/Total", report.average);
  return out.str();
}

std::string report_csv(const ClassReport& report) {
  std::ostringstream out;
  out << "class,precision,recall,f1,support\n";
  auto row = [&](std::string_view name, const ClassMetrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%zu\n", m.precision, m.recall, m.f1, m.support);
    out << name << buf;
  };
  for (auto label : kAllLabels) row(label_name(label), report.per_class[code(label)]);
  row("Avg/Total", report.average);
  return out.str();
}

std::string render_confusion(const ConfusionMatrix& cm) {
  constexpr std::size_t kName = 10, kCol = 10;
  std::ostringstream out;
  out << pad_right("true\\pred", kName);
  for (auto label : kAllLabels) out << pad_left(std::string(label_name(label)), kCol);
  out << '\n';
  for (auto t : kAllLabels) {
    out << pad_right(std::string(label_name(t)), kName);
    for (auto p : kAllLabels) out << pad_left(std::to_string(cm.counts[code(t)][code(p)]), kCol);
    out << '\n';
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true";
  for (auto label : kAllLabels) out << ',' << label_name(label);
  out << '\n';
  for (auto t : kAllLabels) {
    out << label_name(t);
    for (auto p : kAllLabels) out << ',' << cm.counts[code(t)][code(p)];
    out << '\n';
  }
  return out.str();
}

std::string comparison_table(const std::map<std::string, double>& results, TableLayout layout) {
  std::vector<std::pair<std::string, double>> ordered;
  for (const char* name : kComparisonModels) {
    if (auto it = results.find(name); it != results.end()) ordered.emplace_back(*it);
  }
  for (const auto& [name, acc] : results) {
    if (std::find_if(kComparisonModels.begin(), kComparisonModels.end(), [&](const char* n) { return name == n; }) ==
        kComparisonModels.end())
      ordered.emplace_back(name, acc);
  }

  std::ostringstream out;
  if (layout == TableLayout::Rows) {
    std::size_t width = 5;
    for (const auto& [name, _] : ordered) width = std::max(width, name.size());
    out << pad_right("Model", width) << "  Accuracy (%)\n";
    for (const auto& [name, acc] : ordered) out << pad_right(name, width) << "  " << fixed2(100.0 * acc) << '\n';
    return out.str();
  }
  constexpr std::size_t kLabel = 12;
  std::string header = pad_right("Models", kLabel), values = pad_right("Accuracy (%)", kLabel);
  for (const auto& [name, acc] : ordered) {
    const std::size_t w = std::max<std::size_t>(name.size(), 6) + 2;
    header += pad_left(name, w);
    values += pad_left(fixed2(100.0 * acc), w);
  }
  out << header << '\n' << values << '\n';
  return out.str();
}

std::vector<std::pair<std::string, std::size_t>> word_frequency_report(const LabeledDataset& ds, MoodLabel label,
                                                                       std::size_t top_k,
                                                                       const std::unordered_set<std::string>& stoplist) {
  std::unordered_map<std::string, std::size_t> counts;
  bool any = false;
  for (const auto& doc : ds.documents) {
    if (doc.label != label) continue;
    any = true;
    for (const auto& tok : doc.tokens) {
      if (!stoplist.contains(tok)) ++counts[tok];
    }
  }
  if (!any) fail(Errc::UnknownClass, "no documents labelled " + std::string(label_name(label)));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

double overlap_score(std::span<const std::string> a, std::span<const std::string> b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& s : sa) common += sb.count(s);
  const std::size_t uni = sa.size() + sb.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

std::unordered_set<std::string> load_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open stoplist " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    words.insert(line.substr(start));
  }
  return words;
}

}  // namespace moodtag

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/error.hpp"
#include "scgnet/io.hpp"

namespace scgnet::metrics {

struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;
  /// counts[t * n + p]: examples of true class t predicted as p.
  std::vector<std::uint64_t> counts;

  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * n_classes + p]; }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  std::uint64_t row_sum(std::size_t t) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_classes; ++p) s += at(t, p);
    return s;
  }

  std::uint64_t col_sum(std::size_t p) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < n_classes; ++t) s += at(t, p);
    return s;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline std::vector<std::string> default_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes,
                                 std::vector<std::string> names = {}) {
  if (preds.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(preds.size()) + " predictions for " +
                                          std::to_string(labels.size()) + " labels");
  }
  if (names.empty()) names = default_names(n_classes);
  if (names.size() != n_classes) throw Error(Errc::LengthMismatch, "class name count differs from n_classes");
  ConfusionMatrix cm{n_classes, std::move(names), std::vector<std::uint64_t>(n_classes * n_classes, 0)};
  const auto n = static_cast<int>(n_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n || preds[i] < 0 || preds[i] >= n) {
      throw Error(Errc::LabelOutOfRange, "example " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                             ", prediction " + std::to_string(preds[i]));
    }
    ++cm.counts[static_cast<std::size_t>(labels[i]) * n_classes + static_cast<std::size_t>(preds[i])];
  }
  return cm;
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  /// Set when the metric's denominator was zero and it was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct Averaged {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Scores {
  double accuracy = 0.0;
  std::vector<ClassScores> per_class;
  /// Unweighted mean over all classes, undefined ones counted as 0.
  Averaged macro;
  /// Support-weighted mean.
  Averaged weighted;
};

inline Scores scores(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (cm.n_classes == 0 || total == 0) throw Error(Errc::EmptyMatrix, "no scored examples");
  Scores s;
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < cm.n_classes; ++c) {
    trace += cm.at(c, c);
    ClassScores cs;
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto col = cm.col_sum(c);
    const auto row = cm.row_sum(c);
    cs.support = row;
    if (col == 0) cs.precision_undefined = true;
    else cs.precision = tp / static_cast<double>(col);
    if (row == 0) cs.recall_undefined = true;
    else cs.recall = tp / static_cast<double>(row);
    if (cs.precision + cs.recall == 0.0) cs.f1_undefined = true;
    else cs.f1 = 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall);
    s.per_class.push_back(cs);
  }
  s.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  const double n = static_cast<double>(cm.n_classes);
  for (const auto& cs : s.per_class) {
    const double w = static_cast<double>(cs.support) / static_cast<double>(total);
    s.macro.precision += cs.precision / n;
    s.macro.recall += cs.recall / n;
    s.macro.f1 += cs.f1 / n;
    s.weighted.precision += w * cs.precision;
    s.weighted.recall += w * cs.recall;
    s.weighted.f1 += w * cs.f1;
  }
  return s;
}

// ---------------------------------------------------------------------------

inline constexpr int kReportSchema = 1;

/// One scored model on one task. The headline precision/recall/F1 are the
/// Attack class for the binary task and the weighted averages otherwise.
struct EvalReport {
  std::string task;
  std::string algorithm;
  std::string dataset;
  ConfusionMatrix cm;
  Scores s;
  std::string manifest;

  Averaged headline() const {
    if (task == "binary" && s.per_class.size() == 2) {
      return {s.per_class[1].precision, s.per_class[1].recall, s.per_class[1].f1};
    }
    return s.weighted;
  }
};

inline EvalReport make_report(std::string task, std::string algorithm, std::string dataset, ConfusionMatrix cm,
                              std::string manifest = {}) {
  EvalReport r{std::move(task), std::move(algorithm), std::move(dataset), std::move(cm), {}, std::move(manifest)};
  r.s = scores(r.cm);
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  using J = nlohmann::ordered_json;
  J per_class = J::array();
  for (std::size_t c = 0; c < r.s.per_class.size(); ++c) {
    const auto& cs = r.s.per_class[c];
    per_class.push_back({{"class", r.cm.class_names[c]},
                         {"precision", cs.precision},
                         {"recall", cs.recall},
                         {"f1", cs.f1},
                         {"support", cs.support},
                         {"precision_undefined", cs.precision_undefined},
                         {"recall_undefined", cs.recall_undefined},
                         {"f1_undefined", cs.f1_undefined}});
  }
  J matrix = J::array();
  for (std::size_t t = 0; t < r.cm.n_classes; ++t) {
    J row = J::array();
    for (std::size_t p = 0; p < r.cm.n_classes; ++p) row.push_back(r.cm.at(t, p));
    matrix.push_back(row);
  }
  const auto h = r.headline();
  auto avg = [](const Averaged& a) { return J{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}}; };
  return {{"schema_version", kReportSchema},
          {"task", r.task},
          {"algorithm", r.algorithm},
          {"dataset", r.dataset},
          {"accuracy", r.s.accuracy},
          {"headline", avg(h)},
          {"headline_averaging", r.task == "binary" && r.s.per_class.size() == 2 ? "positive=Attack" : "weighted"},
          {"macro", avg(r.s.macro)},
          {"weighted", avg(r.s.weighted)},
          {"per_class", per_class},
          {"confusion", {{"classes", r.cm.class_names}, {"rows_true_cols_pred", matrix}}},
          {"manifest", r.manifest}};
}

inline EvalReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchema) {
      throw Error(Errc::VersionMismatch, "report schema " + j.at("schema_version").dump());
    }
    EvalReport r;
    r.task = j.at("task").get<std::string>();
    r.algorithm = j.at("algorithm").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.manifest = j.at("manifest").get<std::string>();
    const auto& conf = j.at("confusion");
    r.cm.class_names = conf.at("classes").get<std::vector<std::string>>();
    r.cm.n_classes = r.cm.class_names.size();
    for (const auto& row : conf.at("rows_true_cols_pred")) {
      if (row.size() != r.cm.n_classes) throw Error(Errc::LengthMismatch, "confusion row width");
      for (const auto& v : row) r.cm.counts.push_back(v.get<std::uint64_t>());
    }
    if (r.cm.counts.size() != r.cm.n_classes * r.cm.n_classes) throw Error(Errc::LengthMismatch, "confusion rows");
    r.s = scores(r.cm);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::TypeError, std::string("malformed report: ") + e.what());
  }
}

inline std::string render_machine(const EvalReport& r) { return to_json(r).dump(2) + "\n"; }

inline EvalReport parse_machine(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::TypeError, std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Comparison table

/// A quoted row: algorithm and the four values exactly as published.
struct StaticRow {
  std::string algorithm;
  std::array<std::string, 4> values;
};

/// Published NSL-KDD test-set results, binary task (fractions).
inline const std::vector<StaticRow>& published_binary_rows() {
  static const std::vector<StaticRow> rows{
      {"LR", {"0.548", "0.56", "0.96", "0.721"}},       {"DT", {"0.605", "0.79", "0.41", "0.863"}},
      {"RF", {"0.751", "0.94", "0.60", "0.63"}},        {"SVM", {"0.792", "0.86", "0.58", "0.791"}},
      {"NB", {"0.525", "0.55", "0.90", "0.762"}},       {"KNN", {"0.796", "0.801", "0.796", "0.798"}},
      {"XGBoost", {"0.813", "0.814", "0.813", "0.836"}}, {"AdaBoost", {"0.856", "0.826", "0.896", "0.866"}},
      {"SCGNet", {"0.996", "0.991", "0.993", "0.992"}},
  };
  return rows;
}

/// Published NSL-KDD test-set results, multiclass task (percent).
inline const std::vector<StaticRow>& published_multiclass_rows() {
  static const std::vector<StaticRow> rows{
      {"LR", {"80.20", "81.44", "80.20", "76.22"}},         {"DT", {"76.80", "75.70", "76.80", "76.10"}},
      {"RF", {"78.93", "78.28", "78.93", "75.18"}},         {"MNB", {"82.60", "81.74", "82.60", "81.56"}},
      {"KNN", {"80.48", "80.69", "80.48", "80.58"}},        {"Linear SVM", {"76.80", "79.51", "76.80", "69.60"}},
      {"RBF SVM", {"78.36", "80.39", "78.36", "72.78"}},    {"XGBoost", {"76.94", "76.94", "76.94", "70.85"}},
      {"SCGNet", {"99.50", "89.90", "92.30", "91.20"}},
  };
  return rows;
}

/// Run rows use the published style of each task: fractions to 3 places for
/// binary, percent to 2 places for multiclass.
inline std::array<std::string, 4> format_row(const EvalReport& r) {
  const auto h = r.headline();
  const bool pct = r.task != "binary";
  auto fmt = [&](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(pct ? 2 : 3) << (pct ? 100.0 * v : v);
    return os.str();
  };
  return {fmt(r.s.accuracy), fmt(h.precision), fmt(h.recall), fmt(h.f1)};
}

/// Aligned plain-text table: Algorithm, Accuracy, Precision, Recall,
/// F1-Score. Run rows first, then (optionally) the quoted rows marked as such.
inline std::string render_table(const std::vector<EvalReport>& reports, bool with_published) {
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"Algorithm", "Accuracy", "Precision", "Recall", "F1-Score"});
  std::string task = reports.empty() ? "binary" : reports.front().task;
  for (const auto& r : reports) {
    const auto v = format_row(r);
    rows.push_back({r.algorithm + " (this run)", v[0], v[1], v[2], v[3]});
  }
  if (with_published) {
    for (const auto& s : task == "binary" ? published_binary_rows() : published_multiclass_rows()) {
      rows.push_back({s.algorithm + " (published)", s.values[0], s.values[1], s.values[2], s.values[3]});
    }
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : rows)
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  auto emit = [&](const std::array<std::string, 5>& row) {
    std::string line = row[0] + std::string(width[0] - row[0].size(), ' ');
    for (std::size_t c = 1; c < 5; ++c) line += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
    out += line + "\n";
  };
  emit(rows[0]);
  std::size_t rule = width[0];
  for (std::size_t c = 1; c < 5; ++c) rule += 2 + width[c];
  out += std::string(rule, '-') + "\n";
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return out;
}

inline void write_report(const std::filesystem::path& path, const std::string& text) {
  try {
    io::write_text(path, text);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::IoError, path.string() + ": " + e.what());
  }
}

}  // namespace scgnet::metrics

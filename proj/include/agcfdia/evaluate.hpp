#pragma once

// Confusion matrices, detection metrics and report rendering.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "io.hpp"

namespace agcfdia::evaluate {

inline constexpr std::size_t kClasses = 4;
inline constexpr std::array<std::string_view, kClasses> kClassNames{"no_attack", "fdia_f1", "fdia_f2", "fdia_ptie"};
inline constexpr std::array<std::string_view, 6> kMetricNames{"detected_fdias", "detected_no_attack",
                                                              "weighted_accuracy", "precision", "recall", "f1"};

/// Rows are actual classes, columns predicted. T is an integer for real
/// predictions; a floating type admits counts rebuilt from rounded percentages.
template <typename T>
struct ConfusionMatrix {
  std::array<std::array<T, kClasses>, kClasses> counts{};

  T row_sum(std::size_t r) const {
    T s{};
    for (auto v : counts[r]) s += v;
    return s;
  }
  T total() const {
    T s{};
    for (std::size_t r = 0; r < kClasses; ++r) s += row_sum(r);
    return s;
  }
  T trace() const {
    T s{};
    for (std::size_t r = 0; r < kClasses; ++r) s += counts[r][r];
    return s;
  }

  /// Row-normalized percentages; an empty row stays all zeros.
  std::array<std::array<double, kClasses>, kClasses> percent() const {
    std::array<std::array<double, kClasses>, kClasses> out{};
    for (std::size_t r = 0; r < kClasses; ++r) {
      const double n = static_cast<double>(row_sum(r));
      if (n <= 0.0) continue;
      for (std::size_t c = 0; c < kClasses; ++c) out[r][c] = 100.0 * static_cast<double>(counts[r][c]) / n;
    }
    return out;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

using Counts = ConfusionMatrix<std::uint64_t>;

inline Counts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw DimensionMismatch("label vectors differ in length");
  Counts cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int a = y_true[i], p = y_pred[i];
    if (a < 0 || a >= static_cast<int>(kClasses) || p < 0 || p >= static_cast<int>(kClasses))
      throw LabelOutOfRange("label outside 0..3 at position " + std::to_string(i));
    ++cm.counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
  }
  return cm;
}

/// Counts implied by a row-percentage matrix and per-class totals.
inline ConfusionMatrix<double> counts_from_percent(const std::array<std::array<double, kClasses>, kClasses>& pct,
                                                   const std::array<double, kClasses>& row_totals) {
  ConfusionMatrix<double> cm;
  for (std::size_t r = 0; r < kClasses; ++r)
    for (std::size_t c = 0; c < kClasses; ++c) cm.counts[r][c] = pct[r][c] / 100.0 * row_totals[r];
  return cm;
}

struct Metrics {
  double detected_fdias = 0.0;
  double detected_no_attack = 0.0;
  double weighted_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  std::array<double, 6> as_array() const {
    return {detected_fdias, detected_no_attack, weighted_accuracy, precision, recall, f1};
  }
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct EvaluationReport {
  std::string classifier;
  std::array<std::array<double, kClasses>, kClasses> counts{};
  std::array<std::array<double, kClasses>, kClasses> percent_matrix{};
  Metrics metrics;
  std::vector<std::string> diagnostics;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

namespace detail {
inline double ratio_percent(double num, double den, const char* what, std::vector<std::string>& diag) {
  if (den <= 0.0) {
    diag.push_back(std::string(what) + ": empty denominator, reported as 0");
    return 0.0;
  }
  return 100.0 * num / den;
}
}  // namespace detail

/// All metrics in percent. Precision, recall and F1 collapse the classes to
/// attack (labels 1-3) versus no attack.
template <typename T>
EvaluationReport metrics(const ConfusionMatrix<T>& cm, std::string classifier = {}) {
  EvaluationReport rep;
  rep.classifier = std::move(classifier);
  for (std::size_t r = 0; r < kClasses; ++r)
    for (std::size_t c = 0; c < kClasses; ++c) {
      if (cm.counts[r][c] < T{}) throw InvalidArgument("confusion counts must be non-negative");
      rep.counts[r][c] = static_cast<double>(cm.counts[r][c]);
    }
  rep.percent_matrix = cm.percent();
  const auto& n = rep.counts;
  auto row = [&](std::size_t r) { return n[r][0] + n[r][1] + n[r][2] + n[r][3]; };
  for (std::size_t r = 0; r < kClasses; ++r)
    if (row(r) <= 0.0) rep.diagnostics.push_back("class " + std::string(kClassNames[r]) + " has no test samples");

  auto& d = rep.diagnostics;
  auto& m = rep.metrics;
  m.detected_fdias = detail::ratio_percent(n[1][1] + n[2][2] + n[3][3], row(1) + row(2) + row(3), "detected_fdias", d);
  m.detected_no_attack = detail::ratio_percent(n[0][0], row(0), "detected_no_attack", d);
  double total = 0.0, trace = 0.0;
  for (std::size_t r = 0; r < kClasses; ++r) {
    total += row(r);
    trace += n[r][r];
  }
  m.weighted_accuracy = detail::ratio_percent(trace, total, "weighted_accuracy", d);

  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t r = 1; r < kClasses; ++r) {
    for (std::size_t c = 1; c < kClasses; ++c) tp += n[r][c];
    fn += n[r][0];
    fp += n[0][r];
  }
  m.precision = detail::ratio_percent(tp, tp + fp, "precision", d);
  m.recall = detail::ratio_percent(tp, tp + fn, "recall", d);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return rep;
}

// ---- rendering -------------------------------------------------------------

/// Two-decimal text with half-up rounding applied to the shortest decimal
/// form of `x` (so 95.275 renders as 95.28).
inline std::string fixed2(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  bool negative = false;
  if (!s.empty() && s[0] == '-') {
    negative = true;
    s.erase(0, 1);
  }
  auto dot = s.find('.');
  std::string ip = dot == std::string::npos ? s : s.substr(0, dot);
  std::string fp = dot == std::string::npos ? "" : s.substr(dot + 1);
  const bool round_up = fp.size() > 2 && fp[2] >= '5';
  fp.resize(2, '0');
  std::string digits = ip + fp;
  if (round_up) {
    std::size_t i = digits.size();
    while (i > 0) {
      --i;
      if (digits[i] == '9') {
        digits[i] = '0';
      } else {
        ++digits[i];
        break;
      }
      if (i == 0) digits.insert(digits.begin(), '1');
    }
  }
  std::string out = digits.substr(0, digits.size() - 2) + "." + digits.substr(digits.size() - 2);
  if (negative && out.find_first_not_of("0.") != std::string::npos) out.insert(out.begin(), '-');
  return out;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  const auto& m = r.metrics;
  return {{"classifier", r.classifier},
          {"classes", kClassNames},
          {"counts", r.counts},
          {"percent_matrix", r.percent_matrix},
          {"metrics",
           {{"detected_fdias", m.detected_fdias},
            {"detected_no_attack", m.detected_no_attack},
            {"weighted_accuracy", m.weighted_accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1}}},
          {"diagnostics", r.diagnostics}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.classifier = j.at("classifier").get<std::string>();
    r.counts = j.at("counts").get<decltype(r.counts)>();
    r.percent_matrix = j.at("percent_matrix").get<decltype(r.percent_matrix)>();
    const auto& m = j.at("metrics");
    r.metrics.detected_fdias = m.at("detected_fdias").get<double>();
    r.metrics.detected_no_attack = m.at("detected_no_attack").get<double>();
    r.metrics.weighted_accuracy = m.at("weighted_accuracy").get<double>();
    r.metrics.precision = m.at("precision").get<double>();
    r.metrics.recall = m.at("recall").get<double>();
    r.metrics.f1 = m.at("f1").get<double>();
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

enum class Format { Json, Csv, Table };

inline Format parse_format(std::string_view s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  if (s == "table") return Format::Table;
  throw UnknownFormat("unknown report format '" + std::string(s) + "' (expected json, csv or table)");
}

inline std::string render(std::span<const EvaluationReport> reports, Format format) {
  std::ostringstream out;
  switch (format) {
    case Format::Json: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : reports) arr.push_back(to_json(r));
      out << (reports.size() == 1 ? arr[0] : nlohmann::json{{"reports", arr}}).dump(2) << '\n';
      break;
    }
    case Format::Csv: {
      out << "classifier";
      for (auto name : kMetricNames) out << ',' << name;
      out << '\n';
      for (const auto& r : reports) {
        out << r.classifier;
        for (double v : r.metrics.as_array()) out << ',' << fixed2(v);
        out << '\n';
      }
      break;
    }
    case Format::Table: {
      std::size_t name_w = std::string_view("classifier").size();
      for (const auto& r : reports) name_w = std::max(name_w, r.classifier.size());
      auto pad = [](std::string s, std::size_t w, bool right) {
        if (s.size() < w) s = right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
        return s;
      };
      out << pad("classifier", name_w, false);
      for (auto name : kMetricNames) out << "  " << name;
      out << '\n';
      for (const auto& r : reports) {
        out << pad(r.classifier, name_w, false);
        const auto vals = r.metrics.as_array();
        for (std::size_t i = 0; i < vals.size(); ++i) out << "  " << pad(fixed2(vals[i]), kMetricNames[i].size(), true);
        out << '\n';
      }
      break;
    }
  }
  return out.str();
}

inline std::string render(const EvaluationReport& report, Format format) {
  return render(std::span<const EvaluationReport>(&report, 1), format);
}

inline std::string render(std::span<const EvaluationReport> reports, std::string_view format) {
  return render(reports, parse_format(format));
}

}  // namespace agcfdia::evaluate

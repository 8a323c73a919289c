// Copyright 2026 The cmfda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary detection metrics (positive class = forged) and tabular reports.

#ifndef CMFDA_EVAL_METRICS_HPP_
#define CMFDA_EVAL_METRICS_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cmfda/error.hpp"

namespace cmfda::eval {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw UsageError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], l = labels[i];
    if ((p != 0 && p != 1) || (l != 0 && l != 1)) throw UsageError("confusion: values must be 0 or 1");
    if (p == 1) {
      (l == 1 ? c.tp : c.fp)++;
    } else {
      (l == 1 ? c.fn : c.tn)++;
    }
  }
  return c;
}

/// Harmonic mean; 0 when both inputs are 0.
inline double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;  // fractions in [0, 1]
  ConfusionCounts counts;
  bool precision_undefined = false;  // tp + fp == 0, precision reported as 0
  bool recall_undefined = false;     // tp + fn == 0, recall reported as 0
};

inline MetricsReport metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw UsageError("metrics: no evaluated records");
  MetricsReport r;
  r.counts = c;
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.precision_undefined = c.tp + c.fp == 0;
  r.recall_undefined = c.tp + c.fn == 0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"tp", r.counts.tp},
          {"fp", r.counts.fp},
          {"tn", r.counts.tn},
          {"fn", r.counts.fn},
          {"precision_undefined", r.precision_undefined},
          {"recall_undefined", r.recall_undefined}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  try {
    const ConfusionCounts c{j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
                            j.at("tn").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
    return metrics(c);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics record: ") + e.what());
  }
}

using ReportEntry = std::pair<std::string, MetricsReport>;

namespace detail {

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

/// Aligned table, values in percent with two decimals.
inline std::string render_text(const std::vector<ReportEntry>& entries) {
  const std::vector<std::string> head{"Run", "Accuracy", "Precision", "Recall", "F1"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& [label, r] : entries) {
    rows.push_back({label, detail::percent(r.accuracy), detail::percent(r.precision),
                    detail::percent(r.recall), detail::percent(r.f1)});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        os << row[c] << std::string(width[c] - row[c].size(), ' ');
      } else {
        os << "  " << std::string(width[c] - row[c].size(), ' ') << row[c];
      }
    }
    os << '\n';
  };
  emit(head);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : rows) emit(row);
  return os.str();
}

/// run,accuracy,precision,recall,f1,tp,fp,tn,fn with fractions to six decimals.
inline std::string render_csv(const std::vector<ReportEntry>& entries) {
  std::ostringstream os;
  os << "run,accuracy,precision,recall,f1,tp,fp,tn,fn\n";
  char buf[160];
  for (const auto& [label, r] : entries) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%.6f,%llu,%llu,%llu,%llu\n", r.accuracy, r.precision,
                  r.recall, r.f1, static_cast<unsigned long long>(r.counts.tp),
                  static_cast<unsigned long long>(r.counts.fp), static_cast<unsigned long long>(r.counts.tn),
                  static_cast<unsigned long long>(r.counts.fn));
    os << detail::csv_field(label) << buf;
  }
  return os.str();
}

}  // namespace cmfda::eval

#endif  // CMFDA_EVAL_METRICS_HPP_

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

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "cmfda/eval/metrics.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::eval {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

TEST(Confusion, TrivialCases) {
  const std::vector<int> ones(7, 1), zeros(7, 0);
  EXPECT_EQ(confusion(ones, ones), (ConfusionCounts{7, 0, 0, 0}));
  EXPECT_EQ(confusion(zeros, ones), (ConfusionCounts{0, 0, 0, 7}));
  EXPECT_EQ(confusion(ones, zeros), (ConfusionCounts{0, 7, 0, 0}));
}

TEST(Confusion, RejectsBadInput) {
  const std::vector<int> a{0, 1}, b{1}, c{0, 2};
  EXPECT_THROW(confusion(a, b), UsageError);
  EXPECT_THROW(confusion(c, a), UsageError);
}

TEST(Confusion, MatchesNaiveOracle) {
  Rng rng(5);
  std::vector<int> p(1000), l(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    p[i] = static_cast<int>(rng.below(2));
    l[i] = static_cast<int>(rng.below(2));
  }
  ConfusionCounts oracle;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (p[i] == 1 && l[i] == 1) ++oracle.tp;
    if (p[i] == 1 && l[i] == 0) ++oracle.fp;
    if (p[i] == 0 && l[i] == 0) ++oracle.tn;
    if (p[i] == 0 && l[i] == 1) ++oracle.fn;
  }
  const auto c = confusion(p, l);
  EXPECT_EQ(c, oracle);
  const auto m = metrics(c);
  EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(oracle.tp + oracle.tn) / 1000);
  EXPECT_DOUBLE_EQ(m.precision, static_cast<double>(oracle.tp) / (oracle.tp + oracle.fp));
  EXPECT_DOUBLE_EQ(m.recall, static_cast<double>(oracle.tp) / (oracle.tp + oracle.fn));
  EXPECT_DOUBLE_EQ(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall));
}

TEST(Metrics, HandArithmetic) {
  const auto m = metrics({2, 0, 0, 1});
  EXPECT_DOUBLE_EQ(m.precision, 1.0);
  EXPECT_NEAR(m.recall, 0.6667, 1e-4);
  EXPECT_DOUBLE_EQ(m.f1, 0.8);
  EXPECT_NEAR(m.accuracy, 2.0 / 3, 1e-15);
}

TEST(Metrics, PublishedPrecisionRecallPair) {
  const double f1 = 100 * f1_score(0.6802, 0.9773);
  EXPECT_NEAR(f1, 80.21, 0.005);
  EXPECT_NEAR(f1, 80.18, 0.1);
}

TEST(Metrics, EqualPrecisionRecallIsFixedPoint) {
  for (double r : {0.1, 0.5, 0.93}) EXPECT_NEAR(f1_score(r, r), r, 1e-15);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  const auto m = metrics({0, 0, 5, 0});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_TRUE(m.recall_undefined);
  EXPECT_FALSE(metrics({1, 0, 0, 0}).precision_undefined);
  EXPECT_THROW(metrics({}), UsageError);
}

TEST(Metrics, F1LiesBetweenPrecisionAndRecall) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionCounts c{1 + rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
    const auto m = metrics(c);
    EXPECT_LE(std::min(m.precision, m.recall), m.f1 + 1e-15);
    EXPECT_GE(std::max(m.precision, m.recall), m.f1 - 1e-15);
  }
}

TEST(Metrics, InvariantUnderJointPermutation) {
  Rng rng(7);
  std::vector<int> p(300), l(300);
  for (std::size_t i = 0; i < 300; ++i) {
    p[i] = static_cast<int>(rng.below(2));
    l[i] = static_cast<int>(rng.below(2));
  }
  std::vector<std::size_t> order(300);
  for (std::size_t i = 0; i < 300; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<int> pp, ll;
  for (std::size_t i : order) {
    pp.push_back(p[i]);
    ll.push_back(l[i]);
  }
  EXPECT_EQ(confusion(p, l), confusion(pp, ll));
}

TEST(MetricsJson, RoundTrip) {
  const auto m = metrics({3, 1, 4, 2});
  const auto back = metrics_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.counts, m.counts);
  EXPECT_EQ(back.f1, m.f1);
  EXPECT_THROW(metrics_from_json(nlohmann::json{{"tp", 1}}), DataError);
}

TEST(Report, RowsFollowInputOrder) {
  const std::vector<ReportEntry> one{{"solo", metrics({2, 0, 0, 1})}};
  const std::string text = render_text(one);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);  // header, rule, row
  EXPECT_NE(text.find("80.00"), std::string::npos);
  const std::string csv = render_csv(one);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);

  const std::vector<ReportEntry> two{{"zeta", metrics({1, 1, 1, 1})}, {"alpha", metrics({2, 0, 2, 0})}};
  const std::string t2 = render_text(two);
  EXPECT_LT(t2.find("zeta"), t2.find("alpha"));
  EXPECT_EQ(render_csv(two), render_csv(two));
}

TEST(Report, CsvRoundTripsToPrintedPrecision) {
  Rng rng(8);
  std::vector<ReportEntry> entries;
  for (int k = 0; k < 10; ++k) {
    entries.push_back({"run" + std::to_string(k),
                       metrics({1 + rng.below(90), rng.below(90), rng.below(90), rng.below(90)})});
  }
  std::stringstream ss(render_csv(entries));
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "run,accuracy,precision,recall,f1,tp,fp,tn,fn");
  for (const auto& [label, m] : entries) {
    ASSERT_TRUE(std::getline(ss, line));
    const auto f = split_line(line);
    ASSERT_EQ(f.size(), 9u);
    EXPECT_EQ(f[0], label);
    EXPECT_NEAR(std::stod(f[1]), m.accuracy, 5e-7);
    EXPECT_NEAR(std::stod(f[2]), m.precision, 5e-7);
    EXPECT_NEAR(std::stod(f[3]), m.recall, 5e-7);
    EXPECT_NEAR(std::stod(f[4]), m.f1, 5e-7);
    EXPECT_EQ(std::stoull(f[5]), m.counts.tp);
    EXPECT_EQ(std::stoull(f[8]), m.counts.fn);
  }
}

TEST(Report, CsvQuotesAwkwardLabels) {
  const std::string csv = render_csv({{"dann, \"vgg\"", metrics({1, 0, 1, 0})}});
  EXPECT_NE(csv.find("\"dann, \"\"vgg\"\"\","), std::string::npos);
}

}  // namespace
}  // namespace cmfda::eval

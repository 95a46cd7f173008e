// Copyright 2026 The DREQ Authors.
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

#include "dreq/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dreq/embeddings.h"

namespace dreq {

double PrecisionAtK(const Ranking &ranking, const Qrels &qrels, int k) {
  if (k < 1) throw std::invalid_argument("precision cutoff must be >= 1");
  int hits = 0;
  const std::size_t depth = std::min(ranking.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < depth; ++i)
    hits += qrels.IsRelevant(ranking.query_id, ranking.entries[i].id);
  return static_cast<double>(hits) / k;
}

double NdcgAtK(const Ranking &ranking, const Qrels &qrels, int k) {
  if (k < 1) throw std::invalid_argument("nDCG cutoff must be >= 1");
  std::vector<int> ideal;
  for (const auto &[doc, grade] : qrels.ForQuery(ranking.query_id))
    if (grade >= Qrels::kRelevantGrade) ideal.push_back(grade);
  if (ideal.empty()) return 0.0;
  std::sort(ideal.rbegin(), ideal.rend());
  auto gain = [](int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; };
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal.size() && i < static_cast<std::size_t>(k); ++i)
    idcg += gain(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
  double dcg = 0.0;
  const std::size_t depth = std::min(ranking.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < depth; ++i) {
    const int grade = qrels.Grade(ranking.query_id, ranking.entries[i].id);
    if (grade >= Qrels::kRelevantGrade)
      dcg += gain(grade) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

double AveragePrecision(const Ranking &ranking, const Qrels &qrels) {
  const int total = qrels.NumRelevant(ranking.query_id);
  if (total == 0) return 0.0;
  int hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (qrels.IsRelevant(ranking.query_id, ranking.entries[i].id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / total;
}

double RecallAtK(const Ranking &ranking, const Qrels &qrels, int k) {
  if (k < 1) throw std::invalid_argument("recall cutoff must be >= 1");
  const int total = qrels.NumRelevant(ranking.query_id);
  if (total == 0) return 0.0;
  int hits = 0;
  const std::size_t depth = std::min(ranking.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < depth; ++i)
    hits += qrels.IsRelevant(ranking.query_id, ranking.entries[i].id);
  return static_cast<double>(hits) / total;
}

std::vector<double> MetricsReport::Values(
    const std::string &metric, const std::vector<std::string> &query_ids) const {
  const auto &values = per_query.at(metric);
  std::vector<double> out;
  out.reserve(query_ids.size());
  for (const auto &q : query_ids) {
    auto it = values.find(q);
    out.push_back(it == values.end() ? 0.0 : it->second);
  }
  return out;
}

MetricsReport Evaluate(const Run &run, const Qrels &qrels,
                       const std::vector<std::string> &query_ids,
                       const std::string &system) {
  const std::set<std::string> known(query_ids.begin(), query_ids.end());
  std::vector<std::string> unknown;
  for (const auto &[qid, _] : run)
    if (!known.count(qid)) unknown.push_back(qid);
  if (!unknown.empty()) {
    std::string list;
    for (const auto &q : unknown) list += (list.empty() ? "" : ", ") + q;
    throw std::invalid_argument("run references unknown queries: " + list);
  }
  MetricsReport report;
  report.system = system;
  report.metric_names = {"map", "ndcg_cut_20", "P_20", "recall_1000"};
  for (const auto &qid : known) {
    Ranking empty;
    empty.query_id = qid;
    auto it = run.find(qid);
    const Ranking &r = it == run.end() ? empty : it->second;
    report.per_query["map"][qid] = AveragePrecision(r, qrels);
    report.per_query["ndcg_cut_20"][qid] = NdcgAtK(r, qrels, 20);
    report.per_query["P_20"][qid] = PrecisionAtK(r, qrels, 20);
    report.per_query["recall_1000"][qid] = RecallAtK(r, qrels, 1000);
  }
  for (const auto &name : report.metric_names) {
    double sum = 0.0;
    for (const auto &[qid, v] : report.per_query[name]) sum += v;
    report.mean[name] = known.empty() ? 0.0 : sum / static_cast<double>(known.size());
  }
  return report;
}

std::string FormatMetricsReport(const MetricsReport &report) {
  std::string out;
  char buf[64];
  for (const auto &name : report.metric_names) {
    for (const auto &[qid, v] : report.per_query.at(name)) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out += name + '\t' + qid + '\t' + buf + '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.6f", report.mean.at(name));
    out += name + "\tALL\t" + buf + '\n';
  }
  return out;
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double BetaContinuedFraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double IncompleteBeta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * BetaContinuedFraction(a, b, x) / a;
  return 1.0 - front * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double StudentTCdf(double t, double df) {
  if (!(df > 0)) throw std::invalid_argument("t distribution needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * IncompleteBeta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0 ? 1.0 - tail : tail;
}

TTestResult PairedTTest(const std::vector<double> &a, const std::vector<double> &b,
                        double alpha) {
  if (a.size() != b.size())
    throw std::invalid_argument("paired t-test needs aligned samples of equal length");
  if (a.size() < 2) throw std::invalid_argument("paired t-test needs >= 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  TTestResult result;
  result.df = static_cast<int>(n) - 1;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  // Differences equal up to rounding count as zero variance.
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    result.t = std::numeric_limits<double>::quiet_NaN();
    result.p = 1.0;
    result.significant = false;
    return result;
  }
  result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double df = result.df;
  result.p = IncompleteBeta(df / 2.0, 0.5, df / (df + result.t * result.t));
  result.significant = result.p < alpha;
  return result;
}

double Wig(const Ranking &candidates, int query_length, int k) {
  if (k < 1) throw std::invalid_argument("WIG cutoff must be >= 1");
  if (query_length < 1) throw std::invalid_argument("WIG needs a non-empty query");
  if (static_cast<std::size_t>(k) > candidates.size()) {
    throw std::invalid_argument("WIG cutoff " + std::to_string(k) +
                                " exceeds candidate depth " +
                                std::to_string(candidates.size()) + " for query " +
                                candidates.query_id);
  }
  double all = 0.0;
  for (const auto &e : candidates.entries) all += e.score;
  const double collection = all / static_cast<double>(candidates.size());
  double gain = 0.0;
  for (int i = 0; i < k; ++i) gain += candidates.entries[i].score - collection;
  return gain / k / std::sqrt(static_cast<double>(query_length));
}

std::string ToString(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kMedium: return "medium";
    case Difficulty::kHard: return "hard";
  }
  return "?";
}

namespace {

// Sizes of `groups` near-equal consecutive groups of n items, larger first.
std::vector<std::size_t> GroupSizes(std::size_t n, std::size_t groups) {
  std::vector<std::size_t> sizes(groups, n / groups);
  for (std::size_t i = 0; i < n % groups; ++i) ++sizes[i];
  return sizes;
}

}  // namespace

std::map<std::string, Difficulty> WigTerciles(const std::map<std::string, double> &wig) {
  if (wig.size() < 3) throw std::invalid_argument("WIG terciles need >= 3 queries");
  std::vector<std::pair<std::string, double>> order(wig.begin(), wig.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  const auto sizes = GroupSizes(order.size(), 3);
  std::map<std::string, Difficulty> out;
  std::size_t i = 0;
  const Difficulty levels[] = {Difficulty::kEasy, Difficulty::kMedium, Difficulty::kHard};
  for (int g = 0; g < 3; ++g)
    for (std::size_t j = 0; j < sizes[g]; ++j) out[order[i++].first] = levels[g];
  return out;
}

HelpedCounts QueriesHelped(const std::map<std::string, double> &baseline,
                           const std::map<std::string, double> &system) {
  HelpedCounts counts;
  for (const auto &[qid, base] : baseline) {
    auto it = system.find(qid);
    if (it == system.end())
      throw std::invalid_argument("query " + qid + " missing from system metrics");
    if (it->second > base) {
      ++counts.helped;
    } else if (it->second < base) {
      ++counts.hurt;
    } else {
      ++counts.unchanged;
    }
  }
  if (system.size() != baseline.size())
    throw std::invalid_argument("baseline and system cover different queries");
  return counts;
}

DifficultyReport DifficultyBins(const std::map<std::string, double> &baseline,
                                const std::map<std::string, double> &system,
                                int bin_percent) {
  if (baseline.empty()) throw std::invalid_argument("no queries to bin");
  if (bin_percent < 1 || 100 % bin_percent != 0)
    throw std::invalid_argument("bin width must divide 100");
  DifficultyReport report;
  report.counts = QueriesHelped(baseline, system);
  std::vector<std::pair<std::string, double>> order(baseline.begin(), baseline.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto &a, const auto &b) { return a.second < b.second; });
  const std::size_t num_bins =
      std::min<std::size_t>(100 / static_cast<std::size_t>(bin_percent), order.size());
  std::size_t i = 0;
  for (std::size_t size : GroupSizes(order.size(), num_bins)) {
    DifficultyBin bin;
    for (std::size_t j = 0; j < size; ++j, ++i) {
      bin.query_ids.push_back(order[i].first);
      bin.baseline_mean += order[i].second;
      bin.system_mean += system.at(order[i].first);
    }
    bin.baseline_mean /= static_cast<double>(size);
    bin.system_mean /= static_cast<double>(size);
    report.bins.push_back(std::move(bin));
  }
  return report;
}

std::string FormatDifficultyReport(const DifficultyReport &report) {
  std::string out = "bin\tqueries\tbaseline\tsystem\n";
  char buf[128];
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto &bin = report.bins[b];
    std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%.6f\t%.6f\n", b + 1,
                  bin.query_ids.size(), bin.baseline_mean, bin.system_mean);
    out += buf;
  }
  return out;
}

}  // namespace dreq

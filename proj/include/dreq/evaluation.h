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

#ifndef DREQ_EVALUATION_H_
#define DREQ_EVALUATION_H_

#include <map>
#include <string>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/run.h"

namespace dreq {

// Grade >= 1 counts as relevant throughout.
double PrecisionAtK(const Ranking &ranking, const Qrels &qrels, int k = 20);
// Gain 2^grade - 1, discount log2(rank + 1); 0 for queries with no relevant
// documents.
double NdcgAtK(const Ranking &ranking, const Qrels &qrels, int k = 20);
double AveragePrecision(const Ranking &ranking, const Qrels &qrels);
double RecallAtK(const Ranking &ranking, const Qrels &qrels, int k = 1000);

// Per-query and mean MAP, nDCG@20, P@20 and Recall@1000.
struct MetricsReport {
  std::string system;
  std::vector<std::string> metric_names;  // report order
  std::map<std::string, std::map<std::string, double>> per_query;  // metric -> qid -> value
  std::map<std::string, double> mean;

  // Aligned per-query vector for one metric, in query_ids order.
  std::vector<double> Values(const std::string &metric,
                             const std::vector<std::string> &query_ids) const;
};

// Evaluates over the queries of `query_ids`; a query missing from the run
// scores 0. Throws listing run queries absent from both query_ids and qrels.
MetricsReport Evaluate(const Run &run, const Qrels &qrels,
                       const std::vector<std::string> &query_ids,
                       const std::string &system);

// TSV lines `metric<TAB>query_id|ALL<TAB>value`.
std::string FormatMetricsReport(const MetricsReport &report);

struct TTestResult {
  double t = 0.0;  // NaN when undefined
  double p = 1.0;
  int df = 0;
  bool significant = false;
};

// Two-tailed paired t-test on a - b at alpha. Zero variance of differences
// leaves t undefined and the result not significant.
TTestResult PairedTTest(const std::vector<double> &a, const std::vector<double> &b,
                        double alpha = 0.05);

// Regularized incomplete beta I_x(a, b) via continued fraction.
double IncompleteBeta(double a, double b, double x);
// P(T <= t) for Student's t with df degrees of freedom.
double StudentTCdf(double t, double df);

// Weighted information gain: mean over the top k of (score - mean score of
// the whole candidate list), divided by sqrt(query length).
double Wig(const Ranking &candidates, int query_length, int k = 20);

enum class Difficulty { kEasy, kMedium, kHard };
std::string ToString(Difficulty d);

// Sort by WIG desc (ties by qid); thirds with remainders to earlier groups.
std::map<std::string, Difficulty> WigTerciles(const std::map<std::string, double> &wig);

struct HelpedCounts {
  int helped = 0;
  int hurt = 0;
  int unchanged = 0;
};

HelpedCounts QueriesHelped(const std::map<std::string, double> &baseline,
                           const std::map<std::string, double> &system);

struct DifficultyBin {
  std::vector<std::string> query_ids;
  double baseline_mean = 0.0;
  double system_mean = 0.0;
};

struct DifficultyReport {
  std::vector<DifficultyBin> bins;
  HelpedCounts counts;
};

// Queries sorted by baseline metric asc (ties by qid), cut into
// 100 / bin_percent bins; leftover queries go one each to the first bins.
DifficultyReport DifficultyBins(const std::map<std::string, double> &baseline,
                                const std::map<std::string, double> &system,
                                int bin_percent = 5);

std::string FormatDifficultyReport(const DifficultyReport &report);

}  // namespace dreq

#endif  // DREQ_EVALUATION_H_

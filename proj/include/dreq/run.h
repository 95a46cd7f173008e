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

#ifndef DREQ_RUN_H_
#define DREQ_RUN_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dreq {

struct RankedItem {
  std::string id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

// Per-query ordered result list: scores non-increasing, ties by ascending id,
// ranks contiguous from 1.
struct Ranking {
  std::string query_id;
  std::vector<RankedItem> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<std::string> Ids() const;
  // Throws std::logic_error describing the first violated invariant.
  void CheckInvariants() const;
};

// Sorts by score desc then id asc, assigns ranks and keeps the first k
// (k < 0 keeps all).
Ranking MakeRanking(std::string query_id,
                    std::vector<std::pair<std::string, double>> scored,
                    int k = -1);

using Run = std::map<std::string, Ranking>;

// TREC run lines: qid Q0 docid rank score tag, score with six decimals.
std::string FormatRun(const Run &run, const std::string &tag);
std::string FormatRanking(const Ranking &ranking, const std::string &tag);
void WriteRun(const Run &run, const std::string &tag, const std::string &path);
Run ParseRun(std::istream &in, const std::string &source);
Run LoadRun(const std::string &path);

}  // namespace dreq

#endif  // DREQ_RUN_H_

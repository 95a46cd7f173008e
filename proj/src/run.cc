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

#include "dreq/run.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "dreq/io.h"

namespace dreq {

std::vector<std::string> Ranking::Ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto &e : entries) ids.push_back(e.id);
  return ids;
}

void Ranking::CheckInvariants() const {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto &e = entries[i];
    if (e.rank != static_cast<int>(i) + 1)
      throw std::logic_error(query_id + ": ranks not contiguous at " + e.id);
    if (!seen.insert(e.id).second)
      throw std::logic_error(query_id + ": duplicate id " + e.id);
    if (i > 0 && entries[i - 1].score < e.score)
      throw std::logic_error(query_id + ": score increases at " + e.id);
    if (i > 0 && entries[i - 1].score == e.score && entries[i - 1].id > e.id)
      throw std::logic_error(query_id + ": tie not broken by id at " + e.id);
  }
}

Ranking MakeRanking(std::string query_id,
                    std::vector<std::pair<std::string, double>> scored,
                    int k) {
  auto better = [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::size_t keep = scored.size();
  if (k >= 0) keep = std::min(keep, static_cast<std::size_t>(k));
  std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                    better);
  Ranking r;
  r.query_id = std::move(query_id);
  r.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    r.entries.push_back({std::move(scored[i].first), scored[i].second,
                         static_cast<int>(i) + 1});
  }
  return r;
}

std::string FormatRanking(const Ranking &ranking, const std::string &tag) {
  std::string out;
  char score[64];
  for (const auto &e : ranking.entries) {
    std::snprintf(score, sizeof(score), "%.6f", e.score);
    out += ranking.query_id;
    out += " Q0 ";
    out += e.id;
    out += ' ';
    out += std::to_string(e.rank);
    out += ' ';
    out += score;
    out += ' ';
    out += tag;
    out += '\n';
  }
  return out;
}

std::string FormatRun(const Run &run, const std::string &tag) {
  std::string out;
  for (const auto &[qid, ranking] : run) out += FormatRanking(ranking, tag);
  return out;
}

void WriteRun(const Run &run, const std::string &tag, const std::string &path) {
  WriteFileAtomic(path, FormatRun(run, tag));
}

Run ParseRun(std::istream &in, const std::string &source) {
  Run run;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = SplitWhitespace(line);
    if (f.empty()) continue;
    if (f.size() != 6)
      throw std::runtime_error(source + ":" + std::to_string(line_no) +
                               ": expected 'qid Q0 docid rank score tag'");
    if (!seen.emplace(f[0], f[2]).second)
      throw std::runtime_error(source + ":" + std::to_string(line_no) +
                               ": document " + std::string(f[2]) +
                               " listed twice for query " + std::string(f[0]));
    Ranking &r = run[std::string(f[0])];
    r.query_id = std::string(f[0]);
    try {
      r.entries.push_back({std::string(f[2]), std::stod(std::string(f[4])),
                           std::stoi(std::string(f[3]))});
    } catch (const std::exception &e) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  for (auto &[qid, r] : run) {
    std::stable_sort(r.entries.begin(), r.entries.end(),
                     [](const auto &a, const auto &b) { return a.rank < b.rank; });
    // Ranks are taken from the file, then made contiguous.
    for (std::size_t i = 0; i < r.entries.size(); ++i)
      r.entries[i].rank = static_cast<int>(i) + 1;
  }
  return run;
}

Run LoadRun(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run " + path);
  return ParseRun(in, path);
}

}  // namespace dreq

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

#include "dreq/retrieval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dreq/embeddings.h"
#include "dreq/io.h"

namespace dreq {

void Bm25Params::Validate() const {
  if (!(k1 >= 0)) throw std::invalid_argument("bm25 k1 must be >= 0");
  if (!(b >= 0 && b <= 1)) throw std::invalid_argument("bm25 b must be in [0,1]");
}

void Rm3Params::Validate() const {
  if (fb_docs < 1) throw std::invalid_argument("rm3 fb_docs must be >= 1");
  if (fb_terms < 1) throw std::invalid_argument("rm3 fb_terms must be >= 1");
  if (!(original_weight >= 0 && original_weight <= 1))
    throw std::invalid_argument("rm3 original weight must be in [0,1]");
}

RetrievalMode ParseRetrievalMode(const std::string &name) {
  if (name == "bm25") return RetrievalMode::kBm25;
  if (name == "bm25_rm3" || name == "bm25+rm3") return RetrievalMode::kBm25Rm3;
  throw std::invalid_argument("unknown retrieval mode '" + name +
                              "' (expected bm25 or bm25_rm3)");
}

std::string ToString(RetrievalMode mode) {
  return mode == RetrievalMode::kBm25 ? "bm25" : "bm25_rm3";
}

InvertedIndex::TermId InvertedIndex::Intern(const std::string &term) {
  auto [it, inserted] =
      term_index_.emplace(term, static_cast<TermId>(terms_.size()));
  if (inserted) {
    terms_.push_back(term);
    postings_.emplace_back();
  }
  return it->second;
}

void InvertedIndex::Finish() {
  total_tokens_ = 0;
  for (auto len : doc_lengths_) total_tokens_ += len;
  avg_doc_length_ = doc_ids_.empty() ? 0.0
                                     : static_cast<double>(total_tokens_) /
                                           static_cast<double>(doc_ids_.size());
  for (auto &p : postings_) p.clear();
  for (uint32_t d = 0; d < forward_.size(); ++d) {
    for (auto [t, tf] : forward_[d]) postings_[t].push_back({d, tf});
  }
}

InvertedIndex InvertedIndex::Build(
    const std::vector<std::pair<std::string, std::string>> &docs,
    const AnalyzerConfig &analyzer) {
  if (docs.empty()) throw std::invalid_argument("cannot index an empty corpus");
  InvertedIndex index;
  index.analyzer_ = analyzer;
  for (const auto &[id, text] : docs) {
    const auto doc = static_cast<uint32_t>(index.doc_ids_.size());
    if (!index.doc_index_.emplace(id, doc).second)
      throw std::invalid_argument("duplicate document id '" + id + "'");
    index.doc_ids_.push_back(id);
    std::map<TermId, uint32_t> counts;
    auto tokens = Tokenize(text, analyzer);
    for (const auto &tok : tokens) ++counts[index.Intern(tok)];
    index.doc_lengths_.push_back(static_cast<uint32_t>(tokens.size()));
    index.forward_.emplace_back(counts.begin(), counts.end());
  }
  index.Finish();
  return index;
}

InvertedIndex InvertedIndex::Build(const CorpusStore &corpus,
                                   const AnalyzerConfig &analyzer) {
  std::vector<std::pair<std::string, std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto &d : corpus.documents()) docs.emplace_back(d.doc_id, d.text);
  return Build(docs, analyzer);
}

int64_t InvertedIndex::FindDoc(const std::string &doc_id) const {
  auto it = doc_index_.find(doc_id);
  return it == doc_index_.end() ? -1 : static_cast<int64_t>(it->second);
}

int64_t InvertedIndex::FindTerm(const std::string &term) const {
  auto it = term_index_.find(term);
  return it == term_index_.end() ? -1 : static_cast<int64_t>(it->second);
}

uint32_t InvertedIndex::df(const std::string &term) const {
  auto t = FindTerm(term);
  return t < 0 ? 0 : static_cast<uint32_t>(postings_[t].size());
}

uint32_t InvertedIndex::tf(const std::string &term,
                           const std::string &doc_id) const {
  auto t = FindTerm(term);
  auto d = FindDoc(doc_id);
  if (t < 0 || d < 0) return 0;
  const auto &fwd = forward_[d];
  auto it = std::lower_bound(
      fwd.begin(), fwd.end(), static_cast<TermId>(t),
      [](const auto &entry, TermId id) { return entry.first < id; });
  return it != fwd.end() && it->first == t ? it->second : 0;
}

// Format:
//   #dreq-index docs=<N> stem=<0|1>
//   doc_id<TAB>length<TAB>term:tf term:tf ...
std::string InvertedIndex::Serialize() const {
  std::ostringstream out;
  out << "#dreq-index docs=" << doc_ids_.size()
      << " stem=" << (analyzer_.stem ? 1 : 0) << '\n';
  for (uint32_t d = 0; d < doc_ids_.size(); ++d) {
    out << doc_ids_[d] << '\t' << doc_lengths_[d] << '\t';
    bool first = true;
    for (auto [t, tf] : forward_[d]) {
      if (!first) out << ' ';
      first = false;
      out << terms_[t] << ':' << tf;
    }
    out << '\n';
  }
  return out.str();
}

InvertedIndex InvertedIndex::Deserialize(std::istream &in,
                                         const std::string &source) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#dreq-index", 0) != 0)
    throw std::runtime_error(source + ": not a dreq index file");
  InvertedIndex index;
  index.analyzer_.stem = line.find("stem=1") != std::string::npos;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = Split(line, '\t');
    if (fields.size() != 3)
      throw std::runtime_error(source + ":" + std::to_string(line_no) +
                               ": malformed index line");
    const std::string id(fields[0]);
    const auto doc = static_cast<uint32_t>(index.doc_ids_.size());
    if (!index.doc_index_.emplace(id, doc).second)
      throw std::runtime_error(source + ": duplicate doc " + id);
    index.doc_ids_.push_back(id);
    index.doc_lengths_.push_back(
        static_cast<uint32_t>(std::stoul(std::string(fields[1]))));
    std::map<TermId, uint32_t> counts;
    for (auto tok : SplitWhitespace(fields[2])) {
      auto colon = tok.rfind(':');
      if (colon == std::string_view::npos)
        throw std::runtime_error(source + ":" + std::to_string(line_no) +
                                 ": malformed posting");
      counts[index.Intern(std::string(tok.substr(0, colon)))] =
          static_cast<uint32_t>(std::stoul(std::string(tok.substr(colon + 1))));
    }
    index.forward_.emplace_back(counts.begin(), counts.end());
  }
  if (index.doc_ids_.empty())
    throw std::runtime_error(source + ": index has no documents");
  index.Finish();
  return index;
}

void InvertedIndex::Save(const std::string &path) const {
  WriteFileAtomic(path, Serialize());
}

InvertedIndex InvertedIndex::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open index " + path);
  return Deserialize(in, path);
}

WeightedQuery CountTerms(const std::vector<std::string> &terms) {
  std::map<std::string, double> counts;
  for (const auto &t : terms) counts[t] += 1.0;
  return {counts.begin(), counts.end()};
}

double Bm25Idf(const InvertedIndex &index, uint32_t df) {
  const double n = static_cast<double>(index.num_docs());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

namespace {

double TermWeight(double tf, double dl, double avgdl, const Bm25Params &p) {
  if (tf <= 0) return 0.0;
  const double norm = avgdl > 0 ? dl / avgdl : 0.0;
  return tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

}  // namespace

double Bm25Score(const InvertedIndex &index,
                 const std::vector<std::string> &query_terms,
                 const std::string &doc_id, const Bm25Params &params) {
  params.Validate();
  const auto d = index.FindDoc(doc_id);
  if (d < 0) throw std::out_of_range("document '" + doc_id + "' not in index");
  const double dl = index.doc_length(static_cast<uint32_t>(d));
  double score = 0;
  for (const auto &term : query_terms) {
    const double tf = index.tf(term, doc_id);
    if (tf == 0) continue;
    score += Bm25Idf(index, index.df(term)) *
             TermWeight(tf, dl, index.avg_doc_length(), params);
  }
  return score;
}

std::vector<double> ScoreAll(const InvertedIndex &index,
                             const WeightedQuery &query,
                             const Bm25Params &params) {
  params.Validate();
  std::vector<double> scores(index.num_docs(), 0.0);
  for (const auto &[term, weight] : query) {
    const auto t = index.FindTerm(term);
    if (t < 0 || weight == 0) continue;
    const auto &plist = index.postings(static_cast<InvertedIndex::TermId>(t));
    const double idf = Bm25Idf(index, static_cast<uint32_t>(plist.size()));
    for (const auto &p : plist) {
      scores[p.doc] += weight * idf *
                       TermWeight(p.tf, index.doc_length(p.doc),
                                  index.avg_doc_length(), params);
    }
  }
  return scores;
}

namespace {

// Internal doc ids ordered by score desc, doc_id asc.
std::vector<uint32_t> TopDocs(const InvertedIndex &index,
                              const std::vector<double> &scores,
                              std::size_t k) {
  std::vector<uint32_t> order(scores.size());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](uint32_t a, uint32_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return index.doc_id(a) < index.doc_id(b);
                    });
  order.resize(k);
  return order;
}

WeightedQuery SortByWeight(std::map<std::string, double> weights) {
  WeightedQuery out(weights.begin(), weights.end());
  std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return a.second > b.second;
  });
  return out;
}

}  // namespace

WeightedQuery Rm3Expand(const InvertedIndex &index,
                        const std::vector<std::string> &query_terms,
                        const Rm3Params &rm3, const Bm25Params &bm25) {
  rm3.Validate();
  std::map<std::string, double> original;
  for (const auto &t : query_terms) original[t] += 1.0;
  for (auto &[t, w] : original) w /= static_cast<double>(query_terms.size());
  if (original.empty()) return {};

  const auto scores = ScoreAll(index, CountTerms(query_terms), bm25);
  std::vector<uint32_t> feedback;
  for (uint32_t d : TopDocs(index, scores, static_cast<std::size_t>(rm3.fb_docs))) {
    if (scores[d] > 0) feedback.push_back(d);
  }
  if (feedback.empty()) return SortByWeight(std::move(original));

  Vector fb_scores(static_cast<Eigen::Index>(feedback.size()));
  for (std::size_t i = 0; i < feedback.size(); ++i)
    fb_scores[static_cast<Eigen::Index>(i)] = scores[feedback[i]];
  const Vector doc_weight = Softmax(fb_scores);

  std::map<std::string, double> relevance;
  for (std::size_t i = 0; i < feedback.size(); ++i) {
    const uint32_t d = feedback[i];
    const double dl = index.doc_length(d);
    if (dl == 0) continue;
    for (auto [t, tf] : index.terms_of(d)) {
      relevance[index.term(t)] +=
          (tf / dl) * doc_weight[static_cast<Eigen::Index>(i)];
    }
  }
  WeightedQuery top = SortByWeight(std::move(relevance));
  if (top.size() > static_cast<std::size_t>(rm3.fb_terms))
    top.resize(static_cast<std::size_t>(rm3.fb_terms));
  double mass = 0;
  for (const auto &[t, w] : top) mass += w;

  const double alpha = rm3.original_weight;
  std::map<std::string, double> mixed;
  for (const auto &[t, w] : original) mixed[t] += alpha * w;
  if (mass > 0) {
    for (const auto &[t, w] : top) mixed[t] += (1.0 - alpha) * w / mass;
  } else {
    for (const auto &[t, w] : original) mixed[t] += (1.0 - alpha) * w;
  }
  return SortByWeight(std::move(mixed));
}

Ranking Retrieve(const InvertedIndex &index, const Query &query,
                 const RetrievalConfig &cfg) {
  if (cfg.depth <= 0) throw std::invalid_argument("retrieval depth must be > 0");
  const auto terms = index.Analyze(query.text);
  WeightedQuery weighted = cfg.mode == RetrievalMode::kBm25Rm3
                               ? Rm3Expand(index, terms, cfg.rm3, cfg.bm25)
                               : CountTerms(terms);
  const auto scores = ScoreAll(index, weighted, cfg.bm25);
  Ranking ranking;
  ranking.query_id = query.query_id;
  int rank = 0;
  for (uint32_t d : TopDocs(index, scores, static_cast<std::size_t>(cfg.depth))) {
    ranking.entries.push_back({index.doc_id(d), scores[d], ++rank});
  }
  return ranking;
}

}  // namespace dreq

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

#ifndef DREQ_RETRIEVAL_H_
#define DREQ_RETRIEVAL_H_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/run.h"
#include "dreq/text.h"

namespace dreq {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
  void Validate() const;
};

struct Rm3Params {
  int fb_docs = 10;
  int fb_terms = 10;
  double original_weight = 0.5;
  void Validate() const;
};

enum class RetrievalMode { kBm25, kBm25Rm3 };

RetrievalMode ParseRetrievalMode(const std::string &name);
std::string ToString(RetrievalMode mode);

struct Posting {
  uint32_t doc = 0;
  uint32_t tf = 0;
};

// In-memory inverted index with a forward index for feedback models.
class InvertedIndex {
 public:
  using TermId = uint32_t;

  // Documents as (id, text); ids must be unique. Throws on empty input.
  static InvertedIndex Build(
      const std::vector<std::pair<std::string, std::string>> &docs,
      const AnalyzerConfig &analyzer = {});
  static InvertedIndex Build(const CorpusStore &corpus,
                             const AnalyzerConfig &analyzer = {});

  const AnalyzerConfig &analyzer() const { return analyzer_; }
  std::size_t num_docs() const { return doc_ids_.size(); }
  std::size_t num_terms() const { return terms_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  uint64_t total_tokens() const { return total_tokens_; }

  const std::string &doc_id(uint32_t doc) const { return doc_ids_[doc]; }
  uint32_t doc_length(uint32_t doc) const { return doc_lengths_[doc]; }
  // Internal id of doc_id, or -1.
  int64_t FindDoc(const std::string &doc_id) const;

  // Term id or -1 when out of vocabulary.
  int64_t FindTerm(const std::string &term) const;
  const std::string &term(TermId t) const { return terms_[t]; }
  uint32_t df(const std::string &term) const;
  uint32_t tf(const std::string &term, const std::string &doc_id) const;
  const std::vector<Posting> &postings(TermId t) const { return postings_[t]; }
  // (term, tf) pairs of one document, ascending term id.
  const std::vector<std::pair<TermId, uint32_t>> &terms_of(uint32_t doc) const {
    return forward_[doc];
  }

  std::vector<std::string> Analyze(std::string_view text) const {
    return Tokenize(text, analyzer_);
  }

  // Line-oriented text serialization; Load(Save(x)) rebuilds x exactly.
  std::string Serialize() const;
  static InvertedIndex Deserialize(std::istream &in, const std::string &source);
  void Save(const std::string &path) const;
  static InvertedIndex Load(const std::string &path);

 private:
  TermId Intern(const std::string &term);
  void Finish();

  AnalyzerConfig analyzer_;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, uint32_t> doc_index_;
  std::vector<uint32_t> doc_lengths_;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> term_index_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::vector<std::pair<TermId, uint32_t>>> forward_;
  double avg_doc_length_ = 0;
  uint64_t total_tokens_ = 0;
};

// Query terms with weights; for plain queries the weights are term counts.
using WeightedQuery = std::vector<std::pair<std::string, double>>;

WeightedQuery CountTerms(const std::vector<std::string> &terms);

double Bm25Idf(const InvertedIndex &index, uint32_t df);

// Sum over query terms (with multiplicity) of idf * tf (k1 + 1) /
// (tf + k1 (1 - b + b dl / avgdl)). Throws for unknown doc_id.
double Bm25Score(const InvertedIndex &index,
                 const std::vector<std::string> &query_terms,
                 const std::string &doc_id, const Bm25Params &params = {});

// Scores of every document (internal id order) for a weighted query.
std::vector<double> ScoreAll(const InvertedIndex &index,
                             const WeightedQuery &query,
                             const Bm25Params &params = {});

// Original query model interpolated with a relevance model estimated from
// the top BM25 documents. Weights sum to one; sorted weight desc, term asc.
WeightedQuery Rm3Expand(const InvertedIndex &index,
                        const std::vector<std::string> &query_terms,
                        const Rm3Params &rm3 = {},
                        const Bm25Params &bm25 = {});

struct RetrievalConfig {
  Bm25Params bm25;
  Rm3Params rm3;
  RetrievalMode mode = RetrievalMode::kBm25Rm3;
  int depth = 1000;
};

// Top-k documents. Every document is a candidate, so k beyond the corpus
// size returns the whole corpus.
Ranking Retrieve(const InvertedIndex &index, const Query &query,
                 const RetrievalConfig &cfg);

}  // namespace dreq

#endif  // DREQ_RETRIEVAL_H_

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

#ifndef DREQ_ENTITY_RANKING_H_
#define DREQ_ENTITY_RANKING_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/embeddings.h"
#include "dreq/optim.h"
#include "dreq/retrieval.h"
#include "dreq/run.h"

namespace dreq {

// Linear scorer S(e, Q) = w . enc + bias over query-conditioned encodings.
struct EntityHead {
  RowVector weights;  // 1 x k
  double bias = 0.0;

  int dim() const { return static_cast<int>(weights.size()); }
  bool operator==(const EntityHead &) const = default;
};

EntityHead InitEntityHead(int k, SplitMix64 &rng);

double ScoreEntity(const EntityHead &head, const Vector &encoding);

struct RankedEntity {
  std::string entity_id;
  double raw_score = 0.0;
  double prob = 0.0;
  int rank = 0;  // 1-based
};

// Softmax-normalized entity scores for one query, ordered by raw score desc
// then entity id asc.
struct EntityRanking {
  std::string query_id;
  std::vector<RankedEntity> entries;

  const RankedEntity *Find(const std::string &entity_id) const;
  std::size_t size() const { return entries.size(); }

 private:
  friend EntityRanking MakeEntityRanking(
      std::string, std::vector<std::pair<std::string, double>>, int);
  std::map<std::string, std::size_t> index_;
};

// Softmax over all scored entities, then sort. With top_k > 0 only the best
// top_k survive and the softmax runs over the survivors.
EntityRanking MakeEntityRanking(
    std::string query_id, std::vector<std::pair<std::string, double>> raw,
    int top_k = -1);

// Scores every pooled entity by its `query_id::entity_id` encoding.
EntityRanking RankEntities(const EntityHead &head, const std::string &query_id,
                           const std::vector<std::string> &pooled,
                           const EmbeddingStore &encodings, int top_k = -1);

struct LabeledEncoding {
  Vector encoding;
  double label = 0.0;
};

// Mean BCE of sigmoid(head score) and its gradient.
double EntityHeadLoss(const EntityHead &head,
                      const std::vector<LabeledEncoding> &examples,
                      EntityHead *gradient = nullptr);

// Adam on mean BCE; deterministic for a given cfg.seed.
EntityHead TrainEntityHead(const std::vector<LabeledEncoding> &examples,
                           const TrainConfig &cfg);

// Raw score is BM25 of the query against the entity description; entities
// missing from the description index score 0.
EntityRanking Bm25EntityRank(const Query &query,
                             const std::vector<std::string> &pooled,
                             const InvertedIndex &description_index,
                             const Bm25Params &params = {});

// Description index over a corpus's entity table, ordered by entity id.
InvertedIndex BuildDescriptionIndex(const CorpusStore &corpus,
                                    const AnalyzerConfig &analyzer = {});

// Sum over linked query entities of confidence * cos(E, e).
double EmbeddingEntityScore(const std::vector<QueryEntity> &query_entities,
                            const Vector &candidate,
                            const EmbeddingStore &entity_store);

// Per-query min-max normalization; a constant list maps to 0.5.
std::vector<double> MinMaxNormalize(const std::vector<double> &xs);

// lambda * minmax(bm25) + (1 - lambda) * minmax(embedding score). Throws
// when the query has no linked entity with an embedding.
EntityRanking GeeerEntityRank(const std::string &query_id,
                              const std::vector<QueryEntity> &query_entities,
                              const std::vector<std::string> &pooled,
                              const EmbeddingStore &entity_store,
                              const std::map<std::string, double> &bm25_scores,
                              double lambda = 0.5);

// Full-precision TSV: query_id, entity_id, raw, prob, rank.
std::string FormatEntityRankings(const std::map<std::string, EntityRanking> &r);
std::map<std::string, EntityRanking> ParseEntityRankings(
    std::istream &in, const std::string &source);
std::map<std::string, EntityRanking> LoadEntityRankings(const std::string &path);
Ranking ToRanking(const EntityRanking &ranking);

std::string SerializeEntityHead(const EntityHead &head);
EntityHead ParseEntityHead(std::istream &in, const std::string &source);
void SaveEntityHead(const EntityHead &head, const std::string &path);
EntityHead LoadEntityHead(const std::string &path);

}  // namespace dreq

#endif  // DREQ_ENTITY_RANKING_H_

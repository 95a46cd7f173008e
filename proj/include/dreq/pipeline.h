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

#ifndef DREQ_PIPELINE_H_
#define DREQ_PIPELINE_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/entity_ranking.h"
#include "dreq/evaluation.h"
#include "dreq/model.h"
#include "dreq/retrieval.h"
#include "dreq/synthetic.h"
#include "dreq/training.h"

namespace dreq {

// Retrieves every query; per-query work is spread over `threads` threads and
// the result does not depend on the thread count.
Run RetrieveAll(const InvertedIndex &index, const std::vector<Query> &queries,
                const RetrievalConfig &cfg, int threads = 1);

std::vector<const Document *> CandidateDocuments(const CorpusStore &corpus,
                                                 const Ranking &candidates);

// Pooled entity set per query.
std::map<std::string, std::vector<std::string>> PoolAll(const CorpusStore &corpus,
                                                        const Run &candidates);

// Transferred entity labels for the given queries.
std::map<std::string, std::vector<EntityLabel>> TransferAll(
    const CorpusStore &corpus, const Qrels &qrels, const Run &candidates,
    const std::vector<std::string> &query_ids);

// One entity head per fold, trained on that fold's training queries, with
// rankings of every query's pooled entities under each head.
struct FoldEntityRankings {
  std::vector<EntityHead> heads;
  std::vector<std::map<std::string, EntityRanking>> rankings;

  const EntityRanking &Lookup(std::size_t fold, const std::string &query_id) const;
  // Each query ranked by the head that never saw it.
  std::map<std::string, EntityRanking> OutOfFold(const FoldPlan &plan) const;
};

// Entities of the candidates plus those of the query's judged-relevant
// documents outside the candidates. Training queries are ranked over this
// pool so every positive example's entities have a ranking entry.
std::vector<std::string> TrainingPool(const CorpusStore &corpus, const Qrels &qrels,
                                      const Ranking &candidates);

using FoldRanker = std::function<EntityRanking(
    std::size_t fold, const std::string &query_id, const std::vector<std::string> &pool)>;

// Ranks every query once per fold: test queries over their candidate pool,
// training queries over TrainingPool. `heads` is left empty.
FoldEntityRankings RankFoldEntities(const CorpusStore &corpus, const Qrels &qrels,
                                    const Run &candidates, const FoldPlan &folds,
                                    const FoldRanker &rank);

// One head per fold on transferred labels of that fold's training queries.
std::vector<EntityHead> TrainFoldEntityHeads(const CorpusStore &corpus,
                                             const Qrels &qrels, const Run &candidates,
                                             const FoldPlan &folds,
                                             const EmbeddingStore &encodings,
                                             const TrainConfig &cfg);

FoldEntityRankings TrainFoldEntityRankers(const CorpusStore &corpus,
                                          const Qrels &qrels,
                                          const Run &candidates,
                                          const FoldPlan &folds,
                                          const EmbeddingStore &encodings,
                                          const TrainConfig &cfg, int top_k = -1);

struct AblationVariant {
  std::string name;
  DreqOptions options;
};

// probability, uniform, rr and no-entity.
std::vector<AblationVariant> StandardAblations();

struct AblationResult {
  std::string name;
  Run run;
  MetricsReport metrics;
  HelpedCounts helped;  // nDCG@20 against the candidate ranking
};

std::vector<AblationResult> RunAblations(
    const std::vector<AblationVariant> &variants,
    const std::vector<TrainingExample> &examples, const FoldPlan &folds,
    const Run &candidates, const RankingLookup &rankings,
    const ScoringContext &ctx, const Qrels &qrels,
    const std::vector<std::string> &query_ids, const TrainConfig &cfg,
    int threads = 1);

// TSV table: system, map, ndcg_cut_20, P_20, recall_1000, helped, hurt.
std::string FormatAblationTable(const MetricsReport &baseline,
                                const std::vector<AblationResult> &results);

struct ExperimentConfig {
  RetrievalConfig retrieval;
  int num_folds = 5;
  TrainConfig entity_train;
  TrainConfig dreq_train;
  int threads = 1;
};

struct ExperimentResult {
  Run candidates;
  MetricsReport baseline;
  std::vector<AblationResult> ablations;

  const AblationResult &Find(const std::string &name) const;
};

// Retrieval, per-fold entity heads and the ablation sweep on one collection.
ExperimentResult RunPlantedExperiment(const PlantedCollection &collection,
                                      const ExperimentConfig &cfg,
                                      const std::vector<AblationVariant> &variants);

}  // namespace dreq

#endif  // DREQ_PIPELINE_H_

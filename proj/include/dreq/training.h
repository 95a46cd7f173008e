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

#ifndef DREQ_TRAINING_H_
#define DREQ_TRAINING_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/entity_ranking.h"
#include "dreq/model.h"
#include "dreq/optim.h"
#include "dreq/run.h"

namespace dreq {

struct TrainingExample {
  std::string query_id;
  std::string item_id;  // doc_id or entity_id
  double label = 0.0;

  bool operator==(const TrainingExample &) const = default;
};

// Positives are candidates judged relevant; negatives are drawn without
// replacement from candidates judged non-relevant or unjudged, as many as
// there are positives. Queries without a relevant candidate are skipped and
// reported in `skipped`.
std::vector<TrainingExample> BuildDocExamples(
    const Qrels &qrels, const Run &candidates, uint64_t seed,
    std::vector<std::string> *skipped = nullptr);

// Same balancing over transferred entity labels.
std::vector<TrainingExample> BuildEntityExamples(
    const std::map<std::string, std::vector<EntityLabel>> &labels,
    uint64_t seed);

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct FoldPlan {
  std::vector<Fold> folds;

  // Index of the fold whose test set holds query_id; throws if none.
  std::size_t TestFoldOf(const std::string &query_id) const;
  // Throws std::logic_error unless test sets partition the queries and no
  // query trains in its own fold.
  void CheckIntegrity() const;
};

// Seeded shuffle, then round-robin assignment to k test sets.
FoldPlan MakeFolds(std::vector<std::string> query_ids, int k, uint64_t seed);

std::string FoldPlanToJson(const FoldPlan &plan);
FoldPlan FoldPlanFromJson(const std::string &text);

// A document example resolved to embeddings. Entity rows index the entity
// table being trained (or read).
struct DocSample {
  Vector query;
  Vector text;
  std::vector<std::pair<std::size_t, double>> entities;  // (row, weight)
  double label = 0.0;
};

struct DreqGradients {
  Matrix fusion_weights;
  Vector fusion_bias;
  RowVector score_weights;
  double score_bias = 0.0;
  Matrix entity_table;  // m x rows like EntityTableMatrix; empty unless requested
};

// Rows of the entity table as an m x rows matrix (one column per entity).
Matrix EntityTableMatrix(const EmbeddingStore &store);

// Mean BCE over samples. When grads is non-null fills every parameter
// gradient; entity table gradients only when with_entity_grads is set.
double DreqLoss(const DreqModel &model, const Matrix &entity_table,
                const std::vector<DocSample> &samples,
                DreqGradients *grads = nullptr, bool with_entity_grads = false);

// A document example whose probability-mode weights come from a live entity
// head, for end-to-end gradients with respect to the head.
struct HeadSample {
  Vector query;
  Vector text;
  std::vector<std::size_t> entity_rows;
  std::vector<Vector> encodings;  // one per entity row, dim k
  double label = 0.0;
};

// DREQ loss with probability weights computed from the head. Softmax over the
// pooled set followed by per-document renormalization reduces to a softmax
// over the document's entities, which is what this evaluates.
double DreqLossThroughHead(const DreqModel &model, const EntityHead &head,
                           const Matrix &entity_table,
                           const std::vector<HeadSample> &samples,
                           EntityHead *head_grad = nullptr);

using RankingLookup =
    std::function<const EntityRanking &(std::size_t fold, const std::string &)>;

struct TrainLogRow {
  int epoch = 0;
  std::size_t fold = 0;
  double loss = 0.0;
};

std::string FormatTrainLog(const std::vector<TrainLogRow> &log);

// Resolves examples into samples against the model's weighting and the
// entity table ids. Throws naming the first missing embedding.
std::vector<DocSample> ResolveSamples(const DreqModel &model,
                                      const std::vector<TrainingExample> &examples,
                                      const std::function<const EntityRanking &(
                                          const std::string &)> &rankings,
                                      const EmbeddingStore &entity_table,
                                      const ScoringContext &ctx);

// Trains one model on the given samples from the initial parameters.
DreqModel FitDreq(DreqModel model, const std::vector<DocSample> &samples,
                  const EmbeddingStore &entity_store, const TrainConfig &cfg,
                  std::size_t fold, std::vector<TrainLogRow> *log = nullptr);

struct CrossValidationResult {
  std::vector<DreqModel> models;  // one per fold
  Run reranked;                   // out-of-fold re-ranking of test queries
  std::vector<TrainLogRow> log;
};

struct DreqOptions {
  WeightingOptions weighting;
  bool use_entities = true;
};

// Per fold: initialize, train on train-query examples, re-rank the fold's
// test queries. Folds are independent and may run on `threads` threads.
CrossValidationResult TrainDreq(const DreqOptions &options,
                                const std::vector<TrainingExample> &examples,
                                const FoldPlan &folds, const Run &candidates,
                                const RankingLookup &rankings,
                                const ScoringContext &ctx,
                                const TrainConfig &cfg, int threads = 1);

}  // namespace dreq

#endif  // DREQ_TRAINING_H_

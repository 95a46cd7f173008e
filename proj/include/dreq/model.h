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

#ifndef DREQ_MODEL_H_
#define DREQ_MODEL_H_

#include <optional>
#include <string>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/embeddings.h"
#include "dreq/entity_ranking.h"
#include "dreq/run.h"

namespace dreq {

enum class WeightingMode { kProbability, kUniform, kReciprocalRank };

WeightingMode ParseWeightingMode(const std::string &name);
std::string ToString(WeightingMode mode);

struct WeightingOptions {
  WeightingMode mode = WeightingMode::kProbability;
  // Multiply each entity's weight by its mention count in the document.
  bool count_mentions = false;
  // Drop document entities missing from the ranking instead of failing
  // (needed when the entity ranking was truncated to its top entries).
  bool allow_missing = false;
};

struct EntityWeight {
  std::string entity_id;
  double weight = 0.0;
};

// Per-document entity weights, one per distinct entity in first-mention
// order. Probability mode renormalizes the ranking's probabilities over the
// document; uniform gives 1; reciprocal rank gives 1 / rank.
std::vector<EntityWeight> EntityWeights(const Document &doc,
                                        const EntityRanking &ranking,
                                        const WeightingOptions &options);

// Weighted sum of entity embeddings; zero vector when there are no weights.
Vector EntityCentricEmbedding(const std::vector<EntityWeight> &weights,
                              const EmbeddingStore &entity_store);

// Mean of the passage embeddings present in the store. Throws if none is.
Vector TextCentricEmbedding(const std::vector<Passage> &passages,
                            const EmbeddingStore &passage_store);

struct Interactions {
  Vector add;
  Vector sub;
  Vector mul;
};

template <typename DerivedQ, typename DerivedD>
Interactions InteractionVectors(const Eigen::MatrixBase<DerivedQ> &q,
                                const Eigen::MatrixBase<DerivedD> &dq) {
  if (q.size() != dq.size())
    throw ShapeError("interaction vectors: query and document dims differ");
  return {q + dq, q - dq, q.cwiseProduct(dq)};
}

// Trainable re-ranker parameters.
struct DreqModel {
  DimsConfig dims;
  Matrix fusion_weights;     // W2, p x (n + m), text block first
  Vector fusion_bias;        // p
  RowVector score_weights;   // W3, 1 x 5p over [Q; dQ; add; sub; mul]
  double score_bias = 0.0;
  WeightingOptions weighting;
  bool use_entities = true;
  bool finetune_entity_embeddings = false;
  // Fine-tuned copy of the entity embeddings, when fine-tuning is enabled.
  std::optional<EmbeddingStore> entity_table;

  void Validate() const;
  const EmbeddingStore &EntityStore(const EmbeddingStore &fallback) const {
    return entity_table ? *entity_table : fallback;
  }
};

DreqModel InitDreqModel(const DimsConfig &dims, const WeightingOptions &weighting,
                        bool use_entities, SplitMix64 &rng);

// d^Q = W2 [V_t; V_e] + b.
Vector HybridEmbedding(const DreqModel &model, const Vector &text,
                       const Vector &entity);

// W3 [Q; dQ; Q + dQ; Q - dQ; Q o dQ] + b3, with V_e zeroed when entities
// are disabled.
double ScoreFromEmbeddings(const DreqModel &model, const Vector &query,
                           const Vector &text, const Vector &entity,
                           Vector *hybrid_out = nullptr);

struct ScoredDocument {
  std::string doc_id;
  double logit = 0.0;
  double prob = 0.5;
  std::vector<EntityWeight> weights;
  bool no_entities = false;
  double entity_norm = 0.0;
  double text_norm = 0.0;
  double hybrid_norm = 0.0;
};

// What scoring needs besides the model: the corpus, the embedding stores and
// the passage segmentation used for the passage store keys.
struct ScoringContext {
  const CorpusStore *corpus = nullptr;
  const StoreSet *stores = nullptr;
  SegmenterConfig segmenter;
};

Vector DocumentTextEmbedding(const Document &doc, const ScoringContext &ctx);

ScoredDocument ScoreDocument(const DreqModel &model, const Vector &query,
                             const Document &doc, const EntityRanking &ranking,
                             const ScoringContext &ctx);

// Reorders candidates by logit desc, doc_id asc. Scores in the output are
// the logits.
Ranking Rerank(const DreqModel &model, const Ranking &candidates,
               const EntityRanking &ranking, const ScoringContext &ctx);

// Unsupervised baseline: max cosine over (query entity, document entity)
// pairs; documents without embedded entities score -inf.
Ranking MaxSimCosRerank(const std::vector<QueryEntity> &query_entities,
                        const Ranking &candidates, const CorpusStore &corpus,
                        const EmbeddingStore &entity_store);

// Checkpoint: a header line with dims, mode and flags, then row-major
// parameter blocks in the store number format; the fine-tuned entity table
// follows when present.
std::string SerializeModel(const DreqModel &model);
DreqModel ParseModel(std::istream &in, const std::string &source);
void SaveModel(const DreqModel &model, const std::string &path);
DreqModel LoadModel(const std::string &path);

}  // namespace dreq

#endif  // DREQ_MODEL_H_

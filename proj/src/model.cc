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

#include "dreq/model.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dreq/io.h"

namespace dreq {

WeightingMode ParseWeightingMode(const std::string &name) {
  if (name == "probability" || name == "prob") return WeightingMode::kProbability;
  if (name == "uniform") return WeightingMode::kUniform;
  if (name == "rr" || name == "reciprocal_rank") return WeightingMode::kReciprocalRank;
  throw std::invalid_argument("unknown weighting mode '" + name +
                              "' (expected probability, uniform or rr)");
}

std::string ToString(WeightingMode mode) {
  switch (mode) {
    case WeightingMode::kProbability: return "probability";
    case WeightingMode::kUniform: return "uniform";
    case WeightingMode::kReciprocalRank: return "rr";
  }
  return "?";
}

std::vector<EntityWeight> EntityWeights(const Document &doc,
                                        const EntityRanking &ranking,
                                        const WeightingOptions &options) {
  std::vector<std::string> order;
  std::map<std::string, int> counts;
  for (const auto &m : doc.mentions) {
    if (counts[m.entity_id]++ == 0) order.push_back(m.entity_id);
  }
  std::vector<EntityWeight> weights;
  weights.reserve(order.size());
  std::vector<double> raw;
  double total = 0.0;
  for (const auto &id : order) {
    const RankedEntity *e = ranking.Find(id);
    if (e == nullptr) {
      if (options.allow_missing) continue;
      throw std::out_of_range("entity " + id + " of document " + doc.doc_id +
                              " is missing from the ranking for query " +
                              ranking.query_id);
    }
    const double multiplicity = options.count_mentions ? counts[id] : 1.0;
    double w = 0.0;
    switch (options.mode) {
      case WeightingMode::kProbability: raw.push_back(e->raw_score); break;
      case WeightingMode::kUniform: w = 1.0; break;
      case WeightingMode::kReciprocalRank: w = 1.0 / e->rank; break;
    }
    w *= multiplicity;
    total += w;
    weights.push_back({id, w});
  }
  // prob_e / sum of the document's probs is a softmax of the raw scores over
  // the document's entities; computed that way it cannot underflow.
  if (options.mode == WeightingMode::kProbability && !weights.empty()) {
    const double shift = *std::max_element(raw.begin(), raw.end());
    total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double multiplicity =
          options.count_mentions ? counts[weights[i].entity_id] : 1.0;
      weights[i].weight = multiplicity * std::exp(raw[i] - shift);
      total += weights[i].weight;
    }
    for (auto &w : weights) w.weight /= total;
  }
  return weights;
}

Vector EntityCentricEmbedding(const std::vector<EntityWeight> &weights,
                              const EmbeddingStore &entity_store) {
  Vector sum = Vector::Zero(entity_store.dim());
  for (const auto &w : weights) {
    const Vector *e = entity_store.Find(w.entity_id);
    if (e == nullptr)
      throw std::out_of_range("no embedding for entity " + w.entity_id);
    sum.noalias() += w.weight * *e;
  }
  return sum;
}

Vector TextCentricEmbedding(const std::vector<Passage> &passages,
                            const EmbeddingStore &passage_store) {
  Vector sum = Vector::Zero(passage_store.dim());
  int count = 0;
  for (const auto &p : passages) {
    if (const Vector *v = passage_store.Find(p.Key())) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) {
    throw std::out_of_range(
        "no passage embeddings for document " +
        (passages.empty() ? std::string("(no passages)") : passages.front().doc_id));
  }
  return sum / count;
}

void DreqModel::Validate() const {
  dims.Validate();
  const auto p = dims.p;
  if (fusion_weights.rows() != p || fusion_weights.cols() != dims.n + dims.m)
    throw ShapeError("W2 must be p x (n + m)");
  if (fusion_bias.size() != p) throw ShapeError("fusion bias must have dim p");
  if (score_weights.size() != 5 * p) throw ShapeError("W3 must be 1 x 5p");
  if (!fusion_weights.allFinite() || !fusion_bias.allFinite() ||
      !score_weights.allFinite() || !std::isfinite(score_bias))
    throw std::invalid_argument("model has non-finite parameters");
  if (entity_table && entity_table->dim() != dims.m)
    throw ShapeError("fine-tuned entity table must have dim m");
}

DreqModel InitDreqModel(const DimsConfig &dims, const WeightingOptions &weighting,
                        bool use_entities, SplitMix64 &rng) {
  dims.Validate();
  DreqModel model;
  model.dims = dims;
  model.fusion_weights = GlorotUniform(dims.p, dims.n + dims.m, rng);
  model.fusion_bias = Vector::Zero(dims.p);
  model.score_weights = GlorotUniform(1, 5 * dims.p, rng);
  model.score_bias = 0.0;
  model.weighting = weighting;
  model.use_entities = use_entities;
  return model;
}

Vector HybridEmbedding(const DreqModel &model, const Vector &text,
                       const Vector &entity) {
  if (text.size() != model.dims.n || entity.size() != model.dims.m)
    throw ShapeError("hybrid embedding: expected text dim " +
                     std::to_string(model.dims.n) + " and entity dim " +
                     std::to_string(model.dims.m));
  Vector joint(text.size() + entity.size());
  joint << text, entity;
  return Linear(model.fusion_weights, joint, model.fusion_bias);
}

double ScoreFromEmbeddings(const DreqModel &model, const Vector &query,
                           const Vector &text, const Vector &entity,
                           Vector *hybrid_out) {
  const auto p = model.dims.p;
  if (query.size() != p) throw ShapeError("query embedding must have dim p");
  const Vector hybrid =
      model.use_entities ? HybridEmbedding(model, text, entity)
                         : HybridEmbedding(model, text, Vector::Zero(model.dims.m));
  const Interactions x = InteractionVectors(query, hybrid);
  const auto &w = model.score_weights;
  const double logit = w.segment(0, p).dot(query) + w.segment(p, p).dot(hybrid) +
                       w.segment(2 * p, p).dot(x.add) +
                       w.segment(3 * p, p).dot(x.sub) +
                       w.segment(4 * p, p).dot(x.mul) + model.score_bias;
  if (hybrid_out) *hybrid_out = hybrid;
  return logit;
}

Vector DocumentTextEmbedding(const Document &doc, const ScoringContext &ctx) {
  return TextCentricEmbedding(SegmentPassages(doc, ctx.segmenter),
                              ctx.stores->passage);
}

ScoredDocument ScoreDocument(const DreqModel &model, const Vector &query,
                             const Document &doc, const EntityRanking &ranking,
                             const ScoringContext &ctx) {
  ScoredDocument out;
  out.doc_id = doc.doc_id;
  const Vector text = DocumentTextEmbedding(doc, ctx);
  Vector entity = Vector::Zero(model.dims.m);
  if (model.use_entities) {
    out.weights = EntityWeights(doc, ranking, model.weighting);
    entity = EntityCentricEmbedding(out.weights,
                                    model.EntityStore(ctx.stores->entity));
  }
  out.no_entities = doc.mentions.empty();
  Vector hybrid;
  out.logit = ScoreFromEmbeddings(model, query, text, entity, &hybrid);
  out.prob = Sigmoid(out.logit);
  out.entity_norm = entity.norm();
  out.text_norm = text.norm();
  out.hybrid_norm = hybrid.norm();
  return out;
}

Ranking Rerank(const DreqModel &model, const Ranking &candidates,
               const EntityRanking &ranking, const ScoringContext &ctx) {
  if (candidates.empty())
    throw std::invalid_argument("no candidates to re-rank for query " +
                                candidates.query_id);
  const Vector &query = ctx.stores->query.At(candidates.query_id);
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(candidates.size());
  for (const auto &c : candidates.entries) {
    const Document &doc = ctx.corpus->Get(c.id);
    scored.emplace_back(c.id, ScoreDocument(model, query, doc, ranking, ctx).logit);
  }
  return MakeRanking(candidates.query_id, std::move(scored));
}

Ranking MaxSimCosRerank(const std::vector<QueryEntity> &query_entities,
                        const Ranking &candidates, const CorpusStore &corpus,
                        const EmbeddingStore &entity_store) {
  std::vector<const Vector *> query_vectors;
  for (const auto &qe : query_entities) {
    if (const Vector *v = entity_store.Find(qe.entity_id)) query_vectors.push_back(v);
  }
  if (query_vectors.empty())
    throw std::invalid_argument("query " + candidates.query_id +
                                " has no linked entities with embeddings");
  std::vector<std::pair<std::string, double>> scored;
  for (const auto &c : candidates.entries) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto &id : corpus.Get(c.id).DistinctEntities()) {
      const Vector *e = entity_store.Find(id);
      if (e == nullptr) continue;
      for (const Vector *q : query_vectors) best = std::max(best, Cosine(*q, *e));
    }
    scored.emplace_back(c.id, best);
  }
  return MakeRanking(candidates.query_id, std::move(scored));
}

namespace {

void WriteBlock(std::string &out, const std::string &name, const Matrix &m) {
  out += name + ' ' + std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += FormatReal(m(r, c));
    }
    out += '\n';
  }
}

Matrix ReadBlock(std::istream &in, const std::string &name,
                 const std::string &source) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(source + ": missing block " + name);
  auto head = SplitWhitespace(line);
  if (head.size() != 3 || head[0] != name)
    throw std::runtime_error(source + ": expected block " + name);
  const int rows = std::stoi(std::string(head[1]));
  const int cols = std::stoi(std::string(head[2]));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(in, line))
      throw std::runtime_error(source + ": truncated block " + name);
    auto tokens = SplitWhitespace(line);
    if (static_cast<int>(tokens.size()) != cols)
      throw std::runtime_error(source + ": block " + name + " row " +
                               std::to_string(r) + " has wrong width");
    for (int c = 0; c < cols; ++c) m(r, c) = ParseReal(tokens[c]);
  }
  return m;
}

}  // namespace

std::string SerializeModel(const DreqModel &model) {
  const auto &d = model.dims;
  std::string out = "#dreq-checkpoint v1 k=" + std::to_string(d.k) +
                    " m=" + std::to_string(d.m) + " n=" + std::to_string(d.n) +
                    " p=" + std::to_string(d.p) +
                    " mode=" + ToString(model.weighting.mode) +
                    " count_mentions=" + (model.weighting.count_mentions ? "1" : "0") +
                    " allow_missing=" + (model.weighting.allow_missing ? "1" : "0") +
                    " use_entities=" + (model.use_entities ? "1" : "0") +
                    " finetune=" + (model.finetune_entity_embeddings ? "1" : "0") +
                    " entity_table=" + (model.entity_table ? "1" : "0") + '\n';
  WriteBlock(out, "fusion_weights", model.fusion_weights);
  WriteBlock(out, "fusion_bias", model.fusion_bias.transpose());
  WriteBlock(out, "score_weights", model.score_weights);
  Matrix bias(1, 1);
  bias(0, 0) = model.score_bias;
  WriteBlock(out, "score_bias", bias);
  if (model.entity_table) {
    std::ostringstream table;
    WriteStore(*model.entity_table, table);
    out += table.str();
  }
  return out;
}

DreqModel ParseModel(std::istream &in, const std::string &source) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#dreq-checkpoint", 0) != 0)
    throw std::runtime_error(source + ": not a dreq checkpoint");
  std::map<std::string, std::string> fields;
  for (auto tok : SplitWhitespace(header)) {
    auto eq = tok.find('=');
    if (eq != std::string_view::npos)
      fields[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
  }
  auto get = [&](const std::string &key) {
    auto it = fields.find(key);
    if (it == fields.end())
      throw std::runtime_error(source + ": checkpoint header lacks " + key);
    return it->second;
  };
  DreqModel model;
  model.dims = {std::stoi(get("k")), std::stoi(get("m")), std::stoi(get("n")),
                std::stoi(get("p"))};
  model.weighting.mode = ParseWeightingMode(get("mode"));
  model.weighting.count_mentions = get("count_mentions") == "1";
  model.weighting.allow_missing = get("allow_missing") == "1";
  model.use_entities = get("use_entities") == "1";
  model.finetune_entity_embeddings = get("finetune") == "1";
  model.fusion_weights = ReadBlock(in, "fusion_weights", source);
  model.fusion_bias = ReadBlock(in, "fusion_bias", source).transpose();
  model.score_weights = ReadBlock(in, "score_weights", source);
  model.score_bias = ReadBlock(in, "score_bias", source)(0, 0);
  if (get("entity_table") == "1") model.entity_table = ParseStore(in, source);
  model.Validate();
  return model;
}

void SaveModel(const DreqModel &model, const std::string &path) {
  WriteFileAtomic(path, SerializeModel(model));
}

DreqModel LoadModel(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return ParseModel(in, path);
}

}  // namespace dreq

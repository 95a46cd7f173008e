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

#include "dreq/training.h"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "json.hpp"

namespace dreq {

namespace {

uint64_t FoldSeed(uint64_t seed, std::size_t fold, uint64_t salt) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (fold + 1)) ^ salt;
}

// Sample min(count, pool.size()) items without replacement, keeping the
// draw order.
template <typename T>
std::vector<T> SampleWithoutReplacement(std::vector<T> pool, std::size_t count,
                                        SplitMix64 &rng) {
  Shuffle(pool, rng);
  if (pool.size() > count) pool.resize(count);
  return pool;
}

}  // namespace

std::vector<TrainingExample> BuildDocExamples(const Qrels &qrels,
                                              const Run &candidates,
                                              uint64_t seed,
                                              std::vector<std::string> *skipped) {
  std::vector<TrainingExample> out;
  SplitMix64 rng(seed);
  for (const auto &[qid, ranking] : candidates) {
    std::vector<std::string> positives;
    for (const auto &[doc, grade] : qrels.ForQuery(qid)) {
      if (grade >= Qrels::kRelevantGrade) positives.push_back(doc);
    }
    std::vector<std::string> pool;
    for (const auto &c : ranking.entries) {
      if (!qrels.IsRelevant(qid, c.id)) pool.push_back(c.id);
    }
    if (positives.empty()) {
      if (skipped) skipped->push_back(qid);
      continue;
    }
    for (const auto &doc : positives) out.push_back({qid, doc, 1.0});
    for (auto &doc : SampleWithoutReplacement(std::move(pool), positives.size(), rng))
      out.push_back({qid, std::move(doc), 0.0});
  }
  return out;
}

std::vector<TrainingExample> BuildEntityExamples(
    const std::map<std::string, std::vector<EntityLabel>> &labels,
    uint64_t seed) {
  std::vector<TrainingExample> out;
  SplitMix64 rng(seed);
  for (const auto &[qid, entities] : labels) {
    std::vector<std::string> positives, pool;
    for (const auto &e : entities) (e.label ? positives : pool).push_back(e.entity_id);
    if (positives.empty()) continue;
    for (const auto &id : positives) out.push_back({qid, id, 1.0});
    for (auto &id : SampleWithoutReplacement(std::move(pool), positives.size(), rng))
      out.push_back({qid, std::move(id), 0.0});
  }
  return out;
}

std::size_t FoldPlan::TestFoldOf(const std::string &query_id) const {
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto &test = folds[f].test;
    if (std::find(test.begin(), test.end(), query_id) != test.end()) return f;
  }
  throw std::out_of_range("query " + query_id + " is in no test fold");
}

void FoldPlan::CheckIntegrity() const {
  std::set<std::string> all, seen;
  for (const auto &f : folds) {
    all.insert(f.train.begin(), f.train.end());
    all.insert(f.test.begin(), f.test.end());
  }
  for (std::size_t i = 0; i < folds.size(); ++i) {
    std::set<std::string> train(folds[i].train.begin(), folds[i].train.end());
    for (const auto &q : folds[i].test) {
      if (!seen.insert(q).second)
        throw std::logic_error("query " + q + " appears in two test folds");
      if (train.count(q))
        throw std::logic_error("query " + q + " trains in its own fold " +
                               std::to_string(i));
    }
  }
  if (seen != all) throw std::logic_error("test folds do not cover every query");
}

FoldPlan MakeFolds(std::vector<std::string> query_ids, int k, uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  std::sort(query_ids.begin(), query_ids.end());
  query_ids.erase(std::unique(query_ids.begin(), query_ids.end()), query_ids.end());
  if (query_ids.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("cannot split " + std::to_string(query_ids.size()) +
                                " queries into " + std::to_string(k) + " folds");
  }
  SplitMix64 rng(seed);
  Shuffle(query_ids, rng);
  FoldPlan plan;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < query_ids.size(); ++i)
    plan.folds[i % static_cast<std::size_t>(k)].test.push_back(query_ids[i]);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (std::size_t g = 0; g < plan.folds.size(); ++g) {
      if (g == f) continue;
      plan.folds[f].train.insert(plan.folds[f].train.end(),
                                 plan.folds[g].test.begin(),
                                 plan.folds[g].test.end());
    }
    std::sort(plan.folds[f].train.begin(), plan.folds[f].train.end());
  }
  return plan;
}

std::string FoldPlanToJson(const FoldPlan &plan) {
  nlohmann::json j;
  j["folds"] = nlohmann::json::array();
  for (const auto &f : plan.folds)
    j["folds"].push_back({{"train", f.train}, {"test", f.test}});
  return j.dump(2) + "\n";
}

FoldPlan FoldPlanFromJson(const std::string &text) {
  FoldPlan plan;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto &f : j.at("folds")) {
      plan.folds.push_back({f.at("train").get<std::vector<std::string>>(),
                            f.at("test").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception &e) {
    throw std::runtime_error(std::string("malformed fold plan: ") + e.what());
  }
  plan.CheckIntegrity();
  return plan;
}

Matrix EntityTableMatrix(const EmbeddingStore &store) {
  Matrix table(store.dim(), static_cast<Eigen::Index>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i)
    table.col(static_cast<Eigen::Index>(i)) = store.row(i);
  return table;
}

namespace {

// Gradient of the logit with respect to the hybrid embedding dQ:
// W3_dQ + W3_add - W3_sub + W3_mul o Q.
Vector LogitGradHybrid(const DreqModel &model, const Vector &query) {
  const auto p = model.dims.p;
  const auto &w = model.score_weights;
  return (w.segment(p, p) + w.segment(2 * p, p) - w.segment(3 * p, p)).transpose() +
         w.segment(4 * p, p).transpose().cwiseProduct(query);
}

void ZeroGradients(const DreqModel &model, const Matrix &table, bool entities,
                   DreqGradients &g) {
  g.fusion_weights = Matrix::Zero(model.fusion_weights.rows(), model.fusion_weights.cols());
  g.fusion_bias = Vector::Zero(model.fusion_bias.size());
  g.score_weights = RowVector::Zero(model.score_weights.size());
  g.score_bias = 0.0;
  g.entity_table = entities ? Matrix::Zero(table.rows(), table.cols()) : Matrix();
}

// Forward pass shared by the two loss functions; returns the logit and
// leaves the fused input and hybrid embedding behind for backprop.
double Forward(const DreqModel &model, const Vector &query, const Vector &text,
               const Vector &entity, Vector &joint, Vector &hybrid) {
  const auto n = model.dims.n;
  const auto m = model.dims.m;
  joint.resize(n + m);
  joint.head(n) = text;
  if (model.use_entities) {
    joint.tail(m) = entity;
  } else {
    joint.tail(m).setZero();
  }
  return ScoreFromEmbeddings(model, query, text, joint.tail(m), &hybrid);
}

void AccumulateParamGrads(const DreqModel &model, const Vector &query,
                          const Vector &joint, const Vector &hybrid, double g,
                          DreqGradients &grads, Vector &d_hybrid) {
  const auto p = model.dims.p;
  grads.score_weights.segment(0, p) += g * query.transpose();
  grads.score_weights.segment(p, p) += g * hybrid.transpose();
  grads.score_weights.segment(2 * p, p) += g * (query + hybrid).transpose();
  grads.score_weights.segment(3 * p, p) += g * (query - hybrid).transpose();
  grads.score_weights.segment(4 * p, p) += g * query.cwiseProduct(hybrid).transpose();
  grads.score_bias += g;
  d_hybrid = g * LogitGradHybrid(model, query);
  grads.fusion_weights.noalias() += d_hybrid * joint.transpose();
  grads.fusion_bias += d_hybrid;
}

}  // namespace

double DreqLoss(const DreqModel &model, const Matrix &entity_table,
                const std::vector<DocSample> &samples, DreqGradients *grads,
                bool with_entity_grads) {
  if (samples.empty()) throw std::invalid_argument("empty batch");
  const auto n = model.dims.n;
  const auto m = model.dims.m;
  const bool entity_grads = grads && with_entity_grads && model.use_entities;
  if (grads) ZeroGradients(model, entity_table, entity_grads, *grads);
  std::vector<double> logits, labels;
  logits.reserve(samples.size());
  labels.reserve(samples.size());
  Vector entity(m), joint, hybrid, d_hybrid;
  for (const auto &s : samples) {
    entity.setZero();
    for (const auto &[row, w] : s.entities)
      entity.noalias() += w * entity_table.col(static_cast<Eigen::Index>(row));
    const double z = Forward(model, s.query, s.text, entity, joint, hybrid);
    logits.push_back(z);
    labels.push_back(s.label);
    if (!grads) continue;
    const double g = BceLogitGradient(z, s.label, samples.size());
    AccumulateParamGrads(model, s.query, joint, hybrid, g, *grads, d_hybrid);
    if (entity_grads) {
      const Vector d_entity = model.fusion_weights.block(0, n, model.dims.p, m).transpose() * d_hybrid;
      for (const auto &[row, w] : s.entities)
        grads->entity_table.col(static_cast<Eigen::Index>(row)) += w * d_entity;
    }
  }
  return BceLoss(logits, labels);
}

double DreqLossThroughHead(const DreqModel &model, const EntityHead &head,
                           const Matrix &entity_table,
                           const std::vector<HeadSample> &samples,
                           EntityHead *head_grad) {
  if (samples.empty()) throw std::invalid_argument("empty batch");
  const auto n = model.dims.n;
  const auto m = model.dims.m;
  if (head_grad) {
    head_grad->weights = RowVector::Zero(head.weights.size());
    head_grad->bias = 0.0;
  }
  DreqGradients scratch;
  ZeroGradients(model, entity_table, false, scratch);
  std::vector<double> logits, labels;
  Vector entity(m), joint, hybrid, d_hybrid;
  for (const auto &s : samples) {
    const auto count = static_cast<Eigen::Index>(s.entity_rows.size());
    Vector weights;
    entity.setZero();
    if (count > 0) {
      Vector raw(count);
      for (Eigen::Index i = 0; i < count; ++i) raw[i] = ScoreEntity(head, s.encodings[i]);
      weights = Softmax(raw);
      for (Eigen::Index i = 0; i < count; ++i)
        entity.noalias() += weights[i] * entity_table.col(static_cast<Eigen::Index>(s.entity_rows[i]));
    }
    const double z = Forward(model, s.query, s.text, entity, joint, hybrid);
    logits.push_back(z);
    labels.push_back(s.label);
    if (!head_grad || count == 0 || !model.use_entities) continue;
    const double g = BceLogitGradient(z, s.label, samples.size());
    AccumulateParamGrads(model, s.query, joint, hybrid, g, scratch, d_hybrid);
    const Vector d_entity = model.fusion_weights.block(0, n, model.dims.p, m).transpose() * d_hybrid;
    Vector d_weight(count);
    for (Eigen::Index i = 0; i < count; ++i)
      d_weight[i] = entity_table.col(static_cast<Eigen::Index>(s.entity_rows[i])).dot(d_entity);
    const double mean = weights.dot(d_weight);
    for (Eigen::Index i = 0; i < count; ++i) {
      const double d_raw = weights[i] * (d_weight[i] - mean);
      head_grad->weights += d_raw * s.encodings[i].transpose();
      head_grad->bias += d_raw;
    }
  }
  return BceLoss(logits, labels);
}

std::string FormatTrainLog(const std::vector<TrainLogRow> &log) {
  std::string out = "epoch\tfold\tloss\n";
  for (const auto &row : log) {
    out += std::to_string(row.epoch) + '\t' + std::to_string(row.fold) + '\t' +
           FormatReal(row.loss) + '\n';
  }
  return out;
}

std::vector<DocSample> ResolveSamples(
    const DreqModel &model, const std::vector<TrainingExample> &examples,
    const std::function<const EntityRanking &(const std::string &)> &rankings,
    const EmbeddingStore &entity_table, const ScoringContext &ctx) {
  std::vector<DocSample> samples;
  samples.reserve(examples.size());
  std::map<std::string, Vector> text_cache;
  for (const auto &ex : examples) {
    DocSample s;
    s.label = ex.label;
    const Vector *q = ctx.stores->query.Find(ex.query_id);
    if (q == nullptr)
      throw std::out_of_range("no query embedding for " + ex.query_id);
    s.query = *q;
    const Document &doc = ctx.corpus->Get(ex.item_id);
    auto it = text_cache.find(doc.doc_id);
    if (it == text_cache.end())
      it = text_cache.emplace(doc.doc_id, DocumentTextEmbedding(doc, ctx)).first;
    s.text = it->second;
    if (model.use_entities) {
      for (const auto &w : EntityWeights(doc, rankings(ex.query_id), model.weighting)) {
        if (!entity_table.Contains(w.entity_id))
          throw std::out_of_range("no embedding for entity " + w.entity_id +
                                  " (document " + doc.doc_id + ")");
        s.entities.emplace_back(entity_table.IndexOf(w.entity_id), w.weight);
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

DreqModel FitDreq(DreqModel model, const std::vector<DocSample> &samples,
                  const EmbeddingStore &entity_store, const TrainConfig &cfg,
                  std::size_t fold, std::vector<TrainLogRow> *log) {
  cfg.Validate();
  if (samples.empty()) throw std::invalid_argument("no training samples");
  const bool finetune = cfg.finetune_entity_embeddings && model.use_entities;
  model.finetune_entity_embeddings = finetune;
  Matrix table = EntityTableMatrix(model.EntityStore(entity_store));
  SplitMix64 rng(FoldSeed(cfg.seed, fold, 0x5bd1e995ULL));

  AdamState w2_state, b2_state, w3_state, b3_state, table_state;
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<DocSample> batch;
  DreqGradients grads;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Shuffle(order, rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      DreqLoss(model, table, batch, &grads, finetune);
      AdamStep(Eigen::Ref<Matrix>(model.fusion_weights), grads.fusion_weights, w2_state, cfg);
      AdamStep(Eigen::Ref<Vector>(model.fusion_bias), grads.fusion_bias, b2_state, cfg);
      Vector w3 = model.score_weights.transpose();
      AdamStep(Eigen::Ref<Vector>(w3), grads.score_weights.transpose(), w3_state, cfg);
      model.score_weights = w3.transpose();
      Vector b3(1), gb3(1);
      b3[0] = model.score_bias;
      gb3[0] = grads.score_bias;
      AdamStep(Eigen::Ref<Vector>(b3), gb3, b3_state, cfg);
      model.score_bias = b3[0];
      if (finetune) AdamStep(Eigen::Ref<Matrix>(table), grads.entity_table, table_state, cfg);
    }
    const double loss = DreqLoss(model, table, samples);
    if (log) log->push_back({epoch, fold, loss});
    if (best - loss < cfg.min_improvement) {
      if (++stale >= cfg.patience) break;
    } else {
      stale = 0;
    }
    best = std::min(best, loss);
  }
  if (finetune) {
    EmbeddingStore tuned = model.EntityStore(entity_store);
    for (std::size_t i = 0; i < tuned.size(); ++i)
      tuned.mutable_row(i) = table.col(static_cast<Eigen::Index>(i));
    model.entity_table = std::move(tuned);
  }
  return model;
}

CrossValidationResult TrainDreq(const DreqOptions &options,
                                const std::vector<TrainingExample> &examples,
                                const FoldPlan &folds, const Run &candidates,
                                const RankingLookup &rankings,
                                const ScoringContext &ctx,
                                const TrainConfig &cfg, int threads) {
  cfg.Validate();
  folds.CheckIntegrity();
  const DimsConfig dims = ctx.stores->dims();
  const std::size_t num_folds = folds.folds.size();

  struct FoldOutput {
    DreqModel model;
    std::vector<Ranking> rankings;
    std::vector<TrainLogRow> log;
  };
  std::vector<FoldOutput> outputs(num_folds);

  // Resolve every fold's samples up front so missing embeddings fail before
  // any training starts.
  std::vector<DreqModel> initial(num_folds);
  std::vector<std::vector<DocSample>> fold_samples(num_folds);
  for (std::size_t f = 0; f < num_folds; ++f) {
    SplitMix64 rng(FoldSeed(cfg.seed, f, 0));
    initial[f] = InitDreqModel(dims, options.weighting, options.use_entities, rng);
    const std::unordered_set<std::string> train(folds.folds[f].train.begin(),
                                                folds.folds[f].train.end());
    std::vector<TrainingExample> fold_examples;
    for (const auto &ex : examples)
      if (train.count(ex.query_id)) fold_examples.push_back(ex);
    if (fold_examples.empty())
      throw std::invalid_argument("fold " + std::to_string(f) + " has no training examples");
    auto lookup = [&, f](const std::string &qid) -> const EntityRanking & {
      return rankings(f, qid);
    };
    fold_samples[f] = ResolveSamples(initial[f], fold_examples, lookup,
                                     ctx.stores->entity, ctx);
  }

  auto run_fold = [&](std::size_t f) {
    FoldOutput &out = outputs[f];
    out.model = FitDreq(initial[f], fold_samples[f], ctx.stores->entity, cfg, f, &out.log);
    for (const auto &qid : folds.folds[f].test) {
      auto it = candidates.find(qid);
      if (it == candidates.end() || it->second.empty()) continue;
      out.rankings.push_back(Rerank(out.model, it->second, rankings(f, qid), ctx));
    }
  };

  if (threads <= 1) {
    for (std::size_t f = 0; f < num_folds; ++f) run_fold(f);
  } else {
    std::vector<std::exception_ptr> errors(num_folds);
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
      while (true) {
        std::size_t f;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= num_folds) return;
          f = next++;
        }
        try {
          run_fold(f);
        } catch (...) {
          errors[f] = std::current_exception();
        }
      }
    };
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
  }

  CrossValidationResult result;
  for (auto &out : outputs) {
    result.models.push_back(std::move(out.model));
    for (auto &r : out.rankings) result.reranked[r.query_id] = std::move(r);
    result.log.insert(result.log.end(), out.log.begin(), out.log.end());
  }
  return result;
}

}  // namespace dreq

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

#include "dreq/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace dreq {

Run RetrieveAll(const InvertedIndex &index, const std::vector<Query> &queries,
                const RetrievalConfig &cfg, int threads) {
  std::vector<Ranking> rankings(queries.size());
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                              std::max<std::size_t>(queries.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < queries.size(); ++i)
      rankings[i] = Retrieve(index, queries[i], cfg);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < queries.size(); i += workers)
            rankings[i] = Retrieve(index, queries[i], cfg);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
  }
  Run run;
  for (auto &r : rankings) run[r.query_id] = std::move(r);
  return run;
}

std::vector<const Document *> CandidateDocuments(const CorpusStore &corpus,
                                                 const Ranking &candidates) {
  std::vector<const Document *> docs;
  docs.reserve(candidates.size());
  for (const auto &e : candidates.entries) docs.push_back(&corpus.Get(e.id));
  return docs;
}

std::map<std::string, std::vector<std::string>> PoolAll(const CorpusStore &corpus,
                                                        const Run &candidates) {
  std::map<std::string, std::vector<std::string>> pools;
  for (const auto &[qid, ranking] : candidates)
    pools[qid] = PoolEntities(CandidateDocuments(corpus, ranking));
  return pools;
}

std::map<std::string, std::vector<EntityLabel>> TransferAll(
    const CorpusStore &corpus, const Qrels &qrels, const Run &candidates,
    const std::vector<std::string> &query_ids) {
  std::map<std::string, std::vector<EntityLabel>> labels;
  for (const auto &qid : query_ids) {
    auto it = candidates.find(qid);
    if (it == candidates.end()) continue;
    labels[qid] = TransferLabels(qrels, qid, CandidateDocuments(corpus, it->second));
  }
  return labels;
}

const EntityRanking &FoldEntityRankings::Lookup(std::size_t fold,
                                                const std::string &query_id) const {
  const auto &per_query = rankings.at(fold);
  auto it = per_query.find(query_id);
  if (it == per_query.end())
    throw std::out_of_range("no entity ranking for query " + query_id);
  return it->second;
}

std::map<std::string, EntityRanking> FoldEntityRankings::OutOfFold(
    const FoldPlan &plan) const {
  std::map<std::string, EntityRanking> out;
  for (std::size_t f = 0; f < plan.folds.size(); ++f)
    for (const auto &qid : plan.folds[f].test)
      if (rankings[f].count(qid)) out[qid] = rankings[f].at(qid);
  return out;
}

std::vector<std::string> TrainingPool(const CorpusStore &corpus, const Qrels &qrels,
                                      const Ranking &candidates) {
  std::vector<const Document *> docs = CandidateDocuments(corpus, candidates);
  const auto ids = candidates.Ids();
  const std::set<std::string> seen(ids.begin(), ids.end());
  for (const auto &[doc, grade] : qrels.ForQuery(candidates.query_id)) {
    if (grade < Qrels::kRelevantGrade || seen.count(doc)) continue;
    if (const Document *d = corpus.Find(doc)) docs.push_back(d);
  }
  return PoolEntities(docs);
}

FoldEntityRankings RankFoldEntities(const CorpusStore &corpus, const Qrels &qrels,
                                    const Run &candidates, const FoldPlan &folds,
                                    const FoldRanker &rank) {
  folds.CheckIntegrity();
  const auto pools = PoolAll(corpus, candidates);
  FoldEntityRankings out;
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    auto &per_query = out.rankings.emplace_back();
    const std::set<std::string> train(folds.folds[f].train.begin(),
                                      folds.folds[f].train.end());
    for (const auto &[qid, pool] : pools) {
      per_query[qid] = rank(f, qid, train.count(qid)
                                        ? TrainingPool(corpus, qrels, candidates.at(qid))
                                        : pool);
    }
  }
  return out;
}

std::vector<EntityHead> TrainFoldEntityHeads(const CorpusStore &corpus,
                                             const Qrels &qrels, const Run &candidates,
                                             const FoldPlan &folds,
                                             const EmbeddingStore &encodings,
                                             const TrainConfig &cfg) {
  folds.CheckIntegrity();
  std::vector<EntityHead> heads;
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    const auto labels = TransferAll(corpus, qrels, candidates, folds.folds[f].train);
    std::vector<LabeledEncoding> examples;
    for (const auto &ex : BuildEntityExamples(labels, cfg.seed + f)) {
      examples.push_back({encodings.At(EncodingKey(ex.query_id, ex.item_id)), ex.label});
    }
    if (examples.empty())
      throw std::invalid_argument("fold " + std::to_string(f) +
                                  " has no labeled entities to train on");
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + 7919 * (f + 1);
    heads.push_back(TrainEntityHead(examples, fold_cfg));
  }
  return heads;
}

FoldEntityRankings TrainFoldEntityRankers(const CorpusStore &corpus,
                                          const Qrels &qrels,
                                          const Run &candidates,
                                          const FoldPlan &folds,
                                          const EmbeddingStore &encodings,
                                          const TrainConfig &cfg, int top_k) {
  auto heads = TrainFoldEntityHeads(corpus, qrels, candidates, folds, encodings, cfg);
  FoldEntityRankings out = RankFoldEntities(
      corpus, qrels, candidates, folds,
      [&](std::size_t f, const std::string &qid, const std::vector<std::string> &pool) {
        return RankEntities(heads[f], qid, pool, encodings, top_k);
      });
  out.heads = std::move(heads);
  return out;
}

std::vector<AblationVariant> StandardAblations() {
  std::vector<AblationVariant> v;
  v.push_back({"dreq", {{WeightingMode::kProbability, false, false}, true}});
  v.push_back({"uniform", {{WeightingMode::kUniform, false, false}, true}});
  v.push_back({"rr", {{WeightingMode::kReciprocalRank, false, false}, true}});
  v.push_back({"no_entities", {{WeightingMode::kProbability, false, false}, false}});
  return v;
}

std::vector<AblationResult> RunAblations(
    const std::vector<AblationVariant> &variants,
    const std::vector<TrainingExample> &examples, const FoldPlan &folds,
    const Run &candidates, const RankingLookup &rankings,
    const ScoringContext &ctx, const Qrels &qrels,
    const std::vector<std::string> &query_ids, const TrainConfig &cfg,
    int threads) {
  const MetricsReport baseline = Evaluate(candidates, qrels, query_ids, "candidates");
  std::vector<AblationResult> results;
  for (const auto &variant : variants) {
    AblationResult r;
    r.name = variant.name;
    r.run = TrainDreq(variant.options, examples, folds, candidates, rankings, ctx,
                      cfg, threads).reranked;
    r.metrics = Evaluate(r.run, qrels, query_ids, variant.name);
    r.helped = QueriesHelped(baseline.per_query.at("ndcg_cut_20"),
                             r.metrics.per_query.at("ndcg_cut_20"));
    results.push_back(std::move(r));
  }
  return results;
}

std::string FormatAblationTable(const MetricsReport &baseline,
                                const std::vector<AblationResult> &results) {
  std::string out = "system\tmap\tndcg_cut_20\tP_20\trecall_1000\thelped\thurt\n";
  char buf[256];
  auto row = [&](const std::string &name, const MetricsReport &m, const HelpedCounts *h) {
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%s\t%s\n", name.c_str(),
                  m.mean.at("map"), m.mean.at("ndcg_cut_20"), m.mean.at("P_20"),
                  m.mean.at("recall_1000"),
                  h ? std::to_string(h->helped).c_str() : "-",
                  h ? std::to_string(h->hurt).c_str() : "-");
    out += buf;
  };
  row(baseline.system, baseline, nullptr);
  for (const auto &r : results) row(r.name, r.metrics, &r.helped);
  return out;
}

const AblationResult &ExperimentResult::Find(const std::string &name) const {
  for (const auto &a : ablations)
    if (a.name == name) return a;
  throw std::out_of_range("no ablation named " + name);
}

ExperimentResult RunPlantedExperiment(const PlantedCollection &collection,
                                      const ExperimentConfig &cfg,
                                      const std::vector<AblationVariant> &variants) {
  ExperimentResult out;
  const InvertedIndex index = InvertedIndex::Build(collection.corpus);
  out.candidates = RetrieveAll(index, collection.queries, cfg.retrieval, cfg.threads);

  std::vector<std::string> qids;
  for (const auto &q : collection.queries) qids.push_back(q.query_id);
  const FoldPlan folds = MakeFolds(qids, cfg.num_folds, cfg.dreq_train.seed);
  const auto entity_rankings =
      TrainFoldEntityRankers(collection.corpus, collection.qrels, out.candidates,
                             folds, collection.stores.entity_enc, cfg.entity_train);
  const RankingLookup lookup = [&](std::size_t fold, const std::string &qid)
      -> const EntityRanking & { return entity_rankings.Lookup(fold, qid); };

  const auto examples =
      BuildDocExamples(collection.qrels, out.candidates, cfg.dreq_train.seed);
  ScoringContext ctx{&collection.corpus, &collection.stores, collection.segmenter};
  out.baseline = Evaluate(out.candidates, collection.qrels, qids, "bm25_rm3");
  out.ablations = RunAblations(variants, examples, folds, out.candidates, lookup,
                               ctx, collection.qrels, qids, cfg.dreq_train,
                               cfg.threads);
  return out;
}

}  // namespace dreq

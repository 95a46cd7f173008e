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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "dreq/pipeline.h"

namespace {

dreq::PlantedConfig Small() {
  dreq::PlantedConfig cfg;
  cfg.num_docs = 120;
  cfg.num_queries = 8;
  cfg.relevant_per_query = 5;
  cfg.distractors_per_query = 4;
  cfg.background_entities = 150;
  cfg.vocabulary = 500;
  cfg.min_sentences = 3;
  cfg.max_sentences = 12;
  cfg.seed = 5;
  return cfg;
}

std::vector<std::string> QueryIds(const dreq::PlantedCollection &c) {
  std::vector<std::string> ids;
  for (const auto &q : c.queries) ids.push_back(q.query_id);
  return ids;
}

}  // namespace

TEST_CASE("planted collection shape") {
  const auto c = dreq::GeneratePlanted(Small());
  CHECK(c.corpus.size() == 120);
  CHECK(c.queries.size() == 8);
  for (const auto &q : c.queries) {
    CHECK(c.qrels.NumRelevant(q.query_id) == 5);
    CHECK(c.planted.at(q.query_id).size() == 3);
    CHECK(c.stores.query.Contains(q.query_id));
  }
  for (const auto &d : c.corpus.documents()) {
    for (const auto &e : d.DistinctEntities()) CHECK(c.stores.entity.Contains(e));
    for (const auto &p : dreq::SegmentPassages(d, c.segmenter)) CHECK(c.stores.passage.Contains(p.Key()));
  }
  CHECK(c.stores.dims() == Small().dims);
  // Same seed, same collection.
  const auto again = dreq::GeneratePlanted(Small());
  CHECK(dreq::SerializeDocument(again.corpus.at(17)) == dreq::SerializeDocument(c.corpus.at(17)));
  CHECK(again.stores.entity_enc == c.stores.entity_enc);
  dreq::PlantedConfig bad = Small();
  bad.dims.m = 5;
  CHECK_THROWS(dreq::GeneratePlanted(bad));
}

TEST_CASE("planted collection files load back") {
  const auto c = dreq::GeneratePlanted(Small());
  const auto dir = std::filesystem::temp_directory_path() / "dreq_pipeline_test";
  std::filesystem::remove_all(dir);
  dreq::WritePlanted(c, dir.string());
  const auto corpus = dreq::LoadCorpus((dir / "corpus.jsonl").string());
  CHECK(corpus.size() == c.corpus.size());
  CHECK(dreq::SerializeDocument(corpus.at(3)) == dreq::SerializeDocument(c.corpus.at(3)));
  CHECK(dreq::LoadQueries((dir / "queries.tsv").string()).size() == 8);
  CHECK(dreq::SerializeQrels(dreq::LoadQrels((dir / "qrels.txt").string())) == dreq::SerializeQrels(c.qrels));
  CHECK(dreq::LoadStore((dir / "entity_enc.emb").string()) == c.stores.entity_enc);
  CHECK(dreq::LoadStore((dir / "passage.emb").string()) == c.stores.passage);
  std::filesystem::remove_all(dir);
}

TEST_CASE("batch retrieval does not depend on threads") {
  const auto c = dreq::GeneratePlanted(Small());
  const auto index = dreq::InvertedIndex::Build(c.corpus);
  dreq::RetrievalConfig cfg;
  cfg.depth = 25;
  const auto one = dreq::RetrieveAll(index, c.queries, cfg, 1);
  const auto four = dreq::RetrieveAll(index, c.queries, cfg, 4);
  CHECK(dreq::FormatRun(one, "t") == dreq::FormatRun(four, "t"));
  REQUIRE(one.size() == 8);
  for (const auto &q : c.queries) {
    const auto &r = one.at(q.query_id);
    CHECK(r.size() == 25);
    CHECK(dreq::FormatRanking(r, "t") == dreq::FormatRanking(dreq::Retrieve(index, q, cfg), "t"));
  }
}

TEST_CASE("pooling and label transfer over a run") {
  const auto c = dreq::GeneratePlanted(Small());
  const auto index = dreq::InvertedIndex::Build(c.corpus);
  dreq::RetrievalConfig cfg;
  cfg.depth = 20;
  const auto run = dreq::RetrieveAll(index, c.queries, cfg);
  const auto &first = run.begin()->second;
  const auto docs = dreq::CandidateDocuments(c.corpus, first);
  REQUIRE(docs.size() == 20);
  CHECK(docs[0]->doc_id == first.entries[0].id);

  const auto pools = dreq::PoolAll(c.corpus, run);
  const auto labels = dreq::TransferAll(c.corpus, c.qrels, run, QueryIds(c));
  for (const auto &[qid, ranking] : run) {
    std::set<std::string> expected;
    std::set<std::string> positive;
    for (const auto *d : dreq::CandidateDocuments(c.corpus, ranking)) {
      for (const auto &e : d->DistinctEntities()) {
        expected.insert(e);
        if (c.qrels.IsRelevant(qid, d->doc_id)) positive.insert(e);
      }
    }
    const auto &pool = pools.at(qid);
    CHECK(std::set<std::string>(pool.begin(), pool.end()) == expected);
    CHECK(pool.size() == expected.size());
    std::set<std::string> labelled_positive;
    for (const auto &l : labels.at(qid))
      if (l.label) labelled_positive.insert(l.entity_id);
    CHECK(labelled_positive == positive);
  }
}

TEST_CASE("per-fold entity rankers") {
  const auto c = dreq::GeneratePlanted(Small());
  const auto index = dreq::InvertedIndex::Build(c.corpus);
  dreq::RetrievalConfig rcfg;
  rcfg.depth = 30;
  const auto run = dreq::RetrieveAll(index, c.queries, rcfg);
  const auto folds = dreq::MakeFolds(QueryIds(c), 4, 3);
  dreq::TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  const auto ranked = dreq::TrainFoldEntityRankers(c.corpus, c.qrels, run, folds,
                                                   c.stores.entity_enc, cfg);
  REQUIRE(ranked.heads.size() == 4);
  CHECK_FALSE(ranked.heads[0] == ranked.heads[1]);
  const auto pools = dreq::PoolAll(c.corpus, run);
  for (std::size_t f = 0; f < 4; ++f) {
    for (const auto &qid : folds.folds[f].test) {
      const auto &r = ranked.Lookup(f, qid);
      // Test queries are ranked over exactly their candidate pool.
      CHECK(r.size() == pools.at(qid).size());
      double total = 0;
      for (const auto &e : r.entries) total += e.prob;
      CHECK(total == doctest::Approx(1.0));
    }
    for (const auto &qid : folds.folds[f].train) {
      // Training queries also cover entities of relevant documents outside
      // the candidates.
      CHECK(ranked.Lookup(f, qid).size() >= pools.at(qid).size());
    }
  }
  const auto oof = ranked.OutOfFold(folds);
  CHECK(oof.size() == 8);
  const auto &q = folds.folds[2].test.front();
  CHECK(oof.at(q).entries.front().entity_id == ranked.Lookup(2, q).entries.front().entity_id);
  CHECK_THROWS(ranked.Lookup(0, "nope"));

  // The learned head prefers planted entities: across queries, the mean
  // rank of a planted entity beats the pool median.
  int better = 0, total = 0;
  for (const auto &[qid, r] : oof) {
    for (const auto &e : c.planted.at(qid)) {
      if (const auto *hit = r.Find(e)) {
        ++total;
        better += hit->rank <= static_cast<int>(r.size()) / 2;
      }
    }
  }
  REQUIRE(total > 0);
  CHECK(better * 4 >= total * 3);
}

TEST_CASE("ablation sweep and table") {
  const auto names = [] {
    std::vector<std::string> n;
    for (const auto &v : dreq::StandardAblations()) n.push_back(v.name);
    return n;
  }();
  CHECK(names == std::vector<std::string>{"dreq", "uniform", "rr", "no_entities"});
  CHECK_FALSE(dreq::StandardAblations()[3].options.use_entities);
  CHECK(dreq::StandardAblations()[2].options.weighting.mode == dreq::WeightingMode::kReciprocalRank);

  dreq::ExperimentConfig cfg;
  cfg.retrieval.depth = 30;
  cfg.num_folds = 4;
  cfg.entity_train.learning_rate = 1e-2;
  cfg.dreq_train.learning_rate = 3e-2;
  cfg.dreq_train.epochs = 4;
  cfg.threads = 2;
  const auto c = dreq::GeneratePlanted(Small());
  const auto result = dreq::RunPlantedExperiment(c, cfg, dreq::StandardAblations());
  CHECK(result.baseline.system == "bm25_rm3");
  REQUIRE(result.ablations.size() == 4);
  for (const auto &a : result.ablations) {
    CHECK(a.run.size() == 8);
    CHECK(a.helped.helped + a.helped.hurt + a.helped.unchanged == 8);
    CHECK(a.metrics.mean.at("recall_1000") == doctest::Approx(result.baseline.mean.at("recall_1000")));
  }
  CHECK(&result.Find("rr") == &result.ablations[2]);
  CHECK_THROWS(result.Find("nothing"));

  const std::string table = dreq::FormatAblationTable(result.baseline, result.ablations);
  CHECK(table.rfind("system\tmap\tndcg_cut_20\tP_20\trecall_1000\thelped\thurt\nbm25_rm3\t", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 6);
  CHECK(table.find("\t-\t-\n") != std::string::npos);
}

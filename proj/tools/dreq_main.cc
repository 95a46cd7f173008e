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

// Command-line driver: one subcommand per pipeline stage, artifacts in a
// work directory, a manifest recording what each stage read and wrote.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dreq/config.h"
#include "dreq/io.h"
#include "dreq/pipeline.h"

namespace fs = std::filesystem;

namespace dreq {
namespace {

// An input that an earlier subcommand should have produced.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Workspace {
 public:
  Workspace(Config cfg, std::string stage)
      : cfg_(std::move(cfg)), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    work_ = cfg_.Get("work");
    fs::create_directories(work_);
  }

  const Config &cfg() const { return cfg_; }
  int threads() const { return cfg_.GetInt("threads"); }
  uint64_t seed() const { return cfg_.GetUint("seed"); }

  std::string Path(const std::string &name) const { return (work_ / name).string(); }

  fs::path StoresDir() const {
    const auto &s = cfg_.Get("stores");
    return s.empty() ? work_ / "stores" : fs::path(s);
  }

  // A work-directory artifact written by `producer`.
  std::string Require(const std::string &name, const std::string &producer) {
    return RequirePath(Path(name), producer);
  }

  std::string RequirePath(const std::string &path, const std::string &producer) {
    if (!fs::exists(path))
      throw MissingArtifact(path + " not found; run `dreq " + producer + "` first");
    inputs_.insert(path);
    return path;
  }

  // A user-supplied input named by a config key.
  std::string Input(const std::string &key) {
    const auto &path = cfg_.Get(key);
    if (path.empty())
      throw std::runtime_error("config key '" + key + "' is not set (use --config or --set " +
                               key + "=PATH)");
    if (!fs::exists(path)) throw std::runtime_error("cannot open " + key + " file " + path);
    inputs_.insert(path);
    return path;
  }

  bool HasInput(const std::string &key) const { return !cfg_.Get(key).empty(); }

  void Write(const std::string &name, const std::string &contents) {
    WritePath(Path(name), contents);
  }

  void WritePath(const std::string &path, const std::string &contents) {
    WriteFileAtomic(path, contents);
    outputs_.insert(path);
  }

  void Saved(const std::string &path) { outputs_.insert(path); }

  // Merges this stage's record into manifest.json.
  void Finish() {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json manifest = nlohmann::json::object();
    const auto path = Path("manifest.json");
    if (fs::exists(path)) {
      try {
        manifest = nlohmann::json::parse(ReadFile(path));
      } catch (const nlohmann::json::exception &) {
        manifest = nlohmann::json::object();
      }
    }
    manifest["config_digest"] = HexDigest(cfg_.Digest());
    manifest["seed"] = seed();
    manifest["config"] = cfg_.values();
    manifest["stages"][stage_] = {
        {"config_digest", HexDigest(cfg_.Digest())},
        {"inputs", std::vector<std::string>(inputs_.begin(), inputs_.end())},
        {"outputs", std::vector<std::string>(outputs_.begin(), outputs_.end())},
        {"seconds", seconds},
    };
    WriteFileAtomic(path, manifest.dump(2) + "\n");
  }

 private:
  Config cfg_;
  std::string stage_;
  fs::path work_;
  std::chrono::steady_clock::time_point start_;
  std::set<std::string> inputs_, outputs_;
};

// ---------------------------------------------------------------------------
// Loading helpers.

CorpusStore ReadCorpus(Workspace &ws) {
  CorpusStore corpus = LoadCorpus(ws.Input("corpus"));
  if (ws.HasInput("entities")) LoadEntityCatalog(ws.Input("entities"), corpus);
  return corpus;
}

Run ReadCandidates(Workspace &ws) { return LoadRun(ws.Require("candidates.run", "retrieve")); }

std::vector<std::string> RunQueryIds(const Run &run) {
  std::vector<std::string> ids;
  for (const auto &[qid, _] : run) ids.push_back(qid);
  return ids;
}

std::string StorePath(Workspace &ws, const char *name) {
  return ws.RequirePath((ws.StoresDir() / name).string(), "synth-embed");
}

StoreSet ReadStores(Workspace &ws) {
  StoreSet s;
  s.entity = LoadStore(StorePath(ws, "entity.emb"));
  s.passage = LoadStore(StorePath(ws, "passage.emb"));
  s.query = LoadStore(StorePath(ws, "query.emb"));
  s.entity_enc = LoadStore(StorePath(ws, "entity_enc.emb"));
  return s;
}

// Folds follow from the candidate queries, num_folds and the seed, so they
// are recomputed and rewritten rather than cached.
FoldPlan WriteFolds(Workspace &ws, const Run &candidates) {
  const FoldPlan plan = MakeFolds(RunQueryIds(candidates), ws.cfg().GetInt("num_folds"), ws.seed());
  ws.Write("folds.json", FoldPlanToJson(plan));
  return plan;
}

std::string FoldFile(const std::string &stem, std::size_t fold, const std::string &ext) {
  return stem + ".f" + std::to_string(fold) + ext;
}

FoldEntityRankings ReadFoldRankings(Workspace &ws, std::size_t num_folds) {
  FoldEntityRankings r;
  for (std::size_t f = 0; f < num_folds; ++f)
    r.rankings.push_back(LoadEntityRankings(ws.Require(FoldFile("entity_rankings", f, ".tsv"), "rank-entities")));
  return r;
}

std::map<std::string, Query> QueryMap(const std::vector<Query> &queries) {
  std::map<std::string, Query> out;
  for (const auto &q : queries) out[q.query_id] = q;
  return out;
}

// ---------------------------------------------------------------------------
// Stages.

void BuildIndexCmd(Workspace &ws) {
  const CorpusStore corpus = ReadCorpus(ws);
  const auto index = InvertedIndex::Build(corpus, AnalyzerFromConfig(ws.cfg()));
  ws.Write("index.txt", index.Serialize());
  std::printf("indexed %zu documents, %zu terms\n", index.num_docs(), index.num_terms());
}

void RetrieveCmd(Workspace &ws) {
  const auto index = InvertedIndex::Load(ws.Require("index.txt", "build-index"));
  const auto queries = LoadQueries(ws.Input("queries"));
  const RetrievalConfig rc = RetrievalFromConfig(ws.cfg());
  const Run run = RetrieveAll(index, queries, rc, ws.threads());
  ws.Write("candidates.run", FormatRun(run, ToString(rc.mode)));
  std::printf("retrieved %zu queries at depth %d\n", run.size(), rc.depth);
}

void PoolEntitiesCmd(Workspace &ws) {
  const CorpusStore corpus = ReadCorpus(ws);
  const Run candidates = ReadCandidates(ws);
  std::string pools;
  for (const auto &[qid, pool] : PoolAll(corpus, candidates)) {
    pools += qid;
    for (const auto &e : pool) pools += '\t' + e;
    pools += '\n';
  }
  ws.Write("pools.tsv", pools);
  if (ws.HasInput("qrels")) {
    const Qrels qrels = LoadQrels(ws.Input("qrels"));
    std::string labels;
    for (const auto &[qid, ls] : TransferAll(corpus, qrels, candidates, RunQueryIds(candidates)))
      for (const auto &l : ls) labels += qid + '\t' + l.entity_id + '\t' + std::to_string(l.label) + '\n';
    ws.Write("entity_labels.tsv", labels);
  }
  std::printf("pooled entities for %zu queries\n", candidates.size());
}

void SynthEmbedCmd(Workspace &ws) {
  const CorpusStore corpus = ReadCorpus(ws);
  const auto queries = LoadQueries(ws.Input("queries"));
  const Run candidates = ReadCandidates(ws);
  Qrels qrels;
  if (ws.HasInput("qrels")) qrels = LoadQrels(ws.Input("qrels"));
  const DimsConfig dims = DimsFromConfig(ws.cfg());
  const SegmenterConfig seg = SegmenterFromConfig(ws.cfg());
  const uint64_t seed = ws.seed();

  StoreSet s{EmbeddingStore("entity", dims.m), EmbeddingStore("passage", dims.n),
             EmbeddingStore("query", dims.p), EmbeddingStore("entity_enc", dims.k)};
  for (const auto &doc : corpus.documents()) {
    for (const auto &e : doc.DistinctEntities())
      if (!s.entity.Contains(e)) s.entity.Add(e, SyntheticEmbed("entity", e, dims.m, seed));
    for (const auto &p : SegmentPassages(doc, seg))
      s.passage.Add(p.Key(), SyntheticEmbed("passage", p.Key(), dims.n, seed));
  }
  for (const auto &q : queries) s.query.Add(q.query_id, SyntheticEmbed("query", q.query_id, dims.p, seed));
  for (const auto &[qid, ranking] : candidates) {
    for (const auto &e : TrainingPool(corpus, qrels, ranking)) {
      const auto key = EncodingKey(qid, e);
      s.entity_enc.Add(key, SyntheticEmbed("entity_enc", key, dims.k, seed));
    }
  }
  const fs::path dir = ws.StoresDir();
  fs::create_directories(dir);
  for (const auto &[name, store] : {std::pair<const char *, const EmbeddingStore *>{"entity.emb", &s.entity},
                                    {"passage.emb", &s.passage},
                                    {"query.emb", &s.query},
                                    {"entity_enc.emb", &s.entity_enc}}) {
    std::ostringstream out;
    WriteStore(*store, out);
    ws.WritePath((dir / name).string(), out.str());
  }
  std::printf("wrote %zu entity, %zu passage, %zu query and %zu encoding vectors to %s\n",
              s.entity.size(), s.passage.size(), s.query.size(), s.entity_enc.size(),
              dir.string().c_str());
}

void TrainEntityRankerCmd(Workspace &ws) {
  const CorpusStore corpus = ReadCorpus(ws);
  const Run candidates = ReadCandidates(ws);
  const Qrels qrels = LoadQrels(ws.Input("qrels"));
  const auto encodings = LoadStore(StorePath(ws, "entity_enc.emb"));
  const FoldPlan folds = WriteFolds(ws, candidates);
  const auto heads = TrainFoldEntityHeads(corpus, qrels, candidates, folds, encodings,
                                          EntityTrainFromConfig(ws.cfg()));
  for (std::size_t f = 0; f < heads.size(); ++f)
    ws.Write(FoldFile("entity_head", f, ".txt"), SerializeEntityHead(heads[f]));
  std::printf("trained %zu entity heads\n", heads.size());
}

void RankEntitiesCmd(Workspace &ws, const std::string &mode) {
  const CorpusStore corpus = ReadCorpus(ws);
  const Run candidates = ReadCandidates(ws);
  Qrels qrels;
  if (ws.HasInput("qrels")) qrels = LoadQrels(ws.Input("qrels"));
  const FoldPlan folds = WriteFolds(ws, candidates);
  const int top_k = ws.cfg().GetInt("entity_top_k");
  FoldRanker rank;

  std::vector<EntityHead> heads;
  EmbeddingStore encodings, entity_store;
  InvertedIndex descriptions;
  std::map<std::string, Query> queries;
  QueryLinks links;
  if (mode == "learned") {
    encodings = LoadStore(StorePath(ws, "entity_enc.emb"));
    for (std::size_t f = 0; f < folds.folds.size(); ++f)
      heads.push_back(LoadEntityHead(ws.Require(FoldFile("entity_head", f, ".txt"), "train-entity-ranker")));
    rank = [&](std::size_t f, const std::string &qid, const std::vector<std::string> &pool) {
      return RankEntities(heads[f], qid, pool, encodings, top_k);
    };
  } else if (mode == "bm25" || mode == "geeer") {
    if (!ws.HasInput("entities"))
      throw std::runtime_error("rank-entities --mode " + mode + " needs entity descriptions (config key 'entities')");
    descriptions = BuildDescriptionIndex(corpus, AnalyzerFromConfig(ws.cfg()));
    queries = QueryMap(LoadQueries(ws.Input("queries")));
    const Bm25Params bm25 = RetrievalFromConfig(ws.cfg()).bm25;
    if (mode == "bm25") {
      rank = [&, bm25](std::size_t, const std::string &qid, const std::vector<std::string> &pool) {
        auto r = Bm25EntityRank(queries.at(qid), pool, descriptions, bm25);
        if (top_k <= 0) return r;
        std::vector<std::pair<std::string, double>> raw;
        for (const auto &e : r.entries) raw.emplace_back(e.entity_id, e.raw_score);
        return MakeEntityRanking(qid, raw, top_k);
      };
    } else {
      links = LoadQueryLinks(ws.Input("query_links"));
      entity_store = LoadStore(StorePath(ws, "entity.emb"));
      const double lambda = ws.cfg().GetDouble("geeer_lambda");
      rank = [&, bm25, lambda](std::size_t, const std::string &qid, const std::vector<std::string> &pool) {
        std::map<std::string, double> text;
        for (const auto &e : Bm25EntityRank(queries.at(qid), pool, descriptions, bm25).entries)
          text[e.entity_id] = e.raw_score;
        auto it = links.find(qid);
        const std::vector<QueryEntity> none;
        return GeeerEntityRank(qid, it == links.end() ? none : it->second, pool, entity_store, text, lambda);
      };
    }
  } else {
    throw std::invalid_argument("unknown entity ranking mode '" + mode + "' (learned|bm25|geeer)");
  }
  const auto ranked = RankFoldEntities(corpus, qrels, candidates, folds, rank);
  for (std::size_t f = 0; f < ranked.rankings.size(); ++f)
    ws.Write(FoldFile("entity_rankings", f, ".tsv"), FormatEntityRankings(ranked.rankings[f]));
  ws.Write("entity_rankings.tsv", FormatEntityRankings(ranked.OutOfFold(folds)));
  std::printf("ranked entities (%s) for %zu queries\n", mode.c_str(), candidates.size());
}

struct DreqInputs {
  CorpusStore corpus;
  Run candidates;
  Qrels qrels;
  StoreSet stores;
  FoldPlan folds;
  FoldEntityRankings rankings;
};

DreqInputs ReadDreqInputs(Workspace &ws) {
  DreqInputs in;
  in.corpus = ReadCorpus(ws);
  in.candidates = ReadCandidates(ws);
  in.qrels = LoadQrels(ws.Input("qrels"));
  in.stores = ReadStores(ws);
  in.folds = FoldPlanFromJson(ReadFile(ws.Require("folds.json", "rank-entities")));
  in.rankings = ReadFoldRankings(ws, in.folds.folds.size());
  return in;
}

DreqOptions OptionsFromConfig(const Config &cfg) {
  return {WeightingFromConfig(cfg), cfg.GetBool("use_entities")};
}

void TrainDreqCmd(Workspace &ws, const std::string &tag) {
  const DreqInputs in = ReadDreqInputs(ws);
  const ScoringContext ctx{&in.corpus, &in.stores, SegmenterFromConfig(ws.cfg())};
  const RankingLookup lookup = [&](std::size_t f, const std::string &q) -> const EntityRanking & {
    return in.rankings.Lookup(f, q);
  };
  std::vector<std::string> skipped;
  const auto examples = BuildDocExamples(in.qrels, in.candidates, ws.seed(), &skipped);
  for (const auto &q : skipped)
    std::fprintf(stderr, "warning: query %s has no relevant candidate; not used for training\n", q.c_str());
  const auto cv = TrainDreq(OptionsFromConfig(ws.cfg()), examples, in.folds, in.candidates,
                            lookup, ctx, DreqTrainFromConfig(ws.cfg()), ws.threads());
  for (std::size_t f = 0; f < cv.models.size(); ++f)
    ws.Write(FoldFile(tag, f, ".ckpt"), SerializeModel(cv.models[f]));
  ws.Write(tag + ".train_log.tsv", FormatTrainLog(cv.log));
  std::printf("trained %zu fold models on %zu examples\n", cv.models.size(), examples.size());
}

void RerankCmd(Workspace &ws, const std::string &mode, const std::string &tag) {
  Run out;
  std::string name;
  if (mode == "dreq") {
    const DreqInputs in = ReadDreqInputs(ws);
    const ScoringContext ctx{&in.corpus, &in.stores, SegmenterFromConfig(ws.cfg())};
    for (std::size_t f = 0; f < in.folds.folds.size(); ++f) {
      const DreqModel model = LoadModel(ws.Require(FoldFile(tag, f, ".ckpt"), "train-dreq"));
      for (const auto &qid : in.folds.folds[f].test) {
        auto it = in.candidates.find(qid);
        if (it == in.candidates.end() || it->second.empty()) continue;
        out[qid] = Rerank(model, it->second, in.rankings.Lookup(f, qid), ctx);
      }
    }
    name = tag;
  } else if (mode == "maxsimcos") {
    const CorpusStore corpus = ReadCorpus(ws);
    const Run candidates = ReadCandidates(ws);
    const QueryLinks links = LoadQueryLinks(ws.Input("query_links"));
    const auto entities = LoadStore(StorePath(ws, "entity.emb"));
    for (const auto &[qid, ranking] : candidates) {
      auto it = links.find(qid);
      if (it == links.end()) {
        std::fprintf(stderr, "warning: query %s has no linked entities; keeping candidate order\n", qid.c_str());
        out[qid] = ranking;
        continue;
      }
      out[qid] = MaxSimCosRerank(it->second, ranking, corpus, entities);
    }
    name = "maxsimcos";
  } else {
    throw std::invalid_argument("unknown rerank mode '" + mode + "' (dreq|maxsimcos)");
  }
  ws.Write("rerank." + name + ".run", FormatRun(out, name));
  std::printf("re-ranked %zu queries into %s\n", out.size(), ws.Path("rerank." + name + ".run").c_str());
}

std::vector<std::string> QueryIdsFromFile(Workspace &ws) {
  std::vector<std::string> ids;
  for (const auto &q : LoadQueries(ws.Input("queries"))) ids.push_back(q.query_id);
  return ids;
}

std::string Stem(const std::string &path) { return fs::path(path).stem().string(); }

void EvaluateCmd(Workspace &ws, const std::string &run_path, const std::string &against) {
  const Qrels qrels = LoadQrels(ws.Input("qrels"));
  const auto qids = QueryIdsFromFile(ws);
  const Run run = LoadRun(ws.RequirePath(run_path, "rerank"));
  const MetricsReport report = Evaluate(run, qrels, qids, Stem(run_path));
  ws.Write(Stem(run_path) + ".metrics.tsv", FormatMetricsReport(report));
  for (const auto &m : report.metric_names) std::printf("%-12s %.4f\n", m.c_str(), report.mean.at(m));
  if (against.empty()) return;
  const Run base_run = LoadRun(ws.RequirePath(against, "retrieve"));
  const MetricsReport base = Evaluate(base_run, qrels, qids, Stem(against));
  std::string out = "metric\tsystem\tbaseline\tt\tp\tsignificant\n";
  char buf[256];
  for (const auto &m : report.metric_names) {
    const auto t = PairedTTest(report.Values(m, qids), base.Values(m, qids), ws.cfg().GetDouble("alpha"));
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%s\n", m.c_str(), report.mean.at(m),
                  base.mean.at(m), t.t, t.p, t.significant ? "yes" : "no");
    out += buf;
  }
  ws.Write(Stem(run_path) + ".vs." + Stem(against) + ".tsv", out);
  std::fputs(out.c_str(), stdout);
}

void QppCmd(Workspace &ws, const std::string &run_path) {
  const Run candidates = ReadCandidates(ws);
  const auto index = InvertedIndex::Load(ws.Require("index.txt", "build-index"));
  const auto queries = QueryMap(LoadQueries(ws.Input("queries")));
  const int k = ws.cfg().GetInt("wig_k");
  std::map<std::string, double> wig;
  for (const auto &[qid, ranking] : candidates) {
    const auto terms = index.Analyze(queries.at(qid).text);
    wig[qid] = Wig(ranking, static_cast<int>(std::max<std::size_t>(1, terms.size())),
                   std::min<int>(k, static_cast<int>(ranking.size())));
  }
  const auto levels = WigTerciles(wig);
  std::string out = "query_id\twig\tlevel\n";
  char buf[256];
  for (const auto &[qid, w] : wig) {
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%s\n", qid.c_str(), w, ToString(levels.at(qid)).c_str());
    out += buf;
  }
  ws.Write("qpp.tsv", out);
  if (run_path.empty()) {
    std::fputs(out.c_str(), stdout);
    return;
  }
  const Qrels qrels = LoadQrels(ws.Input("qrels"));
  const auto qids = RunQueryIds(candidates);
  const auto base = Evaluate(candidates, qrels, qids, "candidates").per_query.at("ndcg_cut_20");
  const auto sys = Evaluate(LoadRun(ws.RequirePath(run_path, "rerank")), qrels, qids, Stem(run_path))
                       .per_query.at("ndcg_cut_20");
  std::string table = "level\tqueries\tbaseline_ndcg_cut_20\tsystem_ndcg_cut_20\n";
  for (auto level : {Difficulty::kEasy, Difficulty::kMedium, Difficulty::kHard}) {
    int n = 0;
    double b = 0, s = 0;
    for (const auto &[qid, l] : levels) {
      if (l != level) continue;
      ++n;
      b += base.at(qid);
      s += sys.at(qid);
    }
    std::snprintf(buf, sizeof(buf), "%s\t%d\t%.6f\t%.6f\n", ToString(level).c_str(), n, n ? b / n : 0.0,
                  n ? s / n : 0.0);
    table += buf;
  }
  ws.Write("qpp_levels." + Stem(run_path) + ".tsv", table);
  std::fputs(table.c_str(), stdout);
}

void DifficultyCmd(Workspace &ws, const std::string &run_path) {
  const Qrels qrels = LoadQrels(ws.Input("qrels"));
  const Run candidates = ReadCandidates(ws);
  const auto qids = RunQueryIds(candidates);
  const auto base = Evaluate(candidates, qrels, qids, "candidates").per_query.at("ndcg_cut_20");
  const auto sys = Evaluate(LoadRun(ws.RequirePath(run_path, "rerank")), qrels, qids, Stem(run_path))
                       .per_query.at("ndcg_cut_20");
  const auto report = DifficultyBins(base, sys, ws.cfg().GetInt("bin_percent"));
  std::string out = FormatDifficultyReport(report);
  out += "# helped " + std::to_string(report.counts.helped) + " hurt " +
         std::to_string(report.counts.hurt) + " unchanged " + std::to_string(report.counts.unchanged) + "\n";
  ws.Write("difficulty." + Stem(run_path) + ".tsv", out);
  std::fputs(out.c_str(), stdout);
}

void AblateCmd(Workspace &ws) {
  const DreqInputs in = ReadDreqInputs(ws);
  const ScoringContext ctx{&in.corpus, &in.stores, SegmenterFromConfig(ws.cfg())};
  const RankingLookup lookup = [&](std::size_t f, const std::string &q) -> const EntityRanking & {
    return in.rankings.Lookup(f, q);
  };
  const auto qids = RunQueryIds(in.candidates);
  const auto examples = BuildDocExamples(in.qrels, in.candidates, ws.seed());
  auto variants = StandardAblations();
  for (auto &v : variants) v.options.weighting.allow_missing = ws.cfg().GetInt("entity_top_k") > 0;
  const auto results = RunAblations(variants, examples, in.folds, in.candidates, lookup, ctx, in.qrels,
                                    qids, DreqTrainFromConfig(ws.cfg()), ws.threads());
  const auto baseline = Evaluate(in.candidates, in.qrels, qids, "candidates");
  for (const auto &r : results) ws.Write("ablation." + r.name + ".run", FormatRun(r.run, r.name));
  const auto table = FormatAblationTable(baseline, results);
  ws.Write("ablation.tsv", table);
  std::fputs(table.c_str(), stdout);
}

void SynthCorpusCmd(Workspace &ws, const std::string &out_dir) {
  const auto collection = GeneratePlanted(PlantedFromConfig(ws.cfg()));
  WritePlanted(collection, out_dir);
  for (const char *name : {"corpus.jsonl", "entities.jsonl", "queries.tsv", "qrels.txt",
                           "query_entities.tsv", "entity.emb", "passage.emb", "query.emb",
                           "entity_enc.emb"})
    ws.Saved((fs::path(out_dir) / name).string());
  // A config that points at the generated files.
  const auto seg = SegmenterFromConfig(ws.cfg());
  ws.WritePath((fs::path(out_dir) / "dreq.conf").string(),
               "corpus = corpus.jsonl\nentities = entities.jsonl\nqueries = queries.tsv\n"
               "qrels = qrels.txt\nquery_links = query_entities.tsv\nstores = .\n"
               "passage_window = " + std::to_string(seg.window) +
                   "\npassage_stride = " + std::to_string(seg.stride) + "\n");
  std::printf("wrote %zu documents and %zu queries to %s\n", collection.corpus.size(),
              collection.queries.size(), out_dir.c_str());
}

void SynthExperimentCmd(Workspace &ws) {
  const auto collection = GeneratePlanted(PlantedFromConfig(ws.cfg()));
  ExperimentConfig ec;
  ec.retrieval = RetrievalFromConfig(ws.cfg());
  ec.num_folds = ws.cfg().GetInt("num_folds");
  ec.entity_train = EntityTrainFromConfig(ws.cfg());
  ec.dreq_train = DreqTrainFromConfig(ws.cfg());
  ec.threads = ws.threads();
  const auto result = RunPlantedExperiment(collection, ec, StandardAblations());
  const auto table = FormatAblationTable(result.baseline, result.ablations);
  ws.Write("synth_experiment.tsv", table);
  std::fputs(table.c_str(), stdout);
}

// ---------------------------------------------------------------------------

int Main(int argc, char **argv) {
  CLI::App app{"DREQ: entity-aware document re-ranking over a BM25+RM3 first stage"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  std::string config_path, work;
  std::vector<std::string> sets;
  int threads = -1;
  int64_t seed = -1;
  app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override one config key (key=value), repeatable");
  app.add_option("--seed", seed, "global seed (config key 'seed')");
  app.add_option("--threads", threads, "worker threads (config key 'threads')");
  app.add_option("--work", work, "work directory (config key 'work')");
  app.footer(
      "Config precedence: built-in defaults < --config file < DREQ_<KEY> environment "
      "variables < --set and dedicated flags.");

  std::string rank_mode, rerank_mode, run_path, against, tag = "dreq", out_dir, weighting;
  bool no_entities = false;
  auto *build_index = app.add_subcommand("build-index", "index the corpus");
  auto *retrieve = app.add_subcommand("retrieve", "BM25(+RM3) candidate run");
  auto *pool = app.add_subcommand("pool-entities", "pool candidate entities and transfer labels");
  auto *synth_embed = app.add_subcommand("synth-embed", "materialize hash-seeded synthetic stores");
  auto *train_er = app.add_subcommand("train-entity-ranker", "train one entity head per fold");
  auto *rank_entities = app.add_subcommand("rank-entities", "rank pooled entities per fold");
  rank_entities->add_option("--mode", rank_mode, "learned|bm25|geeer (config key 'rank_mode')");
  auto *train_dreq = app.add_subcommand("train-dreq", "cross-validated re-ranker training");
  auto *rerank = app.add_subcommand("rerank", "re-rank candidates");
  rerank->add_option("--mode", rerank_mode, "dreq|maxsimcos (config key 'rerank_mode')");
  for (auto *cmd : {train_dreq, rerank}) {
    cmd->add_option("--tag", tag, "checkpoint and run name")->capture_default_str();
    cmd->add_option("--weighting", weighting, "probability|uniform|rr");
    cmd->add_flag("--no-entities", no_entities, "drop the entity-centric embedding");
  }
  auto *evaluate = app.add_subcommand("evaluate", "MAP, nDCG@20, P@20, Recall@1000");
  evaluate->add_option("--run", run_path, "run file")->required();
  evaluate->add_option("--against", against, "baseline run for paired t-tests");
  auto *qpp = app.add_subcommand("qpp", "WIG per query and difficulty terciles");
  qpp->add_option("--run", run_path, "also compare this run per tercile");
  auto *difficulty = app.add_subcommand("difficulty", "per-bin comparison against the candidates");
  difficulty->add_option("--run", run_path, "run file")->required();
  auto *ablate = app.add_subcommand("ablate", "probability/uniform/rr/no-entity sweep");
  auto *synth_corpus = app.add_subcommand("synth-corpus", "write a planted synthetic collection");
  synth_corpus->add_option("--out", out_dir, "output directory")->required();
  auto *synth_exp = app.add_subcommand("synth-experiment", "ablation sweep on a planted collection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  CLI::App *cmd = app.get_subcommands().front();
  try {
    Config cfg;
    if (!config_path.empty()) cfg.MergeFile(config_path);
    cfg.MergeEnvironment();
    for (const auto &kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      cfg.Set(std::string(Trim(std::string_view(kv).substr(0, eq))),
              std::string(Trim(std::string_view(kv).substr(eq + 1))));
    }
    if (seed >= 0) cfg.Set("seed", std::to_string(seed));
    if (threads >= 0) cfg.Set("threads", std::to_string(threads));
    if (!work.empty()) cfg.Set("work", work);
    if (!weighting.empty()) cfg.Set("weighting", weighting);
    if (no_entities) cfg.Set("use_entities", "false");
    if (!rank_mode.empty()) cfg.Set("rank_mode", rank_mode);
    if (!rerank_mode.empty()) cfg.Set("rerank_mode", rerank_mode);
    if (cfg.GetInt("threads") < 1) throw std::invalid_argument("threads must be >= 1");

    Workspace ws(cfg, cmd->get_name());
    if (cmd == build_index) BuildIndexCmd(ws);
    else if (cmd == retrieve) RetrieveCmd(ws);
    else if (cmd == pool) PoolEntitiesCmd(ws);
    else if (cmd == synth_embed) SynthEmbedCmd(ws);
    else if (cmd == train_er) TrainEntityRankerCmd(ws);
    else if (cmd == rank_entities) RankEntitiesCmd(ws, cfg.Get("rank_mode"));
    else if (cmd == train_dreq) TrainDreqCmd(ws, tag);
    else if (cmd == rerank) RerankCmd(ws, cfg.Get("rerank_mode"), tag);
    else if (cmd == evaluate) EvaluateCmd(ws, run_path, against);
    else if (cmd == qpp) QppCmd(ws, run_path);
    else if (cmd == difficulty) DifficultyCmd(ws, run_path);
    else if (cmd == ablate) AblateCmd(ws);
    else if (cmd == synth_corpus) SynthCorpusCmd(ws, out_dir);
    else if (cmd == synth_exp) SynthExperimentCmd(ws);
    ws.Finish();
  } catch (const std::exception &e) {
    std::fprintf(stderr, "dreq %s: error: %s\n", cmd->get_name().c_str(), e.what());
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace dreq

int main(int argc, char **argv) { return dreq::Main(argc, argv); }

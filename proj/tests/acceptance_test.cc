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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dreq/pipeline.h"

using namespace dreq;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vector RandomVector(int d, SplitMix64 &rng) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.Normal();
  return v;
}

std::string Fmt(const char *format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, x);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients against central differences.

double RelErr(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Fourth-order central difference. Some gradients are ~1e-7, where the
// O(h^2) truncation of the two-point formula dominates a relative error.
template <typename Loss>
double MaxBlockError(double *params, const double *grads, Eigen::Index n, Loss loss) {
  const double h = 1e-3;
  double worst = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double saved = params[i];
    auto at = [&](double dx) {
      params[i] = saved + dx;
      return loss();
    };
    const double numeric = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
    params[i] = saved;
    worst = std::max(worst, RelErr(grads[i], numeric));
  }
  return worst;
}

Outcome GradientSuite() {
  const auto start = Clock::now();
  constexpr int kDim = 3, kEntities = 6, kPoints = 50;
  double worst = 0;
  for (int point = 0; point < kPoints; ++point) {
    SplitMix64 rng(1000 + point);
    DreqModel model = InitDreqModel({kDim, kDim, kDim, kDim}, {}, true, rng);
    model.fusion_bias = RandomVector(kDim, rng);
    model.score_bias = rng.Normal();
    EntityHead head;
    head.weights = RandomVector(kDim, rng).transpose();
    head.bias = rng.Normal();
    Matrix table(kDim, kEntities);
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.Normal();

    std::vector<HeadSample> samples(5);
    for (auto &s : samples) {
      s.query = RandomVector(kDim, rng);
      s.text = RandomVector(kDim, rng);
      const int count = 1 + static_cast<int>(rng.Below(3));
      for (int j = 0; j < count; ++j) {
        s.entity_rows.push_back(static_cast<std::size_t>(rng.Below(kEntities)));
        s.encodings.push_back(RandomVector(kDim, rng));
      }
      s.label = static_cast<double>(rng.Below(2));
    }

    // Entity head parameters, through the per-document softmax.
    EntityHead head_grad;
    DreqLossThroughHead(model, head, table, samples, &head_grad);
    auto head_loss = [&] { return DreqLossThroughHead(model, head, table, samples); };
    worst = std::max(worst, MaxBlockError(head.weights.data(), head_grad.weights.data(),
                                          head.weights.size(), head_loss));
    worst = std::max(worst, MaxBlockError(&head.bias, &head_grad.bias, 1, head_loss));

    // Everything downstream of the weights, with the entity table fine-tuned.
    std::vector<DocSample> flat;
    for (const auto &s : samples) {
      Vector raw(static_cast<Eigen::Index>(s.entity_rows.size()));
      for (std::size_t i = 0; i < s.entity_rows.size(); ++i)
        raw[static_cast<Eigen::Index>(i)] = ScoreEntity(head, s.encodings[i]);
      const Vector w = Softmax(raw);
      DocSample d{s.query, s.text, {}, s.label};
      for (std::size_t i = 0; i < s.entity_rows.size(); ++i)
        d.entities.emplace_back(s.entity_rows[i], w[static_cast<Eigen::Index>(i)]);
      flat.push_back(std::move(d));
    }
    DreqGradients g;
    DreqLoss(model, table, flat, &g, true);
    auto loss = [&] { return DreqLoss(model, table, flat); };
    worst = std::max(worst, MaxBlockError(model.fusion_weights.data(), g.fusion_weights.data(),
                                          model.fusion_weights.size(), loss));
    worst = std::max(worst, MaxBlockError(model.fusion_bias.data(), g.fusion_bias.data(),
                                          model.fusion_bias.size(), loss));
    worst = std::max(worst, MaxBlockError(model.score_weights.data(), g.score_weights.data(),
                                          model.score_weights.size(), loss));
    worst = std::max(worst, MaxBlockError(&model.score_bias, &g.score_bias, 1, loss));
    worst = std::max(worst, MaxBlockError(table.data(), g.entity_table.data(), table.size(), loss));
  }
  const double elapsed = Seconds(start);
  return {worst < 1e-4 && elapsed < 10,
          "max rel err " + Fmt("%.2e", worst) + " over " + std::to_string(kPoints) +
              " points (W1 b1 W2 b2 W3 b3 E), " + Fmt("%.2f", elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Normalization.

const char *kWords[] = {"kiwi", "plum", "fig", "lime", "pear", "mango", "yam", "nut", "oat", "rye"};

std::string RandomText(SplitMix64 &rng, int min_words, int max_words) {
  const int n = min_words + static_cast<int>(rng.Below(static_cast<uint64_t>(max_words - min_words + 1)));
  std::string text;
  for (int i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += kWords[rng.Below(std::size(kWords))];
  }
  return text;
}

Outcome NormalizationSuite() {
  constexpr int kInstances = 1000;
  double softmax_err = 0, rm3_err = 0, weight_err = 0;
  SplitMix64 rng(7);
  for (int trial = 0; trial < kInstances; ++trial) {
    Vector x(1 + static_cast<Eigen::Index>(rng.Below(60)));
    const double scale = std::pow(10.0, rng.Uniform(-2, 2.5));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = scale * rng.Normal();
    softmax_err = std::max(softmax_err, std::abs(Softmax(x).sum() - 1));

    std::vector<std::pair<std::string, std::string>> docs;
    const int num_docs = 2 + static_cast<int>(rng.Below(12));
    for (int d = 0; d < num_docs; ++d) docs.emplace_back("d" + std::to_string(d), RandomText(rng, 1, 12));
    const auto index = InvertedIndex::Build(docs);
    const auto expanded = Rm3Expand(index, Tokenize(RandomText(rng, 1, 3)));
    double total = 0;
    for (const auto &[term, w] : expanded) total += w;
    rm3_err = std::max(rm3_err, std::abs(total - 1));

    std::vector<std::pair<std::string, double>> raw;
    const int pool = 1 + static_cast<int>(rng.Below(30));
    for (int e = 0; e < pool; ++e) raw.emplace_back("e" + std::to_string(e), rng.Uniform(-30, 30));
    const auto ranking = MakeEntityRanking("q", raw);
    Document doc;
    doc.doc_id = "d";
    const int mentions = 1 + static_cast<int>(rng.Below(8));
    doc.text = std::string(static_cast<std::size_t>(mentions), 'x');
    for (int i = 0; i < mentions; ++i)
      doc.mentions.push_back({"e" + std::to_string(rng.Below(static_cast<uint64_t>(pool))), "x", i, i + 1, 1.0});
    const WeightingOptions opts{WeightingMode::kProbability, rng.Below(2) == 1, false};
    double wsum = 0;
    for (const auto &w : EntityWeights(doc, ranking, opts)) wsum += w.weight;
    weight_err = std::max(weight_err, std::abs(wsum - 1));
  }
  const double worst = std::max({softmax_err, rm3_err, weight_err});
  return {worst < 1e-9, "max |sum-1|: softmax " + Fmt("%.1e", softmax_err) + ", rm3 " +
                            Fmt("%.1e", rm3_err) + ", doc weights " + Fmt("%.1e", weight_err) +
                            " over 1000 instances each"};
}

// ---------------------------------------------------------------------------
// 3. Algebra of the entity-centric embedding.

Outcome EntityAlgebra() {
  SplitMix64 rng(3);
  bool homogeneous = true, uniform_sum = true, single = true;
  for (int trial = 0; trial < 200; ++trial) {
    EmbeddingStore store("entity", 5);
    for (int e = 0; e < 8; ++e) store.Add("e" + std::to_string(e), RandomVector(5, rng));
    std::vector<EntityWeight> w;
    for (int e = 0; e < 8; ++e)
      if (rng.Below(2)) w.push_back({"e" + std::to_string(e), rng.Normal()});
    const Vector base = EntityCentricEmbedding(w, store);
    // Power-of-two factors keep the comparison exact.
    for (double c : {0.0, 2.0, -0.5, 1024.0, 0.125}) {
      auto scaled = w;
      for (auto &x : scaled) x.weight *= c;
      homogeneous &= EntityCentricEmbedding(scaled, store) == Vector(c * base);
    }

    std::vector<std::pair<std::string, double>> raw;
    for (int e = 0; e < 8; ++e) raw.emplace_back("e" + std::to_string(e), rng.Normal());
    const auto ranking = MakeEntityRanking("q", raw);
    Document doc;
    doc.doc_id = "d";
    doc.text = "xxxxxx";
    for (int i = 0; i < 6; ++i)
      doc.mentions.push_back({"e" + std::to_string(rng.Below(8)), "x", i, i + 1, 1.0});
    const auto uniform = EntityWeights(doc, ranking, {WeightingMode::kUniform, false, false});
    Vector plain = Vector::Zero(5);
    for (const auto &id : doc.DistinctEntities()) plain += store.At(id);
    uniform_sum &= EntityCentricEmbedding(uniform, store) == plain;

    Document one;
    one.doc_id = "o";
    one.text = "xx";
    const std::string id = "e" + std::to_string(rng.Below(8));
    one.mentions = {{id, "x", 0, 1, 1.0}, {id, "x", 1, 2, 1.0}};
    for (bool count : {false, true}) {
      const auto w1 = EntityWeights(one, ranking, {WeightingMode::kProbability, count, false});
      single &= EntityCentricEmbedding(w1, store) == store.At(id);
    }
  }
  return {homogeneous && uniform_sum && single,
          std::string("homogeneity ") + (homogeneous ? "exact" : "broken") + ", uniform = plain sum " +
              (uniform_sum ? "exact" : "broken") + ", single entity verbatim " +
              (single ? "yes" : "no") + " (200 trials)"};
}

// ---------------------------------------------------------------------------
// 4. Invariances.

struct ScoringFixture {
  CorpusStore corpus;
  StoreSet stores;
  Ranking candidates;
  std::vector<std::pair<std::string, double>> raw;
};

ScoringFixture MakeScoringFixture(SplitMix64 &rng) {
  ScoringFixture f;
  const int dim = 4, entities = 7;
  f.stores.entity = EmbeddingStore("entity", dim);
  f.stores.passage = EmbeddingStore("passage", dim);
  f.stores.query = EmbeddingStore("query", dim);
  f.stores.entity_enc = EmbeddingStore("entity_enc", dim);
  f.stores.query.Add("q", RandomVector(dim, rng));
  for (int e = 0; e < entities; ++e) {
    f.stores.entity.Add("e" + std::to_string(e), RandomVector(dim, rng));
    f.raw.emplace_back("e" + std::to_string(e), 3 * rng.Normal());
  }
  std::vector<std::pair<std::string, double>> cand;
  for (int d = 0; d < 12; ++d) {
    Document doc;
    doc.doc_id = "d" + std::to_string(d);
    doc.sentences = {"s."};
    const int mentions = static_cast<int>(rng.Below(4));
    doc.text = std::string(static_cast<std::size_t>(mentions + 1), 'x');
    for (int i = 0; i < mentions; ++i)
      doc.mentions.push_back({"e" + std::to_string(rng.Below(entities)), "x", i, i + 1, 1.0});
    f.stores.passage.Add(doc.doc_id + "#0", RandomVector(dim, rng));
    cand.emplace_back(doc.doc_id, rng.Uniform());
    f.corpus.Add(std::move(doc));
  }
  f.candidates = MakeRanking("q", cand);
  return f;
}

Outcome Invariance() {
  SplitMix64 rng(4);
  double worst = 0;
  bool order_same = true, disabled_exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    ScoringFixture f = MakeScoringFixture(rng);
    DreqModel model = InitDreqModel(f.stores.dims(), {}, true, rng);
    model.fusion_bias = RandomVector(4, rng);
    const ScoringContext ctx{&f.corpus, &f.stores, {}};
    const auto ranking = MakeEntityRanking("q", f.raw);
    auto shifted_raw = f.raw;
    const double c = 50 * rng.Normal();
    for (auto &[id, s] : shifted_raw) s += c;
    const auto shifted = MakeEntityRanking("q", shifted_raw);
    const Vector &q = f.stores.query.At("q");
    for (const auto &cand : f.candidates.entries) {
      const Document &doc = f.corpus.Get(cand.id);
      const auto a = ScoreDocument(model, q, doc, ranking, ctx);
      const auto b = ScoreDocument(model, q, doc, shifted, ctx);
      for (std::size_t i = 0; i < a.weights.size(); ++i)
        worst = std::max(worst, std::abs(a.weights[i].weight - b.weights[i].weight));
      const Vector va = EntityCentricEmbedding(a.weights, f.stores.entity);
      const Vector vb = EntityCentricEmbedding(b.weights, f.stores.entity);
      if (va.size()) worst = std::max(worst, (va - vb).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(a.logit - b.logit));
    }
    order_same &= Rerank(model, f.candidates, ranking, ctx).Ids() ==
                  Rerank(model, f.candidates, shifted, ctx).Ids();

    model.use_entities = false;
    std::vector<double> before;
    for (const auto &cand : f.candidates.entries)
      before.push_back(ScoreDocument(model, q, f.corpus.Get(cand.id), ranking, ctx).logit);
    StoreSet perturbed = f.stores;
    for (std::size_t i = 0; i < perturbed.entity.size(); ++i)
      perturbed.entity.mutable_row(i) = 1e6 * RandomVector(4, rng);
    const ScoringContext ctx2{&f.corpus, &perturbed, {}};
    for (std::size_t i = 0; i < f.candidates.size(); ++i)
      disabled_exact &= ScoreDocument(model, q, f.corpus.Get(f.candidates.entries[i].id), shifted, ctx2).logit == before[i];
  }
  return {worst < 1e-9 && order_same && disabled_exact,
          "score shift: max deviation " + Fmt("%.1e", worst) + ", rerank order " +
              (order_same ? "unchanged" : "changed") + "; entities off: logits " +
              (disabled_exact ? "bit-identical" : "changed") + " under store perturbation"};
}

// ---------------------------------------------------------------------------
// 5. Metrics against naive re-derivations.

Outcome MetricOracles() {
  SplitMix64 rng(5);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Qrels qrels;
    const int docs = 1 + static_cast<int>(rng.Below(7));
    std::vector<int> judged;
    for (int d = 0; d < docs; ++d) {
      const int grade = static_cast<int>(rng.Below(4)) - 1;
      if (grade >= 0) qrels.Set("q", "d" + std::to_string(d), grade);
      judged.push_back(std::max(grade, 0));
    }
    std::vector<std::pair<std::string, double>> scored;
    for (int d = 0; d < docs + 3; ++d)
      if (rng.Below(3)) scored.emplace_back("d" + std::to_string(d), static_cast<double>(rng.Below(5)));
    const Ranking r = MakeRanking("q", scored);

    // Naive: walk the list once, count, divide.
    const int k = 20;
    std::vector<int> grades;
    int hits_k = 0, hits = 0;
    double ap = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const int g = std::max(qrels.Grade("q", r.entries[i].id), 0);
      grades.push_back(g);
      if (g > 0) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        if (static_cast<int>(i) < k) ++hits_k;
      }
    }
    const int total = static_cast<int>(std::count_if(judged.begin(), judged.end(), [](int g) { return g > 0; }));
    auto dcg = [&](const std::vector<int> &g) {
      double s = 0;
      for (int i = 0; i < static_cast<int>(g.size()) && i < k; ++i)
        if (g[i] > 0) s += (std::exp2(g[i]) - 1) / std::log2(i + 2.0);
      return s;
    };
    std::sort(judged.begin(), judged.end());
    double ideal = 0;
    do ideal = std::max(ideal, dcg(judged));
    while (std::next_permutation(judged.begin(), judged.end()));

    mismatches += PrecisionAtK(r, qrels, 20) != static_cast<double>(hits_k) / k;
    mismatches += RecallAtK(r, qrels, 20) != (total ? static_cast<double>(hits_k) / total : 0.0);
    mismatches += AveragePrecision(r, qrels) != (total ? ap / total : 0.0);
    mismatches += NdcgAtK(r, qrels, 20) != (ideal > 0 ? dcg(grades) / ideal : 0.0);
  }
  Qrels worked;
  worked.Set("q", "r1", 0);
  worked.Set("q", "r2", 2);
  worked.Set("q", "r3", 1);
  const double ndcg = NdcgAtK(MakeRanking("q", {{"r1", 3}, {"r2", 2}, {"r3", 1}}), worked, 20);
  const double hand = (3 / std::log2(3.0) + 0.5) / (3 + 1 / std::log2(3.0));
  return {mismatches == 0 && std::abs(ndcg - hand) < 1e-6,
          std::to_string(mismatches) + " mismatches in 400 exact comparisons; worked nDCG " +
              Fmt("%.7f", ndcg) + " vs hand " + Fmt("%.7f", hand) +
              " (DCG = 3/log2 3 + 1/2 = 2.392789; a DCG of 2.392481 and nDCG 0.658916 would be an arithmetic slip)"};
}

// ---------------------------------------------------------------------------
// 6. BM25 / RM3 against exhaustive scoring.

double NaiveTerm(const std::vector<std::vector<std::string>> &toks, std::size_t doc,
                 const std::string &term, double k1, double b) {
  double total = 0, df = 0;
  for (const auto &d : toks) {
    total += static_cast<double>(d.size());
    df += std::count(d.begin(), d.end(), term) > 0;
  }
  const double tf = static_cast<double>(std::count(toks[doc].begin(), toks[doc].end(), term));
  if (tf == 0) return 0;
  const double n = static_cast<double>(toks.size());
  const double avgdl = total / n, dl = static_cast<double>(toks[doc].size());
  return std::log(1 + (n - df + 0.5) / (df + 0.5)) * tf * (k1 + 1) /
         (tf + k1 * (1 - b + b * dl / avgdl));
}

Outcome RetrievalOracle() {
  SplitMix64 rng(6);
  int order_failures = 0, checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::pair<std::string, std::string>> docs;
    const int num_docs = 1 + static_cast<int>(rng.Below(10));
    for (int d = 0; d < num_docs; ++d) docs.emplace_back("d" + std::to_string(d), RandomText(rng, 1, 10));
    const auto index = InvertedIndex::Build(docs);
    std::vector<std::vector<std::string>> toks;
    for (const auto &[id, text] : docs) toks.push_back(Tokenize(text));
    const Query query{"q", RandomText(rng, 1, 3)};
    for (auto mode : {RetrievalMode::kBm25, RetrievalMode::kBm25Rm3}) {
      RetrievalConfig cfg;
      cfg.mode = mode;
      const auto terms = Tokenize(query.text);
      const WeightedQuery wq = mode == RetrievalMode::kBm25 ? CountTerms(terms) : Rm3Expand(index, terms);
      std::vector<std::pair<std::string, double>> brute;
      for (std::size_t d = 0; d < docs.size(); ++d) {
        double s = 0;
        for (const auto &[t, w] : wq) s += w * NaiveTerm(toks, d, t, 0.9, 0.4);
        brute.emplace_back(docs[d].first, s);
      }
      std::sort(brute.begin(), brute.end(), [](const auto &a, const auto &b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      const auto got = Retrieve(index, query, cfg);
      ++checked;
      bool ok = got.size() == brute.size();
      for (std::size_t i = 0; ok && i < brute.size(); ++i) {
        if (got.entries[i].id == brute[i].first) continue;
        // Accept a swap only between documents whose brute-force scores
        // agree to rounding.
        double other = 0;
        for (const auto &[id, s] : brute) if (id == got.entries[i].id) other = s;
        ok = std::abs(other - brute[i].second) < 1e-12;
      }
      order_failures += !ok;
    }
  }
  const auto hand_index = InvertedIndex::Build({{"d1", "a a b c"}, {"d2", "d e f g"}});
  const double hand = Bm25Score(hand_index, {"a"}, "d1");
  return {order_failures == 0 && std::abs(hand - 0.9082) < 1e-4,
          std::to_string(order_failures) + " order mismatches in " + std::to_string(checked) +
              " BM25/BM25+RM3 retrievals on <=10-doc corpora; hand BM25 " + Fmt("%.6f", hand)};
}

// ---------------------------------------------------------------------------
// 7. Planted relevance.

Outcome PlantedEndToEnd() {
  const auto start = Clock::now();
  constexpr int kSeeds = 5;
  double baseline = 0, full = 0, uniform = 0, rr = 0, none = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    PlantedConfig pc;
    pc.seed = static_cast<uint64_t>(seed);
    const auto collection = GeneratePlanted(pc);
    ExperimentConfig ec;
    ec.retrieval.depth = 100;
    ec.entity_train.learning_rate = 1e-2;
    ec.entity_train.seed = static_cast<uint64_t>(seed);
    ec.dreq_train.learning_rate = 3e-2;
    ec.dreq_train.seed = static_cast<uint64_t>(seed);
    ec.threads = static_cast<int>(std::max(1u, std::min(5u, std::thread::hardware_concurrency())));
    const auto result = RunPlantedExperiment(collection, ec, StandardAblations());
    auto ndcg = [](const MetricsReport &m) { return m.mean.at("ndcg_cut_20"); };
    baseline += ndcg(result.baseline);
    full += ndcg(result.Find("dreq").metrics);
    uniform += ndcg(result.Find("uniform").metrics);
    rr += ndcg(result.Find("rr").metrics);
    none += ndcg(result.Find("no_entities").metrics);
  }
  baseline /= kSeeds, full /= kSeeds, uniform /= kSeeds, rr /= kSeeds, none /= kSeeds;
  const double elapsed = Seconds(start);
  const bool pass = full - uniform >= 0.03 && full - none >= 0.03 && full - baseline >= 0.05 &&
                    elapsed < 300;
  return {pass, "mean held-out nDCG@20 over 5 seeds: dreq " + Fmt("%.4f", full) + ", uniform " +
                    Fmt("%.4f", uniform) + ", rr " + Fmt("%.4f", rr) + ", no_entities " +
                    Fmt("%.4f", none) + ", bm25_rm3 " + Fmt("%.4f", baseline) + "; " +
                    Fmt("%.1f", elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 8. Determinism.

std::string Artifacts(int threads) {
  PlantedConfig pc;
  pc.num_docs = 200;
  pc.num_queries = 12;
  pc.seed = 99;
  const auto c = GeneratePlanted(pc);
  ExperimentConfig ec;
  ec.retrieval.depth = 50;
  ec.num_folds = 3;
  ec.entity_train.learning_rate = 1e-2;
  ec.dreq_train.learning_rate = 3e-2;
  ec.dreq_train.epochs = 5;
  ec.threads = threads;
  const auto result = RunPlantedExperiment(c, ec, StandardAblations());
  std::string out = FormatRun(result.candidates, "bm25_rm3");
  for (const auto &a : result.ablations) out += FormatRun(a.run, a.name);
  out += FormatAblationTable(result.baseline, result.ablations);
  out += FormatMetricsReport(result.ablations[0].metrics);

  std::vector<std::string> qids;
  for (const auto &q : c.queries) qids.push_back(q.query_id);
  const auto folds = MakeFolds(qids, 3, 42);
  const auto heads = TrainFoldEntityRankers(c.corpus, c.qrels, result.candidates, folds,
                                            c.stores.entity_enc, ec.entity_train);
  TrainConfig tc = ec.dreq_train;
  tc.finetune_entity_embeddings = true;
  const RankingLookup lookup = [&](std::size_t f, const std::string &q) -> const EntityRanking & {
    return heads.Lookup(f, q);
  };
  const ScoringContext ctx{&c.corpus, &c.stores, c.segmenter};
  const auto cv = TrainDreq({}, BuildDocExamples(c.qrels, result.candidates, 42), folds,
                            result.candidates, lookup, ctx, tc, threads);
  for (const auto &m : cv.models) out += SerializeModel(m);
  for (const auto &h : heads.heads) out += SerializeEntityHead(h);
  out += FormatEntityRankings(heads.OutOfFold(folds));
  out += FoldPlanToJson(folds) + FormatTrainLog(cv.log);
  return out;
}

Outcome Determinism() {
  const std::string a = Artifacts(1);
  const std::string b = Artifacts(1);
  const std::string c = Artifacts(3);
  return {a == b && a == c,
          std::string("runs, checkpoints, rankings and reports (") + std::to_string(a.size()) +
              " bytes) " + (a == b ? "identical" : "differ") + " across two executions; " +
              (a == c ? "identical" : "differ") + " with 3 threads"};
}

// ---------------------------------------------------------------------------
// 9. Paired t-test.

double SimpsonTwoSidedP(double t, double df) {
  const double c = std::tgamma((df + 1) / 2) / (std::sqrt(df * std::numbers::pi) * std::tgamma(df / 2));
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 200000;
  const double h = std::abs(t) / n;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

Outcome Statistics() {
  const std::vector<double> d = {0.1, 0.2, -0.05, 0.15, 0.1};
  const std::vector<double> zero(d.size(), 0.0);
  double mean = 0, ss = 0;
  for (double x : d) mean += x / 5;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double closed_t = mean / std::sqrt(ss / 4 / 5);
  const auto r = PairedTTest(d, zero);
  const double oracle_p = SimpsonTwoSidedP(closed_t, 4);
  const auto flat = PairedTTest({0.4, 0.7, 0.2}, {0.3, 0.6, 0.1});
  const bool degenerate = std::isnan(flat.t) && flat.p == 1.0 && !flat.significant;
  return {std::abs(r.t - closed_t) < 1e-6 && std::abs(r.p - oracle_p) < 1e-6 && degenerate,
          "t " + Fmt("%.9f", r.t) + " (closed form " + Fmt("%.9f", closed_t) + "), p " +
              Fmt("%.9f", r.p) + " (Simpson " + Fmt("%.9f", oracle_p) +
              "); zero-variance differences give t=NaN, p=1, not significant"};
}

// ---------------------------------------------------------------------------
// 10. Fold integrity.

Outcome FoldIntegrity() {
  int plans = 0, violations = 0;
  for (int n = 2; n <= 60; ++n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("q" + std::to_string(i));
    for (int k = 2; k <= std::min(n, 10); ++k) {
      for (uint64_t seed : {1ULL, 42ULL, 12345ULL}) {
        const FoldPlan plan = MakeFolds(ids, k, seed);
        ++plans;
        for (const auto &q : ids) {
          int test_count = 0;
          for (const auto &f : plan.folds) {
            const bool in_test = std::count(f.test.begin(), f.test.end(), q) == 1;
            const auto in_train = std::count(f.train.begin(), f.train.end(), q);
            test_count += in_test;
            if (in_test && in_train) ++violations;
            if (!in_test && in_train != 1) ++violations;
          }
          if (test_count != 1) ++violations;
        }
      }
    }
  }
  return {violations == 0 && plans > 0,
          std::to_string(violations) + " violations over " + std::to_string(plans) +
              " plans (2..60 queries, 2..10 folds, 3 seeds, every query checked)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char *name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient suite", GradientSuite},
      {"normalization", NormalizationSuite},
      {"entity embedding algebra", EntityAlgebra},
      {"invariance", Invariance},
      {"metric oracles", MetricOracles},
      {"bm25/rm3 oracle", RetrievalOracle},
      {"planted relevance end-to-end", PlantedEndToEnd},
      {"determinism", Determinism},
      {"statistics", Statistics},
      {"fold integrity", FoldIntegrity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

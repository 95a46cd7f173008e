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

#include "dreq/entity_ranking.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dreq/io.h"

namespace dreq {

EntityHead InitEntityHead(int k, SplitMix64 &rng) {
  if (k < 1) throw std::invalid_argument("entity head dim must be >= 1");
  EntityHead head;
  head.weights = GlorotUniform(1, k, rng);
  head.bias = 0.0;
  return head;
}

double ScoreEntity(const EntityHead &head, const Vector &encoding) {
  if (head.weights.size() != encoding.size()) {
    throw ShapeError("entity head expects dim " +
                     std::to_string(head.weights.size()) + ", encoding has " +
                     std::to_string(encoding.size()));
  }
  return head.weights.dot(encoding) + head.bias;
}

const RankedEntity *EntityRanking::Find(const std::string &entity_id) const {
  auto it = index_.find(entity_id);
  return it == index_.end() ? nullptr : &entries[it->second];
}

EntityRanking MakeEntityRanking(
    std::string query_id, std::vector<std::pair<std::string, double>> raw,
    int top_k) {
  std::stable_sort(raw.begin(), raw.end(), [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (top_k > 0 && raw.size() > static_cast<std::size_t>(top_k))
    raw.resize(static_cast<std::size_t>(top_k));
  EntityRanking ranking;
  ranking.query_id = std::move(query_id);
  if (raw.empty()) return ranking;
  Vector scores(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i)
    scores[static_cast<Eigen::Index>(i)] = raw[i].second;
  const Vector probs = Softmax(scores);
  ranking.entries.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!ranking.index_.emplace(raw[i].first, i).second)
      throw std::invalid_argument("entity '" + raw[i].first +
                                  "' scored twice for query " +
                                  ranking.query_id);
    ranking.entries.push_back({std::move(raw[i].first), raw[i].second,
                               probs[static_cast<Eigen::Index>(i)],
                               static_cast<int>(i) + 1});
  }
  return ranking;
}

EntityRanking RankEntities(const EntityHead &head, const std::string &query_id,
                           const std::vector<std::string> &pooled,
                           const EmbeddingStore &encodings, int top_k) {
  std::vector<std::pair<std::string, double>> raw;
  raw.reserve(pooled.size());
  for (const auto &entity : pooled) {
    const Vector *enc = encodings.Find(EncodingKey(query_id, entity));
    if (enc == nullptr) {
      throw std::out_of_range("no query-conditioned encoding for (query " +
                              query_id + ", entity " + entity + ")");
    }
    raw.emplace_back(entity, ScoreEntity(head, *enc));
  }
  return MakeEntityRanking(query_id, std::move(raw), top_k);
}

double EntityHeadLoss(const EntityHead &head,
                      const std::vector<LabeledEncoding> &examples,
                      EntityHead *gradient) {
  if (examples.empty()) throw std::invalid_argument("no entity examples");
  std::vector<double> logits, labels;
  logits.reserve(examples.size());
  labels.reserve(examples.size());
  if (gradient) {
    gradient->weights = RowVector::Zero(head.weights.size());
    gradient->bias = 0.0;
  }
  for (const auto &ex : examples) {
    const double z = ScoreEntity(head, ex.encoding);
    logits.push_back(z);
    labels.push_back(ex.label);
    if (gradient) {
      const double g = BceLogitGradient(z, ex.label, examples.size());
      gradient->weights += g * ex.encoding.transpose();
      gradient->bias += g;
    }
  }
  return BceLoss(logits, labels);
}

EntityHead TrainEntityHead(const std::vector<LabeledEncoding> &examples,
                           const TrainConfig &cfg) {
  cfg.Validate();
  if (examples.empty()) throw std::invalid_argument("no entity examples");
  const int k = static_cast<int>(examples.front().encoding.size());
  SplitMix64 rng(cfg.seed);
  EntityHead head = InitEntityHead(k, rng);
  AdamState w_state(k), b_state(1);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<LabeledEncoding> batch;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Shuffle(order, rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      EntityHead grad;
      EntityHeadLoss(head, batch, &grad);
      Vector w = head.weights.transpose();
      AdamStep(Eigen::Ref<Vector>(w), grad.weights.transpose(), w_state, cfg);
      head.weights = w.transpose();
      Vector b(1), gb(1);
      b[0] = head.bias;
      gb[0] = grad.bias;
      AdamStep(Eigen::Ref<Vector>(b), gb, b_state, cfg);
      head.bias = b[0];
    }
    const double loss = EntityHeadLoss(head, examples);
    if (best - loss < cfg.min_improvement) {
      if (++stale >= cfg.patience) break;
    } else {
      stale = 0;
    }
    best = std::min(best, loss);
  }
  return head;
}

InvertedIndex BuildDescriptionIndex(const CorpusStore &corpus,
                                    const AnalyzerConfig &analyzer) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto &[id, rec] : corpus.entities()) docs.emplace_back(id, rec.description);
  std::sort(docs.begin(), docs.end());
  return InvertedIndex::Build(docs, analyzer);
}

EntityRanking Bm25EntityRank(const Query &query,
                             const std::vector<std::string> &pooled,
                             const InvertedIndex &description_index,
                             const Bm25Params &params) {
  const auto terms = description_index.Analyze(query.text);
  std::vector<std::pair<std::string, double>> raw;
  raw.reserve(pooled.size());
  for (const auto &entity : pooled) {
    double score = 0.0;
    if (description_index.FindDoc(entity) >= 0)
      score = Bm25Score(description_index, terms, entity, params);
    raw.emplace_back(entity, score);
  }
  return MakeEntityRanking(query.query_id, std::move(raw));
}

double EmbeddingEntityScore(const std::vector<QueryEntity> &query_entities,
                            const Vector &candidate,
                            const EmbeddingStore &entity_store) {
  double score = 0.0;
  for (const auto &qe : query_entities) {
    const Vector *e = entity_store.Find(qe.entity_id);
    if (e == nullptr) continue;
    score += qe.confidence * Cosine(candidate, *e);
  }
  return score;
}

std::vector<double> MinMaxNormalize(const std::vector<double> &xs) {
  if (xs.empty()) return {};
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  std::vector<double> out(xs.size(), 0.5);
  if (*hi == *lo) return out;
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - *lo) / (*hi - *lo);
  return out;
}

EntityRanking GeeerEntityRank(const std::string &query_id,
                              const std::vector<QueryEntity> &query_entities,
                              const std::vector<std::string> &pooled,
                              const EmbeddingStore &entity_store,
                              const std::map<std::string, double> &bm25_scores,
                              double lambda) {
  const bool any_linked = std::any_of(
      query_entities.begin(), query_entities.end(),
      [&](const QueryEntity &qe) { return entity_store.Contains(qe.entity_id); });
  if (!any_linked) {
    throw std::invalid_argument("query " + query_id +
                                " has no linked entity with an embedding; "
                                "embedding-based entity ranking inapplicable");
  }
  std::vector<double> sparse, dense;
  sparse.reserve(pooled.size());
  dense.reserve(pooled.size());
  for (const auto &entity : pooled) {
    auto it = bm25_scores.find(entity);
    sparse.push_back(it == bm25_scores.end() ? 0.0 : it->second);
    const Vector *e = entity_store.Find(entity);
    dense.push_back(e ? EmbeddingEntityScore(query_entities, *e, entity_store)
                      : 0.0);
  }
  sparse = MinMaxNormalize(sparse);
  dense = MinMaxNormalize(dense);
  std::vector<std::pair<std::string, double>> raw;
  for (std::size_t i = 0; i < pooled.size(); ++i)
    raw.emplace_back(pooled[i], lambda * sparse[i] + (1.0 - lambda) * dense[i]);
  return MakeEntityRanking(query_id, std::move(raw));
}

std::string FormatEntityRankings(const std::map<std::string, EntityRanking> &r) {
  std::string out;
  for (const auto &[qid, ranking] : r) {
    for (const auto &e : ranking.entries) {
      out += qid + '\t' + e.entity_id + '\t' + FormatReal(e.raw_score) + '\t' +
             FormatReal(e.prob) + '\t' + std::to_string(e.rank) + '\n';
    }
  }
  return out;
}

std::map<std::string, EntityRanking> ParseEntityRankings(
    std::istream &in, const std::string &source) {
  std::map<std::string, std::vector<std::pair<std::string, double>>> raw;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto f = Split(line, '\t');
    if (f.size() != 5)
      throw std::runtime_error(source + ":" + std::to_string(line_no) +
                               ": expected query_id, entity_id, raw, prob, rank");
    raw[std::string(f[0])].emplace_back(std::string(f[1]), ParseReal(f[2]));
  }
  std::map<std::string, EntityRanking> out;
  for (auto &[qid, scores] : raw) out[qid] = MakeEntityRanking(qid, std::move(scores));
  return out;
}

std::map<std::string, EntityRanking> LoadEntityRankings(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open entity rankings " + path);
  return ParseEntityRankings(in, path);
}

Ranking ToRanking(const EntityRanking &ranking) {
  Ranking r;
  r.query_id = ranking.query_id;
  for (const auto &e : ranking.entries) r.entries.push_back({e.entity_id, e.raw_score, e.rank});
  return r;
}

std::string SerializeEntityHead(const EntityHead &head) {
  std::string out = "#dreq-entity-head k=" + std::to_string(head.dim()) + "\n";
  for (Eigen::Index i = 0; i < head.weights.size(); ++i) {
    if (i) out += ' ';
    out += FormatReal(head.weights[i]);
  }
  out += '\n' + FormatReal(head.bias) + '\n';
  return out;
}

EntityHead ParseEntityHead(std::istream &in, const std::string &source) {
  std::string header, weights, bias;
  if (!std::getline(in, header) || header.rfind("#dreq-entity-head", 0) != 0)
    throw std::runtime_error(source + ": not an entity head checkpoint");
  auto pos = header.find("k=");
  if (pos == std::string::npos) throw std::runtime_error(source + ": missing k=");
  const int k = std::stoi(header.substr(pos + 2));
  if (!std::getline(in, weights) || !std::getline(in, bias))
    throw std::runtime_error(source + ": truncated entity head");
  auto tokens = SplitWhitespace(weights);
  if (static_cast<int>(tokens.size()) != k)
    throw std::runtime_error(source + ": expected " + std::to_string(k) + " weights");
  EntityHead head;
  head.weights.resize(k);
  for (int i = 0; i < k; ++i) head.weights[i] = ParseReal(tokens[i]);
  head.bias = ParseReal(Trim(bias));
  return head;
}

void SaveEntityHead(const EntityHead &head, const std::string &path) {
  WriteFileAtomic(path, SerializeEntityHead(head));
}

EntityHead LoadEntityHead(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open entity head " + path);
  return ParseEntityHead(in, path);
}

}  // namespace dreq

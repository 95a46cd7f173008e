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

#include "dreq/synthetic.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dreq/io.h"

namespace dreq {

namespace {

Vector RandomUnit(int dim, SplitMix64 &rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.Normal();
  return v.normalized();
}

std::string Numbered(const char *prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
  return buf;
}

enum class Role { kRelevant, kDistractor, kFiller };

struct DocPlan {
  Role role = Role::kFiller;
  int query = -1;
};

// Token inside a sentence; entity_id is set for entity mentions.
struct Token {
  std::string text;
  std::string entity_id;
};

}  // namespace

PlantedCollection GeneratePlanted(const PlantedConfig &cfg) {
  const DimsConfig &dims = cfg.dims;
  dims.Validate();
  cfg.segmenter.Validate();
  if (dims.m != dims.p || dims.n != dims.p)
    throw std::invalid_argument("planted generator needs m == n == p");
  const int topical = cfg.relevant_per_query + cfg.distractors_per_query;
  if (cfg.num_queries < 1 || cfg.num_queries * topical > cfg.num_docs)
    throw std::invalid_argument("planted config: not enough documents for the queries");
  if (cfg.planted_per_query < 1 || cfg.background_per_doc > cfg.background_entities)
    throw std::invalid_argument("planted config: bad entity counts");

  SplitMix64 rng(cfg.seed);
  PlantedCollection out;
  out.segmenter = cfg.segmenter;
  out.stores.entity = EmbeddingStore("entity", dims.m);
  out.stores.passage = EmbeddingStore("passage", dims.n);
  out.stores.query = EmbeddingStore("query", dims.p);
  out.stores.entity_enc = EmbeddingStore("entity_enc", dims.k);

  const int qwidth = cfg.num_queries >= 100 ? 3 : 2;
  std::vector<std::string> qids;
  std::vector<std::vector<std::string>> qterms(cfg.num_queries);
  std::vector<std::vector<std::string>> planted(cfg.num_queries);
  std::vector<Vector> topics;
  for (int q = 0; q < cfg.num_queries; ++q) {
    qids.push_back(Numbered("q", q + 1, qwidth));
    std::string text;
    for (int t = 0; t < cfg.terms_per_query; ++t) {
      qterms[q].push_back("qt" + std::to_string(q + 1) + "w" + std::to_string(t + 1));
      text += (t ? " " : "") + qterms[q].back();
    }
    out.queries.push_back({qids[q], text});
    topics.push_back(RandomUnit(dims.p, rng));
    out.stores.query.Add(qids[q], topics[q]);
    for (int e = 0; e < cfg.planted_per_query; ++e) {
      std::string id = "P" + std::to_string(q + 1) + "x" + std::to_string(e + 1);
      planted[q].push_back(id);
      Vector v = topics[q] + cfg.entity_noise * RandomUnit(dims.m, rng);
      out.stores.entity.Add(id, v.normalized());
    }
    out.planted[qids[q]] = planted[q];
  }
  std::vector<std::string> background;
  for (int b = 0; b < cfg.background_entities; ++b) {
    background.push_back(Numbered("B", b + 1, 5));
    out.stores.entity.Add(background.back(), RandomUnit(dims.m, rng));
  }

  auto word = [&] { return "w" + std::to_string(rng.Below(cfg.vocabulary) + 1); };

  // Entity catalog.
  for (int q = 0; q < cfg.num_queries; ++q) {
    for (const auto &id : planted[q]) {
      std::string desc = "entity";
      for (const auto &t : qterms[q])
        if (rng.Uniform() < 0.7) desc += " " + t;
      for (int i = 0; i < 6; ++i) desc += " " + word();
      out.corpus.AddEntity({id, desc});
    }
  }
  for (const auto &id : background) {
    std::string desc = "entity";
    for (int i = 0; i < 8; ++i) desc += " " + word();
    out.corpus.AddEntity({id, desc});
  }

  // Query entity links: the planted entities, with linker confidences.
  for (int q = 0; q < cfg.num_queries; ++q) {
    for (const auto &id : planted[q]) {
      const double conf = 0.5 + 0.5 * rng.Uniform();
      out.query_links[qids[q]].push_back({id, std::round(conf * 1000) / 1000});
    }
  }

  std::vector<DocPlan> plans;
  for (int q = 0; q < cfg.num_queries; ++q) {
    for (int i = 0; i < cfg.relevant_per_query; ++i) plans.push_back({Role::kRelevant, q});
    for (int i = 0; i < cfg.distractors_per_query; ++i) plans.push_back({Role::kDistractor, q});
  }
  while (static_cast<int>(plans.size()) < cfg.num_docs) plans.push_back({Role::kFiller, -1});
  Shuffle(plans, rng);

  const Vector no_topic = Vector::Zero(dims.n);
  for (int d = 0; d < cfg.num_docs; ++d) {
    const DocPlan &plan = plans[d];
    const std::string doc_id = Numbered("d", d + 1, 4);
    const int num_sentences =
        cfg.min_sentences +
        static_cast<int>(rng.Below(cfg.max_sentences - cfg.min_sentences + 1));
    std::vector<std::vector<Token>> sentences(num_sentences);
    for (auto &s : sentences)
      for (int w = 0; w < cfg.words_per_sentence; ++w) s.push_back({word(), ""});
    auto insert = [&](Token tok) {
      auto &s = sentences[rng.Below(sentences.size())];
      s.insert(s.begin() + static_cast<long>(rng.Below(s.size() + 1)), std::move(tok));
    };

    if (plan.role != Role::kFiller) {
      for (const auto &t : qterms[plan.query]) {
        if (rng.Uniform() >= cfg.term_rate) continue;
        const int reps = 1 + static_cast<int>(rng.Below(3));
        for (int r = 0; r < reps; ++r) insert({t, ""});
      }
    } else if (rng.Uniform() < cfg.stray_term_rate) {
      const auto &terms = qterms[rng.Below(cfg.num_queries)];
      insert({terms[rng.Below(terms.size())], ""});
    }

    std::vector<std::string> entities;
    if (plan.role == Role::kRelevant) {
      std::vector<std::string> pick = planted[plan.query];
      Shuffle(pick, rng);
      const int count = 1 + static_cast<int>(rng.Below(std::min(2, cfg.planted_per_query)));
      entities.assign(pick.begin(), pick.begin() + count);
    }
    std::set<std::size_t> chosen;
    while (static_cast<int>(chosen.size()) < cfg.background_per_doc)
      chosen.insert(rng.Below(background.size()));
    for (auto b : chosen) entities.push_back(background[b]);
    for (const auto &id : entities) {
      std::string surface = id;
      std::transform(surface.begin(), surface.end(), surface.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      insert({surface, id});
    }

    Document doc;
    doc.doc_id = doc_id;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      if (s) doc.text += ' ';
      for (std::size_t t = 0; t < sentences[s].size(); ++t) {
        if (t) doc.text += ' ';
        const Token &tok = sentences[s][t];
        if (!tok.entity_id.empty()) {
          const int start = static_cast<int>(doc.text.size());
          doc.mentions.push_back({tok.entity_id, tok.text, start,
                                  start + static_cast<int>(tok.text.size()),
                                  std::round((0.6 + 0.4 * rng.Uniform()) * 1000) / 1000});
        }
        doc.text += tok.text;
      }
      doc.text += '.';
    }
    doc.sentences = SplitSentences(doc.text);

    const Vector &topic = plan.role == Role::kFiller ? no_topic : topics[plan.query];
    for (const auto &p : SegmentPassages(doc, cfg.segmenter)) {
      Vector v = cfg.text_signal * topic + RandomUnit(dims.n, rng);
      out.stores.passage.Add(p.Key(), v.normalized());
    }
    if (plan.role == Role::kRelevant)
      out.qrels.Set(qids[plan.query], doc_id, 1 + static_cast<int>(rng.Below(2)));
    else if (plan.role == Role::kDistractor)
      out.qrels.Set(qids[plan.query], doc_id, 0);
    out.corpus.Add(std::move(doc));
  }

  // Query-conditioned encodings for every (query, entity) pair.
  const Vector relevance_dir = RandomUnit(dims.k, rng);
  for (int q = 0; q < cfg.num_queries; ++q) {
    const std::set<std::string> mine(planted[q].begin(), planted[q].end());
    for (const auto &id : out.stores.entity.ids()) {
      Vector v = RandomUnit(dims.k, rng);
      if (mine.count(id)) v += cfg.encoding_signal * relevance_dir;
      out.stores.entity_enc.Add(EncodingKey(qids[q], id), v.normalized());
    }
  }
  return out;
}

void WritePlanted(const PlantedCollection &c, const std::string &dir) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char *name) { return (std::filesystem::path(dir) / name).string(); };
  std::string corpus;
  for (const auto &doc : c.corpus.documents()) corpus += SerializeDocument(doc) + '\n';
  WriteFileAtomic(path("corpus.jsonl"), corpus);

  std::vector<std::string> ids;
  for (const auto &[id, _] : c.corpus.entities()) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  std::string catalog;
  for (const auto &id : ids) {
    catalog += "{\"entity_id\":\"" + id + "\",\"description\":\"" +
               c.corpus.FindEntity(id)->description + "\"}\n";
  }
  WriteFileAtomic(path("entities.jsonl"), catalog);

  std::string queries;
  for (const auto &q : c.queries) queries += q.query_id + '\t' + q.text + '\n';
  WriteFileAtomic(path("queries.tsv"), queries);
  WriteFileAtomic(path("qrels.txt"), SerializeQrels(c.qrels));

  std::string links;
  for (const auto &[qid, entities] : c.query_links)
    for (const auto &e : entities) links += qid + '\t' + e.entity_id + '\t' + FormatReal(e.confidence) + '\n';
  WriteFileAtomic(path("query_entities.tsv"), links);

  SaveStore(c.stores.entity, path("entity.emb"));
  SaveStore(c.stores.passage, path("passage.emb"));
  SaveStore(c.stores.query, path("query.emb"));
  SaveStore(c.stores.entity_enc, path("entity_enc.emb"));
}

}  // namespace dreq

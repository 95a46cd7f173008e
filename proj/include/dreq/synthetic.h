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

#ifndef DREQ_SYNTHETIC_H_
#define DREQ_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dreq/corpus.h"
#include "dreq/embeddings.h"

namespace dreq {

// Synthetic collection where relevance is planted through query-specific
// entities. Each query owns a few planted entities; its relevant documents
// mention at least one of them. Topical distractors share the query's terms
// and text topic but carry only background entities, so lexical matching
// and text embeddings cannot separate them from relevant documents.
struct PlantedConfig {
  int num_docs = 500;
  int num_queries = 30;
  int relevant_per_query = 8;
  int distractors_per_query = 8;
  int planted_per_query = 3;
  int background_entities = 1500;
  int background_per_doc = 4;
  int terms_per_query = 3;
  int vocabulary = 3000;
  int min_sentences = 6;
  int max_sentences = 16;
  int words_per_sentence = 10;
  // Probability that a topical document mentions each query term.
  double term_rate = 0.6;
  // Probability that a filler document mentions a random query's term.
  double stray_term_rate = 0.15;
  // Noise added to a planted entity's embedding around its query direction.
  double entity_noise = 0.3;
  // Strength of the topic direction in passage embeddings.
  double text_signal = 2.0;
  // Strength of the relevance direction in query-conditioned encodings.
  double encoding_signal = 3.0;
  DimsConfig dims{32, 8, 8, 8};
  SegmenterConfig segmenter;
  uint64_t seed = 1;
};

struct PlantedCollection {
  CorpusStore corpus;
  std::vector<Query> queries;
  Qrels qrels;
  QueryLinks query_links;
  StoreSet stores;
  SegmenterConfig segmenter;
  // Planted entity ids per query, for diagnostics.
  std::map<std::string, std::vector<std::string>> planted;
};

// Requires dims.m == dims.n == dims.p so the planted directions are shared.
PlantedCollection GeneratePlanted(const PlantedConfig &cfg);

// Writes corpus.jsonl, entities.jsonl, queries.tsv, qrels.txt,
// query_entities.tsv and the four stores (*.emb) into dir.
void WritePlanted(const PlantedCollection &collection, const std::string &dir);

}  // namespace dreq

#endif  // DREQ_SYNTHETIC_H_

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

#ifndef DREQ_CORPUS_H_
#define DREQ_CORPUS_H_

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dreq {

struct EntityMention {
  std::string entity_id;
  std::string surface;
  // Code-point offsets into Document::text, half-open.
  int start = 0;
  int end = 0;
  double confidence = 1.0;
};

struct EntityRecord {
  std::string entity_id;
  std::string description;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<std::string> sentences;
  std::vector<EntityMention> mentions;

  // Distinct entity ids in first-mention order.
  std::vector<std::string> DistinctEntities() const;
};

struct Query {
  std::string query_id;
  std::string text;
};

// An entity linked in a query, with the linker's confidence.
struct QueryEntity {
  std::string entity_id;
  double confidence = 1.0;
};

using SentenceSplitter =
    std::function<std::vector<std::string>(std::string_view)>;

// Splits after '.', '!' or '?' when followed by whitespace. Sentences are
// trimmed; empty text yields no sentences.
std::vector<std::string> SplitSentences(std::string_view text);

// Immutable after loading.
class CorpusStore {
 public:
  CorpusStore() = default;

  // Throws on duplicate doc_id or a mention span outside the text.
  void Add(Document doc);
  void AddEntity(EntityRecord record);

  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const std::vector<Document> &documents() const { return docs_; }
  const Document &at(std::size_t i) const { return docs_[i]; }
  const Document *Find(const std::string &doc_id) const;
  const Document &Get(const std::string &doc_id) const;

  const std::unordered_map<std::string, EntityRecord> &entities() const {
    return entities_;
  }
  const EntityRecord *FindEntity(const std::string &entity_id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, EntityRecord> entities_;
};

// Corpus JSONL: {"doc_id", "text", "entities": [{"entity_id", "mention",
// "start", "end", "confidence"}]} per line.
CorpusStore LoadCorpus(const std::string &path,
                       const SentenceSplitter &splitter = SplitSentences);
CorpusStore ParseCorpus(std::istream &in, const std::string &source,
                        const SentenceSplitter &splitter = SplitSentences);
std::string SerializeDocument(const Document &doc);

// Entity catalog JSONL: {"entity_id", "description"}. Fills descriptions on
// the store.
void LoadEntityCatalog(const std::string &path, CorpusStore &store);
std::vector<EntityRecord> ParseEntityCatalog(std::istream &in,
                                             const std::string &source);

// Queries TSV: query_id<TAB>text.
std::vector<Query> LoadQueries(const std::string &path);
std::vector<Query> ParseQueries(std::istream &in, const std::string &source);

// Query entity links TSV: query_id<TAB>entity_id<TAB>confidence.
using QueryLinks = std::map<std::string, std::vector<QueryEntity>>;
QueryLinks LoadQueryLinks(const std::string &path);
QueryLinks ParseQueryLinks(std::istream &in, const std::string &source);

// Graded judgments, (query_id, doc_id) -> grade >= 0.
class Qrels {
 public:
  void Set(const std::string &query_id, const std::string &doc_id, int grade);
  // Grade or -1 when unjudged.
  int Grade(const std::string &query_id, const std::string &doc_id) const;
  bool IsRelevant(const std::string &query_id, const std::string &doc_id) const {
    return Grade(query_id, doc_id) >= kRelevantGrade;
  }
  // Judgments for a query; empty map when none.
  const std::map<std::string, int> &ForQuery(const std::string &query_id) const;
  int NumRelevant(const std::string &query_id) const;
  std::vector<std::string> QueryIds() const;
  bool HasQuery(const std::string &query_id) const {
    return judgments_.count(query_id) > 0;
  }

  static constexpr int kRelevantGrade = 1;

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

// TREC qrels: qid 0 docid grade.
Qrels LoadQrels(const std::string &path);
Qrels ParseQrels(std::istream &in, const std::string &source);
std::string SerializeQrels(const Qrels &qrels);

struct SegmenterConfig {
  int window = 10;  // sentences per passage
  int stride = 5;

  void Validate() const;
};

struct Passage {
  std::string doc_id;
  int index = 0;
  int sentence_begin = 0;  // [begin, end)
  int sentence_end = 0;
  std::string text;

  // Key into the passage embedding store.
  std::string Key() const { return PassageKey(doc_id, index); }
  static std::string PassageKey(std::string_view doc_id, int index);
};

std::vector<Passage> SegmentPassages(const Document &doc,
                                     const SegmenterConfig &cfg);

// Union of linked entities over the candidates, first-seen order.
std::vector<std::string> PoolEntities(
    const std::vector<const Document *> &candidates);

struct EntityLabel {
  std::string entity_id;
  int label = 0;
};

// An entity is positive iff it occurs in some candidate judged relevant for
// the query. Output follows PoolEntities order.
std::vector<EntityLabel> TransferLabels(
    const Qrels &qrels, const std::string &query_id,
    const std::vector<const Document *> &candidates);

}  // namespace dreq

#endif  // DREQ_CORPUS_H_

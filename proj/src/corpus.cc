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

#include "dreq/corpus.h"

#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "dreq/io.h"
#include "json.hpp"

namespace dreq {

using json = nlohmann::json;

namespace {

std::size_t CodePointLength(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string Where(const std::string &source, int line) {
  return source + ":" + std::to_string(line);
}

std::ifstream OpenOrThrow(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace

std::vector<std::string> Document::DistinctEntities() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto &m : mentions) {
    if (seen.insert(m.entity_id).second) out.push_back(m.entity_id);
  }
  return out;
}

std::vector<std::string> SplitSentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    auto s = Trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  };
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (text[i + 1] == ' ' || text[i + 1] == '\t' || text[i + 1] == '\n' ||
         text[i + 1] == '\r')) {
      emit(i + 1);
    }
  }
  emit(text.size());
  return out;
}

void CorpusStore::Add(Document doc) {
  if (doc.doc_id.empty()) throw std::invalid_argument("empty doc_id");
  const std::size_t length = CodePointLength(doc.text);
  for (const auto &m : doc.mentions) {
    if (m.start < 0 || m.start >= m.end ||
        static_cast<std::size_t>(m.end) > length) {
      throw std::invalid_argument(
          "document '" + doc.doc_id + "': mention of '" + m.entity_id +
          "' spans [" + std::to_string(m.start) + "," + std::to_string(m.end) +
          ") outside text of length " + std::to_string(length));
    }
    if (!(m.confidence >= 0.0 && m.confidence <= 1.0)) {
      throw std::invalid_argument("document '" + doc.doc_id +
                                  "': mention confidence outside [0,1]");
    }
  }
  auto [it, inserted] = index_.emplace(doc.doc_id, docs_.size());
  if (!inserted)
    throw std::invalid_argument("duplicate doc_id '" + doc.doc_id + "'");
  for (const auto &m : doc.mentions) {
    entities_.try_emplace(m.entity_id, EntityRecord{m.entity_id, ""});
  }
  docs_.push_back(std::move(doc));
}

void CorpusStore::AddEntity(EntityRecord record) {
  entities_[record.entity_id] = std::move(record);
}

const Document *CorpusStore::Find(const std::string &doc_id) const {
  auto it = index_.find(doc_id);
  return it == index_.end() ? nullptr : &docs_[it->second];
}

const Document &CorpusStore::Get(const std::string &doc_id) const {
  if (const Document *d = Find(doc_id)) return *d;
  throw std::out_of_range("unknown doc_id '" + doc_id + "'");
}

const EntityRecord *CorpusStore::FindEntity(const std::string &entity_id) const {
  auto it = entities_.find(entity_id);
  return it == entities_.end() ? nullptr : &it->second;
}

CorpusStore ParseCorpus(std::istream &in, const std::string &source,
                        const SentenceSplitter &splitter) {
  CorpusStore store;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    Document doc;
    try {
      json j = json::parse(line);
      doc.doc_id = j.at("doc_id").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      if (j.contains("entities")) {
        for (const auto &e : j.at("entities")) {
          EntityMention m;
          m.entity_id = e.at("entity_id").get<std::string>();
          m.surface = e.value("mention", std::string());
          m.start = e.at("start").get<int>();
          m.end = e.at("end").get<int>();
          m.confidence = e.value("confidence", 1.0);
          doc.mentions.push_back(std::move(m));
        }
      }
    } catch (const json::exception &e) {
      throw std::runtime_error(Where(source, line_no) +
                               ": malformed corpus line: " + e.what());
    }
    doc.sentences = splitter(doc.text);
    try {
      store.Add(std::move(doc));
    } catch (const std::invalid_argument &e) {
      throw std::runtime_error(Where(source, line_no) + ": " + e.what());
    }
  }
  return store;
}

CorpusStore LoadCorpus(const std::string &path,
                       const SentenceSplitter &splitter) {
  auto in = OpenOrThrow(path);
  return ParseCorpus(in, path, splitter);
}

std::string SerializeDocument(const Document &doc) {
  json j;
  j["doc_id"] = doc.doc_id;
  j["text"] = doc.text;
  j["entities"] = json::array();
  for (const auto &m : doc.mentions) {
    j["entities"].push_back({{"entity_id", m.entity_id},
                             {"mention", m.surface},
                             {"start", m.start},
                             {"end", m.end},
                             {"confidence", m.confidence}});
  }
  return j.dump();
}

std::vector<EntityRecord> ParseEntityCatalog(std::istream &in,
                                             const std::string &source) {
  std::vector<EntityRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    EntityRecord rec;
    try {
      json j = json::parse(line);
      rec.entity_id = j.at("entity_id").get<std::string>();
      rec.description = j.value("description", std::string());
    } catch (const json::exception &e) {
      throw std::runtime_error(Where(source, line_no) +
                               ": malformed entity line: " + e.what());
    }
    if (!seen.insert(rec.entity_id).second)
      throw std::runtime_error(Where(source, line_no) +
                               ": duplicate entity_id '" + rec.entity_id + "'");
    out.push_back(std::move(rec));
  }
  return out;
}

void LoadEntityCatalog(const std::string &path, CorpusStore &store) {
  auto in = OpenOrThrow(path);
  for (auto &rec : ParseEntityCatalog(in, path)) store.AddEntity(std::move(rec));
}

std::vector<Query> ParseQueries(std::istream &in, const std::string &source) {
  std::vector<Query> out;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(Where(source, line_no) +
                               ": expected query_id<TAB>text");
    // Extra fields (title, description, ...) are joined with a space.
    Query q{std::string(Trim(line.substr(0, tab))), {}};
    for (auto field : Split(std::string_view(line).substr(tab + 1), '\t')) {
      auto t = Trim(field);
      if (t.empty()) continue;
      if (!q.text.empty()) q.text += ' ';
      q.text += t;
    }
    if (q.query_id.empty() || q.text.empty())
      throw std::runtime_error(Where(source, line_no) +
                               ": empty query id or text");
    if (!seen.insert(q.query_id).second)
      throw std::runtime_error(Where(source, line_no) + ": duplicate query '" +
                               q.query_id + "'");
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Query> LoadQueries(const std::string &path) {
  auto in = OpenOrThrow(path);
  return ParseQueries(in, path);
}

QueryLinks ParseQueryLinks(std::istream &in, const std::string &source) {
  QueryLinks out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto fields = Split(Trim(line), '\t');
    if (fields.size() < 2 || fields.size() > 3)
      throw std::runtime_error(Where(source, line_no) +
                               ": expected query_id<TAB>entity_id[<TAB>conf]");
    QueryEntity qe{std::string(fields[1]), 1.0};
    if (fields.size() == 3) qe.confidence = std::stod(std::string(fields[2]));
    out[std::string(fields[0])].push_back(std::move(qe));
  }
  return out;
}

QueryLinks LoadQueryLinks(const std::string &path) {
  auto in = OpenOrThrow(path);
  return ParseQueryLinks(in, path);
}

void Qrels::Set(const std::string &query_id, const std::string &doc_id,
                int grade) {
  if (grade < 0) throw std::invalid_argument("negative relevance grade");
  auto [it, inserted] = judgments_[query_id].emplace(doc_id, grade);
  if (!inserted && it->second != grade)
    throw std::invalid_argument("conflicting grades for (" + query_id + ", " +
                                doc_id + ")");
}

int Qrels::Grade(const std::string &query_id, const std::string &doc_id) const {
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return -1;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? -1 : d->second;
}

const std::map<std::string, int> &Qrels::ForQuery(
    const std::string &query_id) const {
  static const std::map<std::string, int> kEmpty;
  auto q = judgments_.find(query_id);
  return q == judgments_.end() ? kEmpty : q->second;
}

int Qrels::NumRelevant(const std::string &query_id) const {
  int n = 0;
  for (const auto &[doc, grade] : ForQuery(query_id)) n += grade >= kRelevantGrade;
  return n;
}

std::vector<std::string> Qrels::QueryIds() const {
  std::vector<std::string> out;
  for (const auto &[q, _] : judgments_) out.push_back(q);
  return out;
}

Qrels ParseQrels(std::istream &in, const std::string &source) {
  Qrels qrels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = SplitWhitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 4)
      throw std::runtime_error(Where(source, line_no) +
                               ": expected 'qid 0 docid grade'");
    int grade;
    try {
      grade = std::stoi(std::string(fields[3]));
      qrels.Set(std::string(fields[0]), std::string(fields[2]), grade);
    } catch (const std::exception &e) {
      throw std::runtime_error(Where(source, line_no) + ": " + e.what());
    }
  }
  return qrels;
}

Qrels LoadQrels(const std::string &path) {
  auto in = OpenOrThrow(path);
  return ParseQrels(in, path);
}

std::string SerializeQrels(const Qrels &qrels) {
  std::ostringstream out;
  for (const auto &q : qrels.QueryIds()) {
    for (const auto &[doc, grade] : qrels.ForQuery(q))
      out << q << " 0 " << doc << ' ' << grade << '\n';
  }
  return out.str();
}

void SegmenterConfig::Validate() const {
  if (window < 1) throw std::invalid_argument("segment window must be >= 1");
  if (stride < 1 || stride > window)
    throw std::invalid_argument("segment stride must be in [1, window]");
}

std::string Passage::PassageKey(std::string_view doc_id, int index) {
  std::string key(doc_id);
  key += '#';
  key += std::to_string(index);
  return key;
}

std::vector<Passage> SegmentPassages(const Document &doc,
                                     const SegmenterConfig &cfg) {
  cfg.Validate();
  std::vector<Passage> out;
  const int n = static_cast<int>(doc.sentences.size());
  for (int begin = 0; begin < n; begin += cfg.stride) {
    Passage p;
    p.doc_id = doc.doc_id;
    p.index = static_cast<int>(out.size());
    p.sentence_begin = begin;
    p.sentence_end = std::min(begin + cfg.window, n);
    for (int s = p.sentence_begin; s < p.sentence_end; ++s) {
      if (s > p.sentence_begin) p.text += ' ';
      p.text += doc.sentences[s];
    }
    const bool reaches_end = p.sentence_end == n;
    out.push_back(std::move(p));
    if (reaches_end) break;
  }
  return out;
}

std::vector<std::string> PoolEntities(
    const std::vector<const Document *> &candidates) {
  std::vector<std::string> pooled;
  std::unordered_set<std::string> seen;
  for (const Document *doc : candidates) {
    for (const auto &m : doc->mentions) {
      if (seen.insert(m.entity_id).second) pooled.push_back(m.entity_id);
    }
  }
  return pooled;
}

std::vector<EntityLabel> TransferLabels(
    const Qrels &qrels, const std::string &query_id,
    const std::vector<const Document *> &candidates) {
  std::unordered_set<std::string> positive;
  for (const Document *doc : candidates) {
    if (!qrels.IsRelevant(query_id, doc->doc_id)) continue;
    for (const auto &m : doc->mentions) positive.insert(m.entity_id);
  }
  std::vector<EntityLabel> out;
  for (auto &id : PoolEntities(candidates)) {
    const int label = positive.count(id) ? 1 : 0;
    out.push_back({std::move(id), label});
  }
  return out;
}

}  // namespace dreq

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

#include "dreq/config.h"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "dreq/embeddings.h"
#include "dreq/io.h"

namespace dreq {

namespace {

const std::map<std::string, std::string> &Defaults() {
  static const std::map<std::string, std::string> defaults = {
      // Inputs and outputs.
      {"corpus", ""},
      {"entities", ""},
      {"queries", ""},
      {"qrels", ""},
      {"query_links", ""},
      {"stores", ""},
      {"work", "dreq_work"},
      {"seed", "42"},
      {"threads", "1"},
      // First stage.
      {"retrieval_mode", "bm25_rm3"},
      {"depth", "1000"},
      {"k1", "0.9"},
      {"b", "0.4"},
      {"fb_docs", "10"},
      {"fb_terms", "10"},
      {"rm3_original_weight", "0.5"},
      {"stem", "false"},
      // Representations.
      {"passage_window", "10"},
      {"passage_stride", "5"},
      {"dim_k", "32"},
      {"dim_m", "32"},
      {"dim_n", "32"},
      {"dim_p", "32"},
      // Entity ranking.
      {"rank_mode", "learned"},
      {"entity_top_k", "-1"},
      {"entity_learning_rate", "1e-5"},
      {"entity_batch_size", "20"},
      {"entity_epochs", "20"},
      {"geeer_lambda", "0.5"},
      // Re-ranker.
      {"num_folds", "5"},
      {"weighting", "probability"},
      {"count_mentions", "false"},
      {"use_entities", "true"},
      {"finetune_entity_embeddings", "false"},
      {"learning_rate", "1e-5"},
      {"batch_size", "20"},
      {"epochs", "20"},
      {"patience", "3"},
      {"min_improvement", "1e-5"},
      {"rerank_mode", "dreq"},
      // Analysis.
      {"wig_k", "20"},
      {"bin_percent", "5"},
      {"alpha", "0.05"},
      // Planted synthetic collections.
      {"synth_docs", "500"},
      {"synth_queries", "30"},
      {"synth_relevant", "8"},
      {"synth_distractors", "8"},
      {"synth_background_entities", "1500"},
      {"synth_dim_k", "32"},
      {"synth_dim", "8"},
  };
  return defaults;
}

const std::set<std::string> &PathKeys() {
  static const std::set<std::string> keys = {"corpus", "entities", "queries", "qrels",
                                             "query_links", "stores", "work"};
  return keys;
}

std::string EnvName(const std::string &key) {
  std::string name = "DREQ_";
  for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

[[noreturn]] void BadValue(const std::string &key, const std::string &value, const char *what) {
  throw std::invalid_argument("config key '" + key + "' = '" + value + "' is not " + what);
}

}  // namespace

Config::Config() : values_(Defaults()) {}

void Config::Set(const std::string &key, const std::string &value) {
  if (!Defaults().count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  values_[key] = value;
}

void Config::MergeText(std::string_view text, const std::string &source,
                       const std::string &base_dir) {
  int line_no = 0;
  for (auto raw : Split(text, '\n')) {
    ++line_no;
    auto line = Trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key(Trim(line.substr(0, eq)));
    std::string value(Trim(line.substr(eq + 1)));
    if (!Defaults().count(key))
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (PathKeys().count(key) && !value.empty() && !base_dir.empty() &&
        std::filesystem::path(value).is_relative())
      value = (std::filesystem::path(base_dir) / value).lexically_normal().string();
    values_[key] = value;
  }
}

void Config::MergeFile(const std::string &path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  MergeText(ReadFile(path), path, dir);
}

void Config::MergeEnvironment() {
  for (const auto &[key, _] : Defaults())
    if (const char *v = std::getenv(EnvName(key).c_str())) values_[key] = v;
}

const std::string &Config::Get(const std::string &key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

int Config::GetInt(const std::string &key) const {
  const auto &v = Get(key);
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "an integer");
  return out;
}

uint64_t Config::GetUint(const std::string &key) const {
  const auto &v = Get(key);
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "an unsigned integer");
  return out;
}

double Config::GetDouble(const std::string &key) const {
  const auto &v = Get(key);
  try {
    return ParseReal(v);
  } catch (const std::invalid_argument &) {
    BadValue(key, v, "a number");
  }
}

bool Config::GetBool(const std::string &key) const {
  const auto &v = Get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  BadValue(key, v, "a boolean");
}

std::string Config::Canonical() const {
  std::string out;
  for (const auto &[k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

uint64_t Config::Digest() const { return Fnv1a64(Canonical()); }

std::string HexDigest(uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

RetrievalConfig RetrievalFromConfig(const Config &cfg) {
  RetrievalConfig r;
  r.mode = ParseRetrievalMode(cfg.Get("retrieval_mode"));
  r.depth = cfg.GetInt("depth");
  r.bm25.k1 = cfg.GetDouble("k1");
  r.bm25.b = cfg.GetDouble("b");
  r.rm3.fb_docs = cfg.GetInt("fb_docs");
  r.rm3.fb_terms = cfg.GetInt("fb_terms");
  r.rm3.original_weight = cfg.GetDouble("rm3_original_weight");
  r.bm25.Validate();
  r.rm3.Validate();
  if (r.depth < 1) throw std::invalid_argument("config key 'depth' must be >= 1");
  return r;
}

AnalyzerConfig AnalyzerFromConfig(const Config &cfg) { return {cfg.GetBool("stem")}; }

SegmenterConfig SegmenterFromConfig(const Config &cfg) {
  SegmenterConfig s{cfg.GetInt("passage_window"), cfg.GetInt("passage_stride")};
  s.Validate();
  return s;
}

WeightingOptions WeightingFromConfig(const Config &cfg) {
  return {ParseWeightingMode(cfg.Get("weighting")), cfg.GetBool("count_mentions"),
          cfg.GetInt("entity_top_k") > 0};
}

DimsConfig DimsFromConfig(const Config &cfg) {
  DimsConfig d{cfg.GetInt("dim_k"), cfg.GetInt("dim_m"), cfg.GetInt("dim_n"), cfg.GetInt("dim_p")};
  d.Validate();
  return d;
}

TrainConfig DreqTrainFromConfig(const Config &cfg) {
  TrainConfig t;
  t.learning_rate = cfg.GetDouble("learning_rate");
  t.batch_size = cfg.GetInt("batch_size");
  t.epochs = cfg.GetInt("epochs");
  t.patience = cfg.GetInt("patience");
  t.min_improvement = cfg.GetDouble("min_improvement");
  t.finetune_entity_embeddings = cfg.GetBool("finetune_entity_embeddings");
  t.seed = cfg.GetUint("seed");
  t.Validate();
  return t;
}

TrainConfig EntityTrainFromConfig(const Config &cfg) {
  TrainConfig t;
  t.learning_rate = cfg.GetDouble("entity_learning_rate");
  t.batch_size = cfg.GetInt("entity_batch_size");
  t.epochs = cfg.GetInt("entity_epochs");
  t.patience = cfg.GetInt("patience");
  t.min_improvement = cfg.GetDouble("min_improvement");
  t.seed = cfg.GetUint("seed");
  t.Validate();
  return t;
}

PlantedConfig PlantedFromConfig(const Config &cfg) {
  PlantedConfig p;
  p.num_docs = cfg.GetInt("synth_docs");
  p.num_queries = cfg.GetInt("synth_queries");
  p.relevant_per_query = cfg.GetInt("synth_relevant");
  p.distractors_per_query = cfg.GetInt("synth_distractors");
  p.background_entities = cfg.GetInt("synth_background_entities");
  const int d = cfg.GetInt("synth_dim");
  p.dims = {cfg.GetInt("synth_dim_k"), d, d, d};
  p.segmenter = SegmenterFromConfig(cfg);
  p.seed = cfg.GetUint("seed");
  return p;
}

}  // namespace dreq

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

#ifndef DREQ_CONFIG_H_
#define DREQ_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "dreq/corpus.h"
#include "dreq/model.h"
#include "dreq/optim.h"
#include "dreq/retrieval.h"
#include "dreq/synthetic.h"

namespace dreq {

// Flat `key = value` settings with '#' comments. Every key has a built-in
// default; unknown keys are rejected. Layers, later wins: defaults, config
// file, DREQ_<KEY> environment variables, explicit overrides.
class Config {
 public:
  // Built-in defaults for every known key.
  Config();

  // Relative values of path keys are resolved against base_dir.
  void MergeText(std::string_view text, const std::string &source,
                 const std::string &base_dir = "");
  void MergeFile(const std::string &path);
  // Reads DREQ_<KEY> (key upper-cased) for every known key.
  void MergeEnvironment();
  // `key=value`; throws on unknown keys.
  void Set(const std::string &key, const std::string &value);

  bool Has(const std::string &key) const { return values_.count(key) > 0; }
  const std::string &Get(const std::string &key) const;
  int GetInt(const std::string &key) const;
  uint64_t GetUint(const std::string &key) const;
  double GetDouble(const std::string &key) const;
  bool GetBool(const std::string &key) const;

  // One `key = value` line per key, sorted by key.
  std::string Canonical() const;
  // FNV-1a of Canonical().
  uint64_t Digest() const;

  const std::map<std::string, std::string> &values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

RetrievalConfig RetrievalFromConfig(const Config &cfg);
AnalyzerConfig AnalyzerFromConfig(const Config &cfg);
SegmenterConfig SegmenterFromConfig(const Config &cfg);
WeightingOptions WeightingFromConfig(const Config &cfg);
DimsConfig DimsFromConfig(const Config &cfg);
// DREQ training (`learning_rate`, `batch_size`, ...) or the entity head
// (`entity_learning_rate`, ...). Both use `seed`.
TrainConfig DreqTrainFromConfig(const Config &cfg);
TrainConfig EntityTrainFromConfig(const Config &cfg);
PlantedConfig PlantedFromConfig(const Config &cfg);

std::string HexDigest(uint64_t digest);

}  // namespace dreq

#endif  // DREQ_CONFIG_H_

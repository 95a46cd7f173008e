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

#ifndef DREQ_TEXT_H_
#define DREQ_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace dreq {

// Classic Porter (1980) suffix stripper. Expects lowercase ASCII.
std::string PorterStem(std::string_view word);

struct AnalyzerConfig {
  bool stem = false;
  bool operator==(const AnalyzerConfig &) const = default;
};

// Lowercases, splits on non-alphanumeric bytes and optionally stems.
std::vector<std::string> Tokenize(std::string_view text,
                                  const AnalyzerConfig &cfg = {});

}  // namespace dreq

#endif  // DREQ_TEXT_H_

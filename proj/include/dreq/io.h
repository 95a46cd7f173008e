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

#ifndef DREQ_IO_H_
#define DREQ_IO_H_

#include <string>
#include <string_view>
#include <vector>

namespace dreq {

std::vector<std::string_view> SplitWhitespace(std::string_view s);
std::vector<std::string_view> Split(std::string_view s, char sep);
std::string_view Trim(std::string_view s);

std::string ReadFile(const std::string &path);

// Writes to a sibling temp file and renames over path, so readers never see
// a truncated artifact.
void WriteFileAtomic(const std::string &path, const std::string &contents);

}  // namespace dreq

#endif  // DREQ_IO_H_

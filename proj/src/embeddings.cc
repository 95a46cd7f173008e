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

#include "dreq/embeddings.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dreq/io.h"

namespace dreq {

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t SplitMix64::Below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Below(0)");
  // Rejection sampling removes modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = Next();
  } while (x >= limit);
  return x % n;
}

double SplitMix64::Normal() {
  double u1;
  do {
    u1 = Uniform();
  } while (u1 <= 0.0);
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Vector SyntheticEmbed(std::string_view space, std::string_view id, int dim,
                      uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("SyntheticEmbed: dim must be >= 1");
  std::string key;
  key.reserve(space.size() + id.size() + 24);
  key.append(space);
  key.push_back('\x1f');
  key.append(id);
  key.push_back('\x1f');
  key.append(std::to_string(seed));
  SplitMix64 rng(Fnv1a64(key));
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    v[i] = static_cast<double>(rng.Next() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  const double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

EmbeddingStore::EmbeddingStore(std::string space, int dim)
    : space_(std::move(space)), dim_(dim) {
  if (dim < 1) throw std::invalid_argument("store dim must be >= 1");
}

void EmbeddingStore::Add(const std::string &id, Vector v) {
  if (v.size() != dim_) {
    throw ShapeError("vector '" + id + "' has dim " + std::to_string(v.size()) +
                     ", store '" + space_ + "' expects " +
                     std::to_string(dim_));
  }
  if (!v.allFinite())
    throw std::invalid_argument("vector '" + id + "' has non-finite entries");
  auto [it, inserted] = index_.emplace(id, ids_.size());
  if (!inserted)
    throw std::invalid_argument("duplicate id '" + id + "' in store '" +
                                space_ + "'");
  ids_.push_back(id);
  vectors_.push_back(std::move(v));
}

void EmbeddingStore::Set(const std::string &id, Vector v) {
  auto it = index_.find(id);
  if (it == index_.end()) {
    Add(id, std::move(v));
    return;
  }
  if (v.size() != dim_) throw ShapeError("vector '" + id + "' has wrong dim");
  vectors_[it->second] = std::move(v);
}

const Vector *EmbeddingStore::Find(const std::string &id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

const Vector &EmbeddingStore::At(const std::string &id) const {
  if (const Vector *v = Find(id)) return *v;
  throw std::out_of_range("no vector for '" + id + "' in store '" + space_ +
                          "'");
}

Vector &EmbeddingStore::MutableAt(const std::string &id) {
  return vectors_[IndexOf(id)];
}

std::size_t EmbeddingStore::IndexOf(const std::string &id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw std::out_of_range("no vector for '" + id + "' in store '" + space_ +
                            "'");
  return it->second;
}

bool EmbeddingStore::operator==(const EmbeddingStore &other) const {
  if (space_ != other.space_ || dim_ != other.dim_ || ids_ != other.ids_)
    return false;
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (vectors_[i] != other.vectors_[i]) return false;
  }
  return true;
}

std::string FormatReal(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double ParseReal(std::string_view token) {
  double value = 0;
  const char *first = token.data();
  const char *last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw std::invalid_argument("not a number: '" + std::string(token) + "'");
  return value;
}

EmbeddingStore ParseStore(std::istream &in, const std::string &source) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(source + ": missing store header");
  std::string space;
  int dim = 0;
  {
    if (line.rfind("#", 0) != 0)
      throw std::runtime_error(source + ": header must start with '#'");
    std::istringstream header(line.substr(1));
    std::string field;
    while (header >> field) {
      auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      auto key = field.substr(0, eq);
      auto value = field.substr(eq + 1);
      if (key == "space") space = value;
      if (key == "dim") dim = std::stoi(value);
    }
    if (dim < 1) throw std::runtime_error(source + ": header lacks dim=<d>");
  }
  EmbeddingStore store(space, dim);
  int line_no = 1;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(source + ":" + std::to_string(line_no) +
                               ": expected id<TAB>components");
    std::string id = line.substr(0, tab);
    values.clear();
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    for (auto token : SplitWhitespace(rest)) {
      try {
        values.push_back(ParseReal(token));
      } catch (const std::invalid_argument &e) {
        throw std::runtime_error(source + ":" + std::to_string(line_no) +
                                 ": " + e.what());
      }
    }
    if (static_cast<int>(values.size()) != dim) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) +
                               ": vector '" + id + "' has " +
                               std::to_string(values.size()) +
                               " components, header declares dim=" +
                               std::to_string(dim));
    }
    try {
      store.Add(id, Eigen::Map<const Vector>(values.data(), dim));
    } catch (const std::invalid_argument &e) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return store;
}

EmbeddingStore LoadStore(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding store " + path);
  return ParseStore(in, path);
}

void WriteStore(const EmbeddingStore &store, std::ostream &out) {
  out << "#space=" << store.space() << " dim=" << store.dim() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << store.ids()[i] << '\t';
    const Vector &v = store.row(i);
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (j) out << ' ';
      out << FormatReal(v[j]);
    }
    out << '\n';
  }
}

void SaveStore(const EmbeddingStore &store, const std::string &path) {
  std::ostringstream out;
  WriteStore(store, out);
  WriteFileAtomic(path, out.str());
}

}  // namespace dreq

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

#ifndef DREQ_EMBEDDINGS_H_
#define DREQ_EMBEDDINGS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace dreq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Embedding dimensions: k for query-conditioned entity encodings, m for
// entity embeddings, n for passage/text embeddings, p for query and hybrid
// document embeddings.
struct DimsConfig {
  int k = 32;
  int m = 32;
  int n = 32;
  int p = 32;

  void Validate() const {
    if (k < 1 || m < 1 || n < 1 || p < 1)
      throw std::invalid_argument("embedding dims must be positive");
  }
  bool operator==(const DimsConfig &) const = default;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Dense kernels. Templated on the Eigen expression so they accept blocks,
// maps and temporaries without copies.

// W x + b.
template <typename MatDerived, typename VecDerived, typename BiasDerived>
Eigen::Matrix<typename MatDerived::Scalar, Eigen::Dynamic, 1> Linear(
    const Eigen::MatrixBase<MatDerived> &w,
    const Eigen::MatrixBase<VecDerived> &x,
    const Eigen::MatrixBase<BiasDerived> &b) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw ShapeError("linear: W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + ", x has " +
                     std::to_string(x.size()) + ", b has " +
                     std::to_string(b.size()));
  }
  return w * x + b;
}

// Max-subtracted exponential normalization.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> Softmax(
    const Eigen::MatrixBase<Derived> &x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw std::invalid_argument("softmax of empty input");
  const Scalar shift = x.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e =
      (x.derived().template cast<Scalar>().array() - shift).exp().matrix();
  return e / e.sum();
}

inline std::vector<double> Softmax(const std::vector<double> &x) {
  if (x.empty()) throw std::invalid_argument("softmax of empty input");
  Eigen::Map<const Vector> view(x.data(), static_cast<Eigen::Index>(x.size()));
  Vector s = Softmax(view);
  return {s.data(), s.data() + s.size()};
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar Cosine(const Eigen::MatrixBase<DerivedA> &u,
                                 const Eigen::MatrixBase<DerivedB> &v) {
  if (u.size() != v.size()) throw ShapeError("cosine: dimension mismatch");
  const auto nu = u.norm();
  const auto nv = v.norm();
  if (nu == 0 || nv == 0) throw std::invalid_argument("cosine of zero vector");
  auto c = u.dot(v) / (nu * nv);
  // Rounding can push |c| a hair past 1.
  return std::clamp(c, decltype(c)(-1), decltype(c)(1));
}

template <typename Scalar>
Scalar Sigmoid(Scalar z) {
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

// ---------------------------------------------------------------------------
// Platform-independent pseudo-random numbers.

uint64_t Fnv1a64(std::string_view bytes);

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t Next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n);
  // Standard normal via Box-Muller; no cached second value.
  double Normal();

 private:
  uint64_t state_;
};

template <typename T>
void Shuffle(std::vector<T> &items, SplitMix64 &rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.Below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Hash-seeded unit vector standing in for a pretrained encoder output.
Vector SyntheticEmbed(std::string_view space, std::string_view id, int dim,
                      uint64_t seed);

// ---------------------------------------------------------------------------

// Fixed-dimension vectors keyed by id, in insertion order.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::string space, int dim);

  const std::string &space() const { return space_; }
  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  // Throws on duplicate id or wrong dimension.
  void Add(const std::string &id, Vector v);
  void Set(const std::string &id, Vector v);

  bool Contains(const std::string &id) const { return index_.count(id) > 0; }
  const Vector *Find(const std::string &id) const;
  // Throws std::out_of_range naming the id.
  const Vector &At(const std::string &id) const;
  Vector &MutableAt(const std::string &id);

  const std::vector<std::string> &ids() const { return ids_; }
  const Vector &row(std::size_t i) const { return vectors_[i]; }
  Vector &mutable_row(std::size_t i) { return vectors_[i]; }
  std::size_t IndexOf(const std::string &id) const;

  bool operator==(const EmbeddingStore &other) const;

 private:
  std::string space_;
  int dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Text format: `#space=<name> dim=<d>` then `id<TAB>c1 c2 ... cd`, each
// component printed with 17 significant digits.
EmbeddingStore LoadStore(const std::string &path);
EmbeddingStore ParseStore(std::istream &in, const std::string &source);
void SaveStore(const EmbeddingStore &store, const std::string &path);
void WriteStore(const EmbeddingStore &store, std::ostream &out);

// Shared numeric formatting for stores and checkpoints.
std::string FormatReal(double x);
double ParseReal(std::string_view token);

// The four stores consumed by the re-ranker. Query-conditioned entity
// encodings are keyed `query_id::entity_id`.
struct StoreSet {
  EmbeddingStore entity;      // dim m
  EmbeddingStore passage;     // dim n, keyed by passage id
  EmbeddingStore query;       // dim p
  EmbeddingStore entity_enc;  // dim k

  DimsConfig dims() const {
    return {entity_enc.dim(), entity.dim(), passage.dim(), query.dim()};
  }
};

inline std::string EncodingKey(std::string_view query_id,
                               std::string_view entity_id) {
  std::string key(query_id);
  key += "::";
  key += entity_id;
  return key;
}

}  // namespace dreq

#endif  // DREQ_EMBEDDINGS_H_

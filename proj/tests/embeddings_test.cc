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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <sstream>

#include "dreq/embeddings.h"

using dreq::EmbeddingStore;
using dreq::Matrix;
using dreq::Vector;

TEST_CASE("linear layer") {
  Vector x(2);
  x << 0.3, -0.8;
  SUBCASE("identity and zero bias return the input") {
    CHECK(dreq::Linear(Matrix::Identity(2, 2), x, Vector::Zero(2)) == x);
  }
  SUBCASE("zero weights return the bias") {
    Vector b(3);
    b << 1, 2, 3;
    CHECK(dreq::Linear(Matrix::Zero(3, 2), x, b) == b);
  }
  SUBCASE("3x2 case") {
    Matrix w(3, 2);
    w << 0.5, -1.0, 2.0, 0.25, -0.75, 1.5;
    Vector b(3);
    b << 0.1, -0.2, 0.05;
    const Vector y = dreq::Linear(w, x, b);
    CHECK(y[0] == doctest::Approx(1.05).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(y[2] == doctest::Approx(-1.375).epsilon(1e-12));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(dreq::Linear(Matrix::Zero(3, 3), x, Vector::Zero(3)), dreq::ShapeError);
  }
}

TEST_CASE("softmax") {
  Vector z(2);
  z << 0, 0;
  CHECK(dreq::Softmax(z).isApprox(Vector::Constant(2, 0.5)));

  Vector c = Vector::Constant(3, 1234.5);
  const Vector s = dreq::Softmax(c);
  for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3.0));

  Vector x(3);
  x << 1, 2, 3;
  const Vector p = dreq::Softmax(x);
  CHECK(p[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));

  Vector big(2);
  big << 1000, -1000;
  const Vector q = dreq::Softmax(big);
  CHECK(q.allFinite());
  CHECK(q[0] == doctest::Approx(1.0));

  CHECK_THROWS(dreq::Softmax(Vector(0)));
  const auto v = dreq::Softmax(std::vector<double>{1, 2, 3});
  CHECK(v[2] == doctest::Approx(p[2]));
}

TEST_CASE("softmax is order preserving and positive") {
  dreq::SplitMix64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(6);
    for (int i = 0; i < 6; ++i) x[i] = rng.Uniform(-20, 20);
    const Vector p = dreq::Softmax(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    for (int i = 0; i < 6; ++i) {
      CHECK(p[i] > 0);
      for (int j = 0; j < 6; ++j)
        if (x[i] < x[j]) CHECK(p[i] <= p[j]);
    }
  }
}

TEST_CASE("cosine") {
  Vector u(2), v(2), e1(2), e2(2);
  u << 1, 1;
  v << 1, 0;
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(dreq::Cosine(u, u) == doctest::Approx(1.0));
  CHECK(dreq::Cosine(e1, e2) == 0.0);
  CHECK(dreq::Cosine(u, v) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-12));
  CHECK_THROWS(dreq::Cosine(Vector::Zero(2), v));
  CHECK_THROWS_AS(dreq::Cosine(Vector::Ones(3), v), dreq::ShapeError);
}

TEST_CASE("sigmoid is stable at both tails") {
  CHECK(dreq::Sigmoid(0.0) == 0.5);
  CHECK(dreq::Sigmoid(800.0) == 1.0);
  CHECK(dreq::Sigmoid(-800.0) >= 0.0);
  CHECK(dreq::Sigmoid(-2.0) == doctest::Approx(1.0 - dreq::Sigmoid(2.0)));
}

TEST_CASE("splitmix and shuffle are reproducible") {
  dreq::SplitMix64 a(7), b(7);
  for (int i = 0; i < 10; ++i) CHECK(a.Next() == b.Next());
  // Reference output of SplitMix64 seeded with 0.
  dreq::SplitMix64 z(0);
  CHECK(z.Next() == 0xe220a8397b1dcdafULL);
  dreq::SplitMix64 r(11);
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.Below(7) < 7);
    const double u = r.Uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::vector<int> x{1, 2, 3, 4, 5, 6, 7, 8}, y = x;
  dreq::SplitMix64 s1(5), s2(5);
  dreq::Shuffle(x, s1);
  dreq::Shuffle(y, s2);
  CHECK(x == y);
  std::sort(x.begin(), x.end());
  CHECK(x == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("fnv-1a reference values") {
  CHECK(dreq::Fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(dreq::Fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("synthetic embeddings") {
  const Vector a = dreq::SyntheticEmbed("entity", "Q42", 16, 1);
  CHECK(a == dreq::SyntheticEmbed("entity", "Q42", 16, 1));
  CHECK(a != dreq::SyntheticEmbed("entity", "Q42", 16, 2));
  CHECK(a != dreq::SyntheticEmbed("passage", "Q42", 16, 1));
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) {
    const Vector v = dreq::SyntheticEmbed("entity", "e" + std::to_string(i), 32, 9);
    CHECK(std::abs(v.norm() - 1.0) < 1e-9);
    seen.insert({v.data(), v.data() + v.size()});
  }
  CHECK(seen.size() == 1000);
  CHECK_THROWS(dreq::SyntheticEmbed("entity", "x", 0, 1));
}

TEST_CASE("embedding store") {
  EmbeddingStore store("entity", 4);
  Vector v(4);
  v << 0.1, -2.5, 1e-300, 3.0 / 7.0;
  store.Add("a", v);
  store.Add("b", Vector::Ones(4));
  CHECK(store.size() == 2);
  CHECK(store.At("a") == v);
  CHECK(store.Find("c") == nullptr);
  CHECK_THROWS_AS(store.At("c"), std::out_of_range);
  CHECK_THROWS_AS(store.Add("a", v), std::invalid_argument);
  CHECK_THROWS_AS(store.Add("c", Vector::Ones(3)), dreq::ShapeError);
  Vector bad = Vector::Ones(4);
  bad[1] = std::nan("");
  CHECK_THROWS(store.Add("c", bad));

  SUBCASE("round trip is exact") {
    std::stringstream ss;
    dreq::WriteStore(store, ss);
    const EmbeddingStore back = dreq::ParseStore(ss, "mem");
    CHECK(back == store);
    CHECK(back.space() == "entity");
  }
  SUBCASE("component count must match the header") {
    std::istringstream in("#space=entity dim=4\nx\t1 2 3\n");
    CHECK_THROWS_WITH(dreq::ParseStore(in, "f.emb"),
                      doctest::Contains("f.emb:2"));
  }
  SUBCASE("header-only store is empty") {
    std::istringstream in("#space=entity dim=4\n");
    CHECK(dreq::ParseStore(in, "f").size() == 0);
  }
  SUBCASE("malformed numbers") {
    std::istringstream in("#space=entity dim=2\nx\t1 abc\n");
    CHECK_THROWS(dreq::ParseStore(in, "f"));
  }
}

TEST_CASE("real formatting round trips") {
  dreq::SplitMix64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.Normal() * std::pow(10.0, rng.Uniform(-30, 30));
    CHECK(dreq::ParseReal(dreq::FormatReal(x)) == x);
  }
  CHECK(dreq::ParseReal("+1.5") == 1.5);
  CHECK_THROWS(dreq::ParseReal("1.5x"));
  CHECK_THROWS(dreq::ParseReal(""));
}

TEST_CASE("encoding keys") {
  CHECK(dreq::EncodingKey("q1", "Q42") == "q1::Q42");
}

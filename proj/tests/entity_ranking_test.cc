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

#include <sstream>

#include "dreq/entity_ranking.h"

using dreq::EmbeddingStore;
using dreq::EntityHead;
using dreq::RowVector;
using dreq::Vector;

namespace {

Vector V(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

EntityHead Head(std::initializer_list<double> w, double b) {
  EntityHead h;
  h.weights = V(w).transpose();
  h.bias = b;
  return h;
}

}  // namespace

TEST_CASE("entity scoring") {
  CHECK(dreq::ScoreEntity(Head({0, 0, 0}, 0.7), V({5, -1, 2})) == 0.7);
  CHECK(dreq::ScoreEntity(Head({1, 0, 0}, 0), V({2, 9, 9})) == 2.0);
  CHECK(dreq::ScoreEntity(Head({0.5, -0.25, 1.5, 2.0}, 0.3), V({1.0, 4.0, -0.5, 0.125})) ==
        doctest::Approx(-0.7).epsilon(1e-12));
  CHECK_THROWS_AS(dreq::ScoreEntity(Head({1, 2}, 0), V({1, 2, 3})), dreq::ShapeError);
}

TEST_CASE("entity rankings") {
  SUBCASE("singleton") {
    const auto r = dreq::MakeEntityRanking("q", {{"a", -4.0}});
    CHECK(r.entries[0].prob == 1.0);
    CHECK(r.entries[0].rank == 1);
  }
  SUBCASE("equal scores split evenly, ties by id") {
    const auto r = dreq::MakeEntityRanking("q", {{"b", 1.0}, {"a", 1.0}});
    CHECK(r.entries[0].entity_id == "a");
    CHECK(r.entries[0].prob == doctest::Approx(0.5));
    CHECK(r.entries[1].prob == doctest::Approx(0.5));
  }
  SUBCASE("softmax of 1, 2, 3") {
    const auto r = dreq::MakeEntityRanking("q", {{"x", 1.0}, {"y", 2.0}, {"z", 3.0}});
    CHECK(r.Find("x")->rank == 3);
    CHECK(r.Find("y")->rank == 2);
    CHECK(r.Find("z")->rank == 1);
    CHECK(r.Find("x")->prob == doctest::Approx(0.09003057317038046).epsilon(1e-12));
    CHECK(r.Find("z")->prob == doctest::Approx(0.6652409557748219).epsilon(1e-12));
    CHECK(r.Find("w") == nullptr);
  }
  SUBCASE("top k renormalizes over survivors") {
    const auto r = dreq::MakeEntityRanking("q", {{"x", 1.0}, {"y", 2.0}, {"z", 3.0}}, 2);
    CHECK(r.size() == 2);
    CHECK(r.Find("y")->prob + r.Find("z")->prob == doctest::Approx(1.0));
  }
  SUBCASE("duplicates are rejected") {
    CHECK_THROWS(dreq::MakeEntityRanking("q", {{"x", 1.0}, {"x", 2.0}}));
  }
}

TEST_CASE("ranking pooled entities by encoding") {
  EmbeddingStore enc("entity_enc", 2);
  enc.Add("q1::a", V({1, 0}));
  enc.Add("q1::b", V({0, 1}));
  const auto r = dreq::RankEntities(Head({2, -1}, 0), "q1", {"a", "b"}, enc);
  CHECK(r.entries[0].entity_id == "a");
  CHECK(r.entries[0].raw_score == 2.0);
  CHECK_THROWS_WITH(dreq::RankEntities(Head({2, -1}, 0), "q1", {"a", "c"}, enc),
                    doctest::Contains("c"));
}

TEST_CASE("entity head training") {
  dreq::SplitMix64 rng(5);
  std::vector<dreq::LabeledEncoding> examples;
  for (int i = 0; i < 200; ++i) {
    Vector x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.Normal();
    const double label = x[0] > 0 ? 1.0 : 0.0;
    x[0] += label ? 1.0 : -1.0;  // margin
    examples.push_back({x, label});
  }
  dreq::TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 200;
  cfg.seed = 3;
  const EntityHead head = dreq::TrainEntityHead(examples, cfg);
  CHECK(dreq::EntityHeadLoss(head, examples) < 0.1);
  CHECK(head == dreq::TrainEntityHead(examples, cfg));

  SUBCASE("analytic gradient matches central differences") {
    EntityHead probe = Head({0.3, -0.2, 0.1}, 0.05);
    EntityHead grad;
    dreq::EntityHeadLoss(probe, examples, &grad);
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      EntityHead plus = probe, minus = probe;
      if (j < 3) {
        plus.weights[j] += h;
        minus.weights[j] -= h;
      } else {
        plus.bias += h;
        minus.bias -= h;
      }
      const double fd =
          (dreq::EntityHeadLoss(plus, examples) - dreq::EntityHeadLoss(minus, examples)) / (2 * h);
      const double analytic = j < 3 ? grad.weights[j] : grad.bias;
      CHECK(std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8}) < 1e-4);
    }
  }
}

TEST_CASE("description bm25 entity ranking") {
  dreq::CorpusStore corpus;
  corpus.AddEntity({"E1", "large black bear of north america"});
  corpus.AddEntity({"E2", "river in france"});
  corpus.AddEntity({"E3", "bear market in finance"});
  const auto idx = dreq::BuildDescriptionIndex(corpus);
  const auto r = dreq::Bm25EntityRank({"q", "black bear"}, {"E1", "E2", "E3", "E9"}, idx);
  CHECK(r.entries[0].entity_id == "E1");
  CHECK(r.entries[1].entity_id == "E3");
  CHECK(r.Find("E2")->raw_score == 0.0);
  CHECK(r.Find("E9")->raw_score == 0.0);
  // Brute-force check against direct scoring.
  CHECK(r.Find("E1")->raw_score ==
        doctest::Approx(dreq::Bm25Score(idx, {"black", "bear"}, "E1")).epsilon(1e-12));
}

TEST_CASE("embedding similarity to query entities") {
  EmbeddingStore store("entity", 2);
  store.Add("q1", V({1, 0}));
  store.Add("q2", V({0, 1}));
  CHECK(dreq::EmbeddingEntityScore({{"q1", 1.0}}, V({1, 0}), store) == doctest::Approx(1.0));
  CHECK(dreq::EmbeddingEntityScore({{"q1", 1.0}}, V({0, 3}), store) == doctest::Approx(0.0));
  CHECK(dreq::EmbeddingEntityScore({{"q1", 0.5}, {"q2", 0.5}}, V({1, 0}), store) ==
        doctest::Approx(0.5));
}

TEST_CASE("min-max normalization") {
  CHECK(dreq::MinMaxNormalize({1, 3, 2}) == std::vector<double>{0, 1, 0.5});
  CHECK(dreq::MinMaxNormalize({4, 4}) == std::vector<double>{0.5, 0.5});
  CHECK(dreq::MinMaxNormalize({}).empty());
}

TEST_CASE("geeer-style interpolation") {
  EmbeddingStore store("entity", 2);
  store.Add("Q", V({1, 0}));
  store.Add("a", V({1, 0}));
  store.Add("b", V({0, 1}));
  const std::map<std::string, double> bm25{{"a", 0.0}, {"b", 2.0}};
  const auto dense_only = dreq::GeeerEntityRank("q", {{"Q", 1.0}}, {"a", "b"}, store, bm25, 0.0);
  CHECK(dense_only.entries[0].entity_id == "a");
  const auto sparse_only = dreq::GeeerEntityRank("q", {{"Q", 1.0}}, {"a", "b"}, store, bm25, 1.0);
  CHECK(sparse_only.entries[0].entity_id == "b");
  const auto mixed = dreq::GeeerEntityRank("q", {{"Q", 1.0}}, {"a", "b"}, store, bm25, 0.5);
  CHECK(mixed.Find("a")->raw_score == doctest::Approx(0.5));
  CHECK(mixed.Find("b")->raw_score == doctest::Approx(0.5));
  CHECK_THROWS_WITH(dreq::GeeerEntityRank("q", {{"none", 1.0}}, {"a"}, store, bm25),
                    doctest::Contains("inapplicable"));
}

TEST_CASE("entity ranking and head files round trip") {
  std::map<std::string, dreq::EntityRanking> rankings;
  rankings["q1"] = dreq::MakeEntityRanking("q1", {{"a", 0.1}, {"b", 1.0 / 3.0}});
  rankings["q2"] = dreq::MakeEntityRanking("q2", {{"c", -2.5}});
  const std::string text = dreq::FormatEntityRankings(rankings);
  std::istringstream in(text);
  const auto back = dreq::ParseEntityRankings(in, "r.tsv");
  CHECK(dreq::FormatEntityRankings(back) == text);
  CHECK(back.at("q1").Find("b")->rank == 1);
  CHECK(dreq::ToRanking(back.at("q1")).Ids() == std::vector<std::string>{"b", "a"});

  const EntityHead head = Head({0.1, -1.0 / 3.0, 1e-17}, 0.25);
  std::istringstream hin(dreq::SerializeEntityHead(head));
  CHECK(dreq::ParseEntityHead(hin, "h") == head);
  std::istringstream bad("#dreq-entity-head k=3\n1 2\n0\n");
  CHECK_THROWS(dreq::ParseEntityHead(bad, "h"));
}

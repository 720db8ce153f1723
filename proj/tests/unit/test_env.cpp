// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "relrule/env.hpp"
#include "relrule/errors.hpp"

using namespace relrule;

namespace {

using Paths = std::vector<std::vector<RelationId>>;

// Known r0..r7, invented u0 u1 (ids 8, 9).
RelationVocab vocab(bool dummy = false) {
  return RelationVocab({"r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7"}, 2, dummy);
}

}  // namespace

TEST_CASE("reset") {
  const auto v = vocab();
  const auto s = reset(Paths{{1, 2}}, 3, v);
  CHECK_FALSE(s.terminal);
  CHECK(s.paths.size() == 1);
  CHECK(s.initial_length == 2);

  const auto t = reset(Paths{{1}}, 3, v);
  CHECK(t.terminal);
  CHECK(t.final_relation == 1);

  CHECK(reset(Paths{{1, 2, 5, 3, 7, 6}, {1, 2, 4}, {4, 5}, {1, 6}}, 3, v).paths.size() == 4);
  CHECK_THROWS_AS(reset(Paths{}, 3, v), InvalidEpisode);
  CHECK_THROWS_AS(reset(Paths{{1, 42}}, 3, v), VocabError);
}

TEST_CASE("valid_actions") {
  const auto v = vocab();
  CHECK(valid_actions(reset(Paths{{1, 2, 5}}, 0, v)) == std::vector<Body>{{1, 2}, {2, 5}});
  CHECK(valid_actions(reset(Paths{{1, 1, 1}}, 0, v)) == std::vector<Body>{{1, 1}});
  CHECK(valid_actions(reset(Paths{{1, 2}, {2, 1}}, 0, v)) == std::vector<Body>{{1, 2}, {2, 1}});
  CHECK_THROWS_AS(valid_actions(reset(Paths{{1}}, 0, v)), InternalError);
}

TEST_CASE("featurize channels") {
  const auto v = vocab();
  RuleMemory m(v, ScoreParams{});
  const auto t = featurize(reset(Paths{{1, 2}, {1, 2}}, 0, v), m);
  CHECK(t.pairs().size() == 1);
  CHECK(t.at(1, 2, kOccurrences) == 2);
  CHECK(t.at(1, 2, kTopPosition) == 0);
  CHECK(t.at(1, 2, kTopPositionCount) == 2);
  CHECK(t.at(1, 2, kFirstKnown) == 1);
  CHECK(t.at(1, 2, kBothKnown) == 1);
  // Memory-derived channels are zero for an absent pair; the body flags are not.
  for (int c : {kInMemory, kHeadKnown, kScore}) CHECK(t.at(1, 2, c) == 0);
  CHECK(t.at(2, 1, kOccurrences) == 0);

  m.insert({3, {1, 2}}, 4.303);
  const auto t2 = featurize(reset(Paths{{1, 2}}, 0, v), m);
  CHECK(t2.at(1, 2, kInMemory) == 1);
  CHECK(t2.at(1, 2, kHeadKnown) == 1);
  CHECK(t2.at(1, 2, kScore) == 4.303);

  m.insert({9, {8, 2}}, -0.5);
  const auto t3 = featurize(reset(Paths{{3, 8, 2}, {8, 2, 2}}, 0, v), m);
  CHECK(t3.at(8, 2, kFirstKnown) == 0);
  CHECK(t3.at(8, 2, kSecondKnown) == 1);
  CHECK(t3.at(8, 2, kBothKnown) == 0);
  CHECK(t3.at(8, 2, kHeadKnown) == 0);
  CHECK(t3.at(8, 2, kOccurrences) == 2);
  CHECK(t3.at(8, 2, kTopPosition) == 0);  // positions 1 and 0 tie at one each
  CHECK(t3.at(8, 2, kTopPositionCount) == 1);

  const auto dense = t3.dense();
  CHECK(dense.size() == 10u * 10u * kBaseChannels);
  double occupied = 0;
  for (std::size_t i = 0; i < dense.size(); i += kBaseChannels) occupied += dense[i];
  CHECK(occupied == 4);  // (3,8) (8,2) twice (2,2)

  const auto wide = featurize(reset(Paths{{1, 2, 1, 2}, {5, 6}}, 0, v), m, true);
  CHECK(wide.channels() == kBaseChannels + kExtraChannels);
  CHECK(wide.at(1, 2, kMaxPerPath) == 2);
  CHECK(wide.at(1, 2, kMinPerPath) == 0);
}

TEST_CASE("step") {
  const auto v = vocab();
  auto s = step(reset(Paths{{1, 2, 5, 3, 7, 6}}, 0, v), {1, 2}, 3);
  CHECK(s.paths[0] == std::vector<RelationId>{3, 5, 3, 7, 6});
  CHECK(s.steps == 1);

  s = step(reset(Paths{{1, 1, 1}}, 0, v), {1, 1}, 8);
  CHECK(s.paths[0] == std::vector<RelationId>{8, 1});

  s = step(reset(Paths{{1, 2}, {1, 2, 3}}, 0, v), {1, 2}, 4);
  CHECK(s.terminal);
  CHECK(s.final_relation == 4);
  CHECK(s.final_path == 0);
  CHECK(s.paths[1] == std::vector<RelationId>{4, 3});

  s = step(reset(Paths{{1, 2, 3}, {5, 1, 2}}, 0, v), {1, 2}, 4);
  CHECK(s.paths == Paths{{4, 3}, {5, 4}});

  CHECK_THROWS_AS(step(reset(Paths{{1, 2}}, 0, v), {2, 1}, 4), IllegalAction);
  const auto done = reset(Paths{{1}}, 0, v);
  CHECK_THROWS_AS(step(done, {1, 2}, 4), IllegalAction);
}

TEST_CASE("terminal reward") {
  const auto v = vocab();
  CHECK(terminal_reward(3, 3, v) == 1);
  CHECK(terminal_reward(8, 3, v) == 0);
  CHECK(terminal_reward(4, 3, v) == -1);
}

TEST_CASE("dummy relation encodes unary clauses") {
  const auto v = vocab(true);
  const RelationId dm = *v.dummy();
  auto s = reset(Paths{{1}}, 2, v);
  CHECK_FALSE(s.terminal);
  CHECK(s.paths[0] == std::vector<RelationId>{1, dm});
  s = step(s, {1, dm}, 2);
  CHECK(s.terminal);
  CHECK(s.final_relation == 2);
  CHECK(terminal_reward(dm, 2, v) == 0);
}

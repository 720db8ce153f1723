// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "relrule/errors.hpp"
#include "relrule/mcts.hpp"

using namespace relrule;

namespace {

using Paths = std::vector<std::vector<RelationId>>;

RelationVocab vocab() { return RelationVocab({"r0", "r1", "r2", "r3", "r4", "r5"}, 2, false); }

SearchConfig config(int sims) {
  SearchConfig c;
  c.simulations = sims;
  return c;
}

}  // namespace

TEST_CASE("single legal action gives a one-hot distribution") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(1);
  const auto r = search(reset(Paths{{1, 2}}, 3, m.vocab()), nullptr, m, config(16), rng);
  CHECK(r.actions == std::vector<Body>{{1, 2}});
  CHECK(r.pi == std::vector<double>{1.0});
}

TEST_CASE("root visits sum to the simulation count") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(2);
  PolicyValueNet net({m.vocab().total(), kBaseChannels, 8, 8}, rng);
  for (int sims : {1, 7, 64}) {
    const auto r = search(reset(Paths{{1, 2, 3, 4}, {2, 1, 5}}, 3, m.vocab()), &net, m, config(sims), rng);
    CHECK(std::accumulate(r.visits.begin(), r.visits.end(), 0) == sims);
    CHECK(std::accumulate(r.pi.begin(), r.pi.end(), 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("search never mutates memory") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({6, {1, 2}}, 0.5);
  const auto before = m;
  Rng rng(3);
  search(reset(Paths{{1, 2, 3, 4}}, 3, m.vocab()), nullptr, m, config(50), rng);
  CHECK(m == before);
  CHECK(hypothetical_head(m, {1, 2}) == 6);
  CHECK(hypothetical_head(m, {3, 4}) == 7);
}

TEST_CASE("toy world: the search finds the only winning first move") {
  // [r0 r1 r2]: (r0,r1)->r3 then (r3,r2)->r5 wins; (r1,r2)->r4 then (r0,r4)->r1 loses.
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({3, {0, 1}}, 1.0);
  m.insert({5, {3, 2}}, 1.0);
  m.insert({4, {1, 2}}, 1.0);
  m.insert({1, {0, 4}}, 1.0);
  const GroundRuleSet rules({{3, {0, 1}}, {5, {3, 2}}, {4, {1, 2}}, {1, {0, 4}}});
  const Paths paths{{0, 1, 2}};
  REQUIRE(oracle::best_reward(rules, paths, 5) == 1);
  const auto winners = oracle::optimal_first_actions(rules, paths, 5);
  REQUIRE(winners == std::set<Body>{{0, 1}});
  for (SearchMode mode : {SearchMode::Train, SearchMode::Eval}) {
    auto cfg = config(200);
    cfg.mode = mode;
    Rng rng(4);
    const auto r = search(reset(paths, 5, m.vocab()), nullptr, m, cfg, rng);
    Rng pick(0);
    if (mode == SearchMode::Train) CHECK(winners.contains(select_action(r, SelectMode::Argmax, pick)));
    CHECK(r.root_value <= 1.0);
  }
}

TEST_CASE("eval mode restricts to stored bodies and avoids dead ends") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({3, {0, 1}}, 1.0);
  m.insert({4, {3, 2}}, 1.0);
  m.insert({5, {1, 2}}, 1.0);  // leads to [r0 r5], which nothing reduces
  const auto legal = legal_actions(reset(Paths{{0, 1, 2}}, std::nullopt, m.vocab()), m, SearchMode::Eval);
  CHECK(legal == std::vector<Body>{{0, 1}, {1, 2}});
  auto cfg = config(100);
  cfg.mode = SearchMode::Eval;
  cfg.temperature = 0.0;
  Rng rng(5);
  const auto r = search(reset(Paths{{0, 1, 2}}, std::nullopt, m.vocab()), nullptr, m, cfg, rng);
  CHECK(select_action(r, SelectMode::Argmax, rng) == Body{0, 1});
}

TEST_CASE("temperature zero concentrates on the most visited child") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(6);
  PolicyValueNet net({m.vocab().total(), kBaseChannels, 8, 8}, rng);
  auto cfg = config(40);
  cfg.temperature = 0.0;
  const auto r = search(reset(Paths{{1, 2, 3, 4, 5}}, 3, m.vocab()), &net, m, cfg, rng);
  const auto best = std::max_element(r.visits.begin(), r.visits.end()) - r.visits.begin();
  CHECK(r.pi[static_cast<std::size_t>(best)] == 1.0);
}

TEST_CASE("select_action") {
  SearchResult one{{{2, 3}}, {1.0}, {5}, 0.0};
  Rng rng(7);
  CHECK(select_action(one, SelectMode::Sample, rng) == Body{2, 3});
  CHECK(select_action(one, SelectMode::Argmax, rng) == Body{2, 3});
  SearchResult tie{{{2, 3}, {1, 2}}, {0.5, 0.5}, {1, 1}, 0.0};
  CHECK(select_action(tie, SelectMode::Argmax, rng) == Body{1, 2});
  Rng a(8), b(8);
  for (int i = 0; i < 10; ++i) CHECK(select_action(tie, SelectMode::Sample, a) == select_action(tie, SelectMode::Sample, b));
  CHECK_THROWS_AS(select_action(SearchResult{}, SelectMode::Argmax, rng), InternalError);
}

TEST_CASE("search preconditions") {
  RuleMemory m(vocab(), ScoreParams{});
  Rng rng(9);
  CHECK_THROWS_AS(search(reset(Paths{{1}}, 3, m.vocab()), nullptr, m, config(4), rng), InternalError);
  CHECK_THROWS_AS(search(reset(Paths{{1, 2}}, 3, m.vocab()), nullptr, m, config(0), rng), ConfigError);
}

TEST_CASE("search session keeps the played subtree") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({3, {0, 1}}, 1.0);
  m.insert({4, {1, 2}}, 1.0);
  m.insert({5, {3, 2}}, 1.0);
  m.insert({1, {0, 4}}, 1.0);
  SearchConfig cfg = config(40);
  cfg.mode = SearchMode::Eval;
  cfg.temperature = 0.0;
  const auto root = reset(Paths{{0, 1, 2}}, std::nullopt, m.vocab());
  Rng rng(9);
  SearchSession session(nullptr, m, cfg);
  const auto first = session.run(root, rng);
  CHECK(std::accumulate(first.visits.begin(), first.visits.end(), 0) == 40);
  const Body played = select_action(first, SelectMode::Argmax, rng);
  const auto it = std::find(first.actions.begin(), first.actions.end(), played);
  const int carried = first.visits[static_cast<std::size_t>(it - first.actions.begin())];

  session.advance(played);
  const auto next_state = step(root, played, *m.head(played));
  const auto second = session.run(next_state, rng);
  // The kept child had `carried` visits; one of them was its own expansion.
  CHECK(std::accumulate(second.visits.begin(), second.visits.end(), 0) == 40 + carried - 1);

  SUBCASE("a different state discards the tree") {
    const auto other = reset(Paths{{0, 1, 2, 2}}, std::nullopt, m.vocab());
    const auto fresh = session.run(other, rng);
    CHECK(std::accumulate(fresh.visits.begin(), fresh.visits.end(), 0) == 40);
  }
}

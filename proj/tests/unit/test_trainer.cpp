// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "relrule/errors.hpp"
#include "relrule/trainer.hpp"
#include "relrule/worldgen.hpp"

using namespace relrule;

namespace {

// A chain sample x0 -r-> x1 -r-> ... with the given relations.
Sample chain(const std::vector<RelationId>& rels, std::optional<RelationId> target) {
  Sample s;
  std::vector<NodeId> nodes;
  for (std::size_t i = 0; i <= rels.size(); ++i) nodes.push_back(s.graph.intern_node("x" + std::to_string(i)));
  for (std::size_t i = 0; i < rels.size(); ++i) s.graph.add_edge(nodes[i], rels[i], nodes[i + 1]);
  s.query_source = nodes.front();
  s.query_target = nodes.back();
  s.target = target;
  return s;
}

PathSet paths_of(const Sample& s) {
  Rng rng(0);
  return sample_paths(s.graph, s.query_source, s.query_target, 8, 20, rng);
}

RelationVocab vocab(int invented = 4) {
  return RelationVocab({"r0", "r1", "r2", "r3", "r4", "r5"}, invented, false);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 1;
  c.simulations = 8;
  c.hidden = 8;
  c.warmup_episodes = 5;
  c.batch_size = 4;
  c.check_invariants = true;
  return c;
}

}  // namespace

TEST_CASE("curriculum order") {
  std::vector<Sample> s;
  for (int len : {5, 2, 3}) {
    s.push_back(chain(std::vector<RelationId>(static_cast<std::size_t>(len), 0), 1));
  }
  Rng rng(1);
  CHECK(curriculum_order(s, 0, rng) == std::vector<std::size_t>{1, 2, 0});

  std::vector<Sample> ties;
  for (int len : {3, 2, 3, 2}) ties.push_back(chain(std::vector<RelationId>(static_cast<std::size_t>(len), 0), 1));
  CHECK(curriculum_order(ties, 0, rng) == std::vector<std::size_t>{1, 3, 0, 2});

  // A known resolution length wins over the hop count.
  ties[0].resolution_length = 1;
  CHECK(curriculum_order(ties, 0, rng).front() == 0);

  Rng a(5), b(5);
  const auto oa = curriculum_order(ties, 1, a);
  CHECK(oa == curriculum_order(ties, 1, b));
  auto sorted = oa;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("run_episode: a stored correct rule resolves in one step") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({3, {1, 2}}, 1.0);
  const Sample s = chain({1, 2}, 3);
  Rng rng(2);
  auto cfg = small_config();
  const auto t = run_episode(s, paths_of(s), nullptr, m, cfg, rng);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.z == 1);
  CHECK(t.outcome == EpisodeOutcome::Hit);
  CHECK(t.final_relation == 3);
  // (1.0 + v0 + vT_pos + v_true) decayed once.
  CHECK(*m.score({1, 2}) == doctest::Approx((1.0 + 0.6 + 0.35 + 0.5) * 0.997).epsilon(1e-12));
}

TEST_CASE("run_episode: invented final gives z = 0 and no episode-end change") {
  RuleMemory m(vocab(1), ScoreParams{});
  const Sample s = chain({1, 2}, 3);
  Rng rng(3);
  const auto t = run_episode(s, paths_of(s), nullptr, m, small_config(), rng);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.z == 0);
  CHECK(t.outcome == EpisodeOutcome::Unresolved);
  // Only the step insertion value, decayed; the head was rewritten to the target.
  CHECK(*m.score({1, 2}) == doctest::Approx(-0.1 * 1.003).epsilon(1e-12));
  CHECK(m.head({1, 2}) == 3);
  CHECK(m.free_invented().size() == 1);
}

TEST_CASE("run_episode: wrong known final overwrites trace scores") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({4, {1, 1}}, 3.0);
  m.insert({5, {4, 1}}, 4.0);
  const Sample s = chain({1, 1, 1}, 3);  // one legal action per step
  Rng rng(4);
  auto cfg = small_config();
  const auto t = run_episode(s, paths_of(s), nullptr, m, cfg, rng);
  REQUIRE(t.steps.size() == 2);
  CHECK(t.final_relation == 5);
  CHECK(t.z == -1);
  CHECK(t.outcome == EpisodeOutcome::KnownMiss);
  CHECK(*m.score({1, 1}) == doctest::Approx(-1.003).epsilon(1e-12));
  CHECK(*m.score({4, 1}) == doctest::Approx(-1.003).epsilon(1e-12));

  const Sample s1 = chain({1, 2}, 3);
  cfg.score.simple_bonus = false;
  RuleMemory no_bonus(vocab(), cfg.score);
  no_bonus.insert({4, {1, 2}}, 0.3);
  const auto t1 = run_episode(s1, paths_of(s1), nullptr, no_bonus, cfg, rng);
  CHECK(t1.z == -1);
  CHECK(*no_bonus.score({1, 2}) == doctest::Approx(-1.003).epsilon(1e-12));
}

TEST_CASE("apply_simple_bonus") {
  RuleMemory m(vocab(), ScoreParams{});
  EpisodeTrace hit;
  hit.steps.push_back({});
  hit.steps[0].action = {{1, 2}, 3, 0.6, false};
  m.insert({3, {1, 2}}, 0.6);
  apply_simple_bonus(hit, 3, m);
  CHECK(*m.score({1, 2}) == doctest::Approx(1.1).epsilon(1e-15));

  // Score 1.0 before the episode, 1.6 after the step credit.
  RuleMemory c(vocab(), ScoreParams{});
  c.insert({4, {1, 2}}, 1.6);
  EpisodeTrace conflict;
  conflict.steps.push_back({});
  conflict.steps[0].action = {{1, 2}, 4, 0.6, false};
  apply_simple_bonus(conflict, 3, c);
  CHECK(*c.score({1, 2}) == doctest::Approx(0.8).epsilon(1e-15));

  ScoreParams off;
  off.simple_bonus = false;
  RuleMemory d(vocab(), off);
  d.insert({3, {1, 2}}, 0.6);
  apply_simple_bonus(hit, 3, d);
  CHECK(*d.score({1, 2}) == 0.6);

  EpisodeTrace two;
  two.steps.resize(2);
  CHECK_THROWS_AS(apply_simple_bonus(two, 3, m), ContractViolation);
}

TEST_CASE("run_episode: simple conflict uses v_wrong instead of vT_neg") {
  RuleMemory m(vocab(), ScoreParams{});
  m.insert({4, {1, 2}}, 1.0);
  const Sample s = chain({1, 2}, 3);
  Rng rng(6);
  const auto t = run_episode(s, paths_of(s), nullptr, m, small_config(), rng);
  CHECK(t.z == -1);
  CHECK(*m.score({1, 2}) == doctest::Approx(0.8 * 0.997).epsilon(1e-12));
}

TEST_CASE("run_episode: exhaustion aborts with z = 0") {
  // The only invented relation is held by a known-headed rule, so a new
  // body has no head to take and nothing can be recycled.
  RuleMemory m(RelationVocab({"r0", "r1", "r2", "r3"}, 1, false), ScoreParams{});
  m.insert({2, {4, 1}}, 1.0);
  const Sample s = chain({0, 1, 2, 3}, 3);
  Rng rng(7);
  auto cfg = small_config();
  const auto t = run_episode(s, paths_of(s), nullptr, m, cfg, rng);
  CHECK(t.aborted);
  CHECK(t.steps.empty());
  CHECK(t.z == 0);
  CHECK_FALSE(t.final_relation.has_value());
  m.check_invariants();
  CHECK_THROWS_AS(run_episode(chain({1, 2}, std::nullopt), paths_of(chain({1, 2}, std::nullopt)), nullptr, m, cfg, rng),
                  InvalidEpisode);
}

TEST_CASE("run_episode: one invented relation still finishes a long chain") {
  RuleMemory m(RelationVocab({"r0", "r1", "r2", "r3"}, 1, false), ScoreParams{});
  const Sample s = chain({0, 1, 2, 3}, 3);
  Rng rng(7);
  const auto t = run_episode(s, paths_of(s), nullptr, m, small_config(), rng);
  CHECK_FALSE(t.aborted);
  CHECK(t.steps.size() == 3);
  CHECK(t.final_relation.has_value());
  m.check_invariants();
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push({StateTensor(2, kBaseChannels), {{0, 1}}, {1.0}, static_cast<double>(i % 3 - 1)});
  CHECK(buf.size() == 3);
  CHECK(buf[0].z == -1.0);  // slot 0 now holds item 3
  CHECK(buf[1].z == 0.0);   // slot 1 now holds item 4
  CHECK(buf[2].z == 1.0);
  Rng rng(8);
  CHECK(buf.sample(10, rng).size() == 10);
  CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);
}

TEST_CASE("config validation and file round trip") {
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = TrainConfig{};
  c.score.v1 = 0.9;
  CHECK_THROWS_AS(validate(c), ConfigError);

  c = TrainConfig{};
  c.lr = 0.02;
  c.invented = 7;
  c.score.vt_pos = 0.8;
  c.root_noise = false;
  c.seed = 12345678901234ULL;
  std::stringstream io;
  write_config(io, c);
  const auto back = read_config(io);
  CHECK(config_entries(back) == config_entries(c));
  CHECK(back.score == c.score);

  std::istringstream bad("lr = fast\n");
  CHECK_THROWS_AS(read_config(bad), ParseError);
  std::istringstream unknown("# comment\nwhat = 1\n");
  CHECK_THROWS_AS(read_config(unknown), ParseError);
  TrainConfig d;
  CHECK_THROWS_AS(set_config_value(d, "nope", "1"), ConfigError);
  set_config_value(d, "sims", "12");
  CHECK(d.simulations == 12);
}

TEST_CASE("train: clean two-hop world learns every ground rule and is deterministic") {
  GenConfig g;
  g.num_relations = 8;
  g.num_rules = 8;
  g.resolution_len_range = {2, 2};
  g.seed = 3;
  Rng grng(g.seed);
  const auto rules = generate_rule_set(g, grng);
  Dataset data{world_relations(g.num_relations), {}};
  for (auto& s : generate_samples(rules, 200, g, grng)) data.samples.push_back(std::move(s.sample));
  const auto v = build_vocab(data, 10, false);

  auto cfg = small_config();
  cfg.seed = 11;
  std::vector<EpochStats> seen;
  const auto r = train(data, v, cfg, [&](const EpochStats& s, const PolicyValueNet&, const RuleMemory& m) {
    seen.push_back(s);
    m.check_invariants();
  });
  CHECK(seen.size() == 1);
  CHECK(r.epochs.front().episodes == 200);

  std::set<Body> observed;
  for (const auto& s : data.samples) {
    const auto& es = s.graph.edges();
    observed.insert({es[0].relation, es[1].relation});
  }
  for (const auto& gr : rules.rules()) {
    if (!observed.contains(gr.body)) continue;
    CHECK(r.memory.head(gr.body) == gr.head);
    CHECK(r.memory.score(gr.body).value_or(-1) > 0.0);
  }

  const auto r2 = train(data, v, cfg);
  CHECK(r2.memory.export_rules() == r.memory.export_rules());
  CHECK(r2.net == r.net);

  TrainConfig zero = cfg;
  zero.epochs = 0;
  CHECK_THROWS_AS(train(data, v, zero), ConfigError);
  CHECK_THROWS_AS(train(Dataset{}, v, cfg), ConfigError);
}

TEST_CASE("save and load a model directory") {
  const Sample s = chain({1, 2}, 3);
  Dataset data{RelationTable({"r0", "r1", "r2", "r3"}), {s, s}};
  const auto v = build_vocab(data, 3, false);
  auto cfg = small_config();
  const auto r = train(data, v, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "relrule_model_test";
  std::filesystem::remove_all(dir);
  save_model(dir, r.net, r.memory, cfg);
  for (const char* f : {"net.bin", "memory.json", "rules.json", "rules.tsv", "vocab.json", "config.txt"})
    CHECK(std::filesystem::exists(dir / f));
  const auto m = load_model(dir);
  CHECK(m.vocab == v);
  CHECK(m.net == r.net);
  CHECK(m.memory == r.memory);
  CHECK(config_entries(m.config) == config_entries(cfg));
  std::filesystem::remove_all(dir);
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "relrule/vocab.hpp"

namespace relrule {

/// Scoring constants of the rule store. Defaults are the published ones;
/// v_true / v_wrong are the optional simple-data bonuses.
struct ScoreParams {
  double v0 = 0.6;
  double v1 = 0.3;
  double v2 = -0.05;
  double v3 = -0.1;
  double v4 = -0.3;
  double vt_pos = 0.35;
  double vt_neg = -1.0;
  double epsilon = 0.003;
  double sigma = -1.2;
  double v_true = 0.5;
  double v_wrong = -0.2;
  bool simple_bonus = true;

  friend bool operator==(const ScoreParams&, const ScoreParams&) = default;
};

/// Throws ConfigError unless v0 > v1 > 0 > v2 > v3 > v4, sigma < 0,
/// epsilon > 0 and vt_neg < 0 < vt_pos.
void validate(const ScoreParams& p);

struct Rule {
  RelationId head = 0;
  Body body;

  friend auto operator<=>(const Rule&, const Rule&) = default;
};

struct ScoredRule {
  Rule rule;
  double score = 0.0;

  friend bool operator==(const ScoredRule&, const ScoredRule&) = default;
};

/// An action after head resolution: `delta` is the step value that was
/// added to the stored score.
struct ScoredAction {
  Body body;
  RelationId head = 0;
  double delta = 0.0;
  bool was_new = false;
};

enum class EpisodeOutcome { Hit, KnownMiss, Unresolved };

/// The dynamic rule store. D_rl maps a body to its head, D_rls maps the same
/// body to its score, and the free buffer holds unused invented relations.
///
/// Every invented id is either free or referenced by at least one stored
/// rule. All mutation happens on one thread; copies are cheap snapshots.
class RuleMemory {
 public:
  RuleMemory() = default;
  RuleMemory(RelationVocab vocab, ScoreParams params);

  const RelationVocab& vocab() const noexcept { return vocab_; }
  const ScoreParams& params() const noexcept { return params_; }

  std::optional<RelationId> head(const Body& body) const;
  std::optional<double> score(const Body& body) const;
  bool contains(const Body& body) const { return heads_.contains(body); }
  std::size_t size() const noexcept { return heads_.size(); }
  const std::map<Body, RelationId>& heads() const noexcept { return heads_; }
  const std::map<Body, double>& scores() const noexcept { return scores_; }
  const std::set<RelationId>& free_invented() const noexcept { return free_; }

  /// Looks the body up; an unknown body takes a random free invented head
  /// (recycling one first when the buffer is empty) and starts at score 0.
  /// The step value is then added to the stored score. Throws
  /// MemoryExhausted when no head is available.
  ScoredAction resolve_head(const Body& body, Rng& rng);

  /// step value for an action, from its novelty and relation classes.
  double score_case(const ScoredAction& action) const;

  /// Episode-end update of every traced action, keyed on the head r of the
  /// last action: r == target adds vt_pos, a known r != target overwrites
  /// with vt_neg, anything else leaves scores alone. An invented r is then
  /// rewritten to `target` throughout memory.
  EpisodeOutcome apply_episode_end(std::span<const ScoredAction> trace, RelationId target);

  /// Shrinks positive scores by (1 - epsilon), grows negative ones by (1 + epsilon).
  void decay_scores();

  /// Removes rules scoring below sigma, then cascades through every rule
  /// that mentions an invented head of a removed rule. Freed ids return to
  /// the buffer. Returns the removed rules in removal order.
  std::vector<ScoredRule> prune();

  /// When the buffer is empty, frees the invented head whose rule has the
  /// lowest score (ties: lowest id) together with every rule mentioning it.
  std::optional<RelationId> recycle_when_empty(std::span<const RelationId> pinned = {});

  /// Replaces the invented head of `last_body` by `target` in every head
  /// and body, merging colliding keys; no-op when that head is not invented.
  void backtrack_rewrite(const Body& last_body, RelationId target);

  /// Rules made only of non-invented relations scoring above `floor`,
  /// best first.
  std::vector<ScoredRule> export_rules(double floor = 0.0) const;

  /// Direct access for imports and tests. insert() claims invented ids it
  /// mentions from the free buffer.
  void insert(const Rule& rule, double score);
  void set_score(const Body& body, double score);
  void add_score(const Body& body, double delta);

  /// Throws InternalError if the table keys diverge or an invented id is
  /// both free and referenced, or neither.
  void check_invariants() const;

  nlohmann::json to_json() const;
  static RuleMemory from_json(const nlohmann::json& doc, const RelationVocab& vocab);

  friend bool operator==(const RuleMemory&, const RuleMemory&) = default;

 private:
  bool invented(RelationId r) const noexcept { return vocab_.is_invented(r); }
  bool mentions(const Body& b, RelationId r) const noexcept { return b.first == r || b.second == r; }
  std::vector<ScoredRule> remove_mentioning(RelationId r);
  void erase(const Body& body);
  void reclaim_unreferenced();

  RelationVocab vocab_;
  ScoreParams params_;
  std::map<Body, RelationId> heads_;
  std::map<Body, double> scores_;
  std::set<RelationId> free_;
};

/// {"format_version":1,"rules":[{"head":..,"body":[..,..],"score":..},...]}
nlohmann::json rules_to_json(std::span<const ScoredRule> rules, const RelationVocab& vocab);
std::vector<ScoredRule> rules_from_json(const nlohmann::json& doc, const RelationVocab& vocab);
/// head, body0, body1, score per tab-separated line.
void write_rules_tsv(std::ostream& out, std::span<const ScoredRule> rules, const RelationVocab& vocab);

}  // namespace relrule

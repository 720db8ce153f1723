// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "relrule/dataset.hpp"
#include "relrule/vocab.hpp"

namespace relrule {

struct GroundRule {
  RelationId head = 0;
  Body body;

  friend auto operator<=>(const GroundRule&, const GroundRule&) = default;
};

/// A functional rule set over known relations: each body has one head.
class GroundRuleSet {
 public:
  GroundRuleSet() = default;
  /// Throws GenerationError when two rules share a body.
  explicit GroundRuleSet(std::vector<GroundRule> rules);

  const std::vector<GroundRule>& rules() const noexcept { return rules_; }
  std::optional<RelationId> head_of(const Body& b) const;
  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }

 private:
  std::vector<GroundRule> rules_;
  std::map<Body, RelationId> by_body_;
};

struct GenConfig {
  int num_relations = 20;
  int num_rules = 20;
  std::pair<int, int> resolution_len_range{2, 3};
  double noise_rate = 0.0;
  int distractor_edges = 0;
  std::uint64_t seed = 0;
};

void validate(const GenConfig& cfg);

/// Relation names used by generated worlds: "r0", "r1", ...
RelationTable world_relations(int num_relations);

/// Samples a functional rule set in which every relation heads at least one
/// rule whenever num_rules >= num_relations, so derivations compose to any depth.
GroundRuleSet generate_rule_set(const GenConfig& cfg, Rng& rng);

/// Longest derivation (in leaves) achievable from any relation, capped at `cap`.
int max_derivation_length(const GroundRuleSet& rules, int num_relations, int cap);

/// Every relation derivable from `path` under some binary reduction order
/// (span dynamic programming). Empty when nothing is derivable.
std::set<RelationId> forward_chain_oracle(const GroundRuleSet& rules, std::span<const RelationId> path);

/// A generated sample plus its resolution path and the oracle's answer.
struct GeneratedSample {
  Sample sample;
  std::vector<RelationId> resolution_path;
  RelationId clean_target = 0;
  bool corrupted = false;
};

/// Builds a chain graph whose relation sequence derives a unique relation,
/// adds distractor edges that open no further query path, and corrupts the
/// target with probability cfg.noise_rate.
GeneratedSample generate_sample(const GroundRuleSet& rules, int target_len, const GenConfig& cfg, Rng& rng);

/// Generates `count` samples with lengths uniform over cfg.resolution_len_range.
std::vector<GeneratedSample> generate_samples(const GroundRuleSet& rules, int count, const GenConfig& cfg, Rng& rng);

/// {"format_version":1,"rules":[{"head":..,"body":[..,..]},...]}
void write_ground_rules(std::ostream& out, const GroundRuleSet& rules, const RelationTable& names);
GroundRuleSet read_ground_rules(std::istream& in, const RelationTable& names);
GroundRuleSet read_ground_rules(const std::filesystem::path& path, const RelationTable& names);

}  // namespace relrule

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relrule/dataset.hpp"
#include "relrule/mcts.hpp"
#include "relrule/net.hpp"
#include "relrule/rule_memory.hpp"
#include "relrule/trainer.hpp"
#include "relrule/worldgen.hpp"

namespace relrule {

struct PredictConfig {
  int max_paths = 16;
  int max_hops = 20;
  /// Greedy on the policy head instead of a search per step.
  bool policy_only = false;
  SearchConfig search;
};

PredictConfig predict_config(const TrainConfig& cfg);


/// Outcome of one greedy inference episode. `relation` is empty for an
/// INVALID prediction (no path, a body missing from memory, or an
/// invented final relation).
struct Prediction {
  std::optional<RelationId> relation;
  std::vector<RelationPath> paths;
  std::vector<Rule> applied;
  int final_path = -1;
};

/// Never mutates `memory`. `net` may be null, in which case the search
/// runs on uniform priors (policy_only then picks the lowest legal pair).
Prediction predict(const Sample& sample, const PolicyValueNet* net, const RuleMemory& memory,
                   const PredictConfig& cfg, Rng& rng);

struct HopStats {
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct Metrics {
  std::size_t samples = 0;
  std::size_t correct = 0;
  std::size_t invalid = 0;
  double accuracy = 0.0;
  double invalid_ratio = 0.0;
  std::optional<double> rule_recall;
  /// Keyed by resolution length (shortest hop count when unknown).
  std::map<int, HopStats> per_hop;
};

/// Fraction of ground rules whose (head, body) names appear among the
/// exported rules of `memory`.
double rule_recall(const RuleMemory& memory, const GroundRuleSet& ground, const RelationTable& ground_names);

/// Read-only evaluation. Each sample gets its own generator seeded from
/// `seed` and its index, so results do not depend on evaluation order.
Metrics evaluate(const std::vector<Sample>& samples, const PolicyValueNet* net, const RuleMemory& memory,
                 const PredictConfig& cfg, std::uint64_t seed, const GroundRuleSet* ground = nullptr,
                 const RelationTable* ground_names = nullptr);

/// accuracy,rule_recall,invalid_ratio,hop_k_acc... with a format_version column first.
void write_metrics_csv(std::ostream& out, const Metrics& m);
void print_metrics(std::ostream& out, const Metrics& m);

/// One applied rule with its entity span: (left -head-> right) <= (left -b0-> mid, mid -b1-> right).
struct DeductionStep {
  Rule rule;
  NodeId left = 0;
  NodeId mid = 0;
  NodeId right = 0;
};

struct DeductionTrace {
  RelationId prediction = 0;
  RelationPath path;
  std::vector<DeductionStep> steps;
};

/// Derives the trace of the path that resolved. Throws ExplainUnavailable
/// for an INVALID prediction.
DeductionTrace explain(const Prediction& prediction);

/// Replays `trace` on its original path using the rules of `memory`;
/// returns the relation it reduces to, or nullopt when some step does not
/// apply or a rule is not stored.
std::optional<RelationId> replay(const DeductionTrace& trace, const RuleMemory& memory);

std::vector<std::string> format_trace(const DeductionTrace& trace, const Sample& sample, const RelationVocab& vocab);

}  // namespace relrule

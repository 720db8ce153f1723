// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "relrule/env.hpp"
#include "relrule/net.hpp"
#include "relrule/rule_memory.hpp"

namespace relrule {

enum class SearchMode {
  /// Target known: terminal leaves score the true reward; every adjacent
  /// pair is a legal action.
  Train,
  /// Target unknown: only bodies present in memory are legal, known finals
  /// score known_final_value, invented finals 0, dead ends dead_end_value.
  Eval,
};

struct SearchConfig {
  SearchMode mode = SearchMode::Train;
  int simulations = 64;
  double c_puct = 1.5;
  double temperature = 1.0;
  bool root_noise = false;
  double dirichlet_alpha = 0.3;
  double noise_weight = 0.25;
  double known_final_value = 0.1;
  double dead_end_value = -1.0;
  /// Without the network priors are uniform and leaves are valued 0.
  bool use_network = true;
  bool extra_channels = false;
};

struct SearchResult {
  std::vector<Body> actions;
  std::vector<double> pi;
  std::vector<int> visits;
  double root_value = 0.0;
};

/// Legal actions of `state` under `mode`.
std::vector<Body> legal_actions(const EnvState& state, const RuleMemory& memory, SearchMode mode);

/// PUCT search from a non-terminal root. Never mutates the memory: a body
/// missing from memory resolves to a placeholder invented head.
SearchResult search(const EnvState& root, const PolicyValueNet* net, const RuleMemory& memory,
                    const SearchConfig& cfg, Rng& rng);

/// Search that keeps the subtree below the played action between calls, so
/// a greedy episode accumulates statistics instead of restarting each move.
/// Each run() adds cfg.simulations simulations to whatever was kept.
class SearchSession {
 public:
  SearchSession(const PolicyValueNet* net, const RuleMemory& memory, const SearchConfig& cfg);
  ~SearchSession();
  SearchSession(const SearchSession&) = delete;
  SearchSession& operator=(const SearchSession&) = delete;

  SearchResult run(const EnvState& root, Rng& rng);
  /// Re-roots at the child reached by `action`; the next run() must start
  /// from the state that action produced or the tree is discarded.
  void advance(const Body& action);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class SelectMode { Sample, Argmax };

/// Sample draws from pi; Argmax takes the largest pi, lowest pair on ties.
Body select_action(const SearchResult& result, SelectMode mode, Rng& rng);

/// Head a simulation assumes for `body`: the stored head, else a placeholder.
RelationId hypothetical_head(const RuleMemory& memory, const Body& body);

}  // namespace relrule

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relrule/dataset.hpp"
#include "relrule/env.hpp"
#include "relrule/mcts.hpp"
#include "relrule/net.hpp"
#include "relrule/rule_memory.hpp"

namespace relrule {

struct TrainConfig {
  int epochs = 10;
  double lr = 0.01;
  int max_paths = 16;
  int max_hops = 20;
  int invented = 50;
  bool use_dummy = false;
  ScoreParams score;
  int simulations = 64;
  double c_puct = 1.5;
  double temperature = 1.0;
  bool root_noise = true;
  double dirichlet_alpha = 0.3;
  double noise_weight = 0.25;
  double l2 = 1e-4;
  double clip_norm = 5.0;
  int hidden = 128;
  bool extra_channels = false;
  std::uint64_t seed = 0;
  std::size_t replay_capacity = 50000;
  std::size_t batch_size = 64;
  std::size_t warmup_episodes = 200;
  /// Off: the network is never trained and the search runs on uniform
  /// priors with zero leaf values.
  bool train_network = true;
  bool check_invariants = false;
};

/// Throws ConfigError when a field is out of range.
void validate(const TrainConfig& cfg);

/// Flat "key = value" form; '#' starts a comment.
std::map<std::string, std::string> config_entries(const TrainConfig& cfg);
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();
TrainConfig read_config(std::istream& in);
void write_config(std::ostream& out, const TrainConfig& cfg);

SearchConfig train_search_config(const TrainConfig& cfg);
SearchConfig eval_search_config(const TrainConfig& cfg);

/// Sample visiting order for one epoch. The first epoch (epoch == 0) runs
/// in ascending resolution length (shortest hop count when unknown), ties
/// in dataset order; later epochs shuffle the dataset order.
std::vector<std::size_t> curriculum_order(const std::vector<Sample>& samples, int epoch, Rng& rng);

struct EpisodeStep {
  StateTensor state;
  std::vector<Body> actions;
  std::vector<double> pi;
  ScoredAction action;
};

struct EpisodeTrace {
  std::vector<EpisodeStep> steps;
  std::optional<RelationId> final_relation;
  int z = 0;
  EpisodeOutcome outcome = EpisodeOutcome::Unresolved;
  /// Step budget exceeded or no invented relation available.
  bool aborted = false;
};

/// One training episode on `paths`, mutating `memory`: search, play, resolve
/// heads, then the episode-end update (with simple-data bonuses), rewrite,
/// decay and pruning. `net` may be null (uniform search).
EpisodeTrace run_episode(const Sample& sample, const PathSet& paths, const PolicyValueNet* net, RuleMemory& memory,
                         const TrainConfig& cfg, Rng& rng);

/// Simple-data bonus for a single-action episode: v_true on a hit; on a
/// conflict with an existing known head the step credit is replaced
/// by v_wrong. No-op when bonuses are disabled.
void apply_simple_bonus(const EpisodeTrace& trace, RelationId target, RuleMemory& memory);

/// Fixed-capacity ring of training tuples.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(TrainingExample ex);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const TrainingExample& operator[](std::size_t i) const { return items_[i]; }
  std::vector<TrainingExample> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<TrainingExample> items_;
};

struct EpochStats {
  int epoch = 0;
  std::size_t episodes = 0;
  std::size_t hits = 0;
  std::size_t known_misses = 0;
  std::size_t unresolved = 0;
  std::size_t aborted = 0;
  std::size_t skipped = 0;
  std::size_t train_steps = 0;
  double mean_loss = 0.0;
  std::size_t rules = 0;
  std::size_t exported_rules = 0;
};

struct TrainResult {
  PolicyValueNet net;
  RuleMemory memory;
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&, const PolicyValueNet&, const RuleMemory&)>;

/// Full training loop over `dataset`. `on_epoch` runs after every epoch
/// (and once more before a NumericError propagates).
TrainResult train(const Dataset& dataset, const RelationVocab& vocab, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Writes net.bin, memory.json, rules.json, rules.tsv, vocab.json and
/// config.txt into `dir`.
void save_model(const std::filesystem::path& dir, const PolicyValueNet& net, const RuleMemory& memory,
                const TrainConfig& cfg);

struct Model {
  RelationVocab vocab;
  RelationTable relations;
  PolicyValueNet net;
  RuleMemory memory;
  TrainConfig config;
};

Model load_model(const std::filesystem::path& dir);

void write_epoch_csv_header(std::ostream& out);
void write_epoch_csv_row(std::ostream& out, const EpochStats& s);

}  // namespace relrule

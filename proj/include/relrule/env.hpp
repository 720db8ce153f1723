// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "relrule/dataset.hpp"
#include "relrule/rule_memory.hpp"
#include "relrule/vocab.hpp"

namespace relrule {

/// Episode state: the current relation paths between the query nodes.
struct EnvState {
  std::vector<std::vector<RelationId>> paths;
  std::optional<RelationId> target;
  int steps = 0;
  int initial_length = 0;
  bool terminal = false;
  std::optional<RelationId> final_relation;
  int final_path = -1;
};

inline constexpr int kBaseChannels = 9;
inline constexpr int kExtraChannels = 2;

/// Feature channel order of a StateTensor cell.
enum Channel : int {
  kOccurrences = 0,
  kTopPosition = 1,
  kTopPositionCount = 2,
  kFirstKnown = 3,
  kSecondKnown = 4,
  kInMemory = 5,
  kBothKnown = 6,
  kHeadKnown = 7,
  kScore = 8,
  kMaxPerPath = 9,   // extra channels, off by default
  kMinPerPath = 10,
};

/// (m+n) x (m+n) x k feature block stored sparsely: only pairs adjacent in
/// some current path carry values, every other cell is zero.
class StateTensor {
 public:
  StateTensor() = default;
  StateTensor(int dim, int channels) : dim_(dim), channels_(channels) {}

  int dim() const noexcept { return dim_; }
  int channels() const noexcept { return channels_; }
  /// Flat pair indices (first * dim + second), ascending.
  const std::vector<int>& pairs() const noexcept { return pairs_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::span<const double> cell(std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(channels_), static_cast<std::size_t>(channels_)};
  }

  double at(RelationId first, RelationId second, int channel) const;
  /// Row-major (first, second, channel) dense copy.
  std::vector<double> dense() const;

  void append(int pair, std::span<const double> cell);

 private:
  int dim_ = 0;
  int channels_ = kBaseChannels;
  std::vector<int> pairs_;
  std::vector<double> values_;
};

/// Starts an episode. Length-1 paths get the dummy relation appended when
/// the vocabulary has one; otherwise they end the episode immediately.
/// Throws InvalidEpisode for an empty path set.
EnvState reset(const Sample& sample, const PathSet& paths, const RelationVocab& vocab);
EnvState reset(std::vector<std::vector<RelationId>> paths, std::optional<RelationId> target,
               const RelationVocab& vocab);

/// Ordered pairs adjacent in at least one current path, ascending.
std::vector<Body> valid_actions(const EnvState& state);

StateTensor featurize(const EnvState& state, const RuleMemory& memory, bool extra_channels = false);

/// Rewrites every non-overlapping left-to-right occurrence of the body in
/// every path to `head`. The first path to reach length 1 ends the episode.
EnvState step(const EnvState& state, const Body& body, RelationId head);
inline EnvState step(const EnvState& state, const ScoredAction& a) { return step(state, a.body, a.head); }

/// +1 for the target, 0 for an invented (or dummy) final, -1 for a wrong known one.
int terminal_reward(RelationId final_relation, RelationId target, const RelationVocab& vocab);

}  // namespace relrule

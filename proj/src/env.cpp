// SPDX-License-Identifier: Apache-2.0
#include "relrule/env.hpp"

#include <algorithm>
#include <map>

#include "relrule/errors.hpp"

namespace relrule {

double StateTensor::at(RelationId first, RelationId second, int channel) const {
  const int pair = first * dim_ + second;
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), pair);
  if (it == pairs_.end() || *it != pair) return 0.0;
  return cell(static_cast<std::size_t>(it - pairs_.begin()))[static_cast<std::size_t>(channel)];
}

std::vector<double> StateTensor::dense() const {
  std::vector<double> out(static_cast<std::size_t>(dim_) * dim_ * channels_, 0.0);
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    auto c = cell(i);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(pairs_[i]) * channels_);
  }
  return out;
}

void StateTensor::append(int pair, std::span<const double> c) {
  if (!pairs_.empty() && pair <= pairs_.back()) throw InternalError("state tensor cells must be appended in order");
  pairs_.push_back(pair);
  values_.insert(values_.end(), c.begin(), c.end());
}

namespace {

void check_termination(EnvState& s) {
  for (std::size_t i = 0; i < s.paths.size(); ++i) {
    if (s.paths[i].size() == 1) {
      s.terminal = true;
      s.final_relation = s.paths[i][0];
      s.final_path = static_cast<int>(i);
      return;
    }
  }
}

}  // namespace

EnvState reset(std::vector<std::vector<RelationId>> paths, std::optional<RelationId> target,
               const RelationVocab& vocab) {
  if (paths.empty()) throw InvalidEpisode("episode needs at least one path");
  EnvState s;
  s.target = target;
  for (auto& p : paths) {
    if (p.empty()) throw InvalidEpisode("empty relation path");
    for (RelationId r : p)
      if (!vocab.valid(r)) throw VocabError("path relation outside the vocabulary");
    if (p.size() == 1 && vocab.has_dummy()) p.push_back(*vocab.dummy());
    s.initial_length += static_cast<int>(p.size());
  }
  s.paths = std::move(paths);
  check_termination(s);
  return s;
}

EnvState reset(const Sample& sample, const PathSet& paths, const RelationVocab& vocab) {
  std::vector<std::vector<RelationId>> rel;
  rel.reserve(paths.size());
  for (const auto& p : paths.paths) rel.push_back(p.relations);
  return reset(std::move(rel), sample.target, vocab);
}

std::vector<Body> valid_actions(const EnvState& state) {
  if (state.terminal) throw InternalError("valid_actions on a terminal state");
  std::vector<Body> out;
  for (const auto& p : state.paths)
    for (std::size_t i = 0; i + 1 < p.size(); ++i) out.push_back({p[i], p[i + 1]});
  if (out.empty()) throw InternalError("non-terminal state without an adjacent pair");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

StateTensor featurize(const EnvState& state, const RuleMemory& memory, bool extra_channels) {
  const RelationVocab& vocab = memory.vocab();
  const int channels = kBaseChannels + (extra_channels ? kExtraChannels : 0);
  StateTensor t(vocab.total(), channels);
  if (state.terminal) return t;

  struct Stats {
    int total = 0;
    std::map<int, int> by_position;
    std::vector<int> per_path;
  };
  std::map<Body, Stats> stats;
  for (std::size_t pi = 0; pi < state.paths.size(); ++pi) {
    const auto& p = state.paths[pi];
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      auto& st = stats[{p[i], p[i + 1]}];
      st.total += 1;
      st.by_position[static_cast<int>(i)] += 1;
      st.per_path.resize(state.paths.size(), 0);
      st.per_path[pi] += 1;
    }
  }

  std::vector<double> cell(static_cast<std::size_t>(channels));
  auto not_invented = [&](RelationId r) { return vocab.is_invented(r) ? 0.0 : 1.0; };
  for (const auto& [body, st] : stats) {
    std::fill(cell.begin(), cell.end(), 0.0);
    int top = 0, top_count = 0;
    for (const auto& [pos, count] : st.by_position)
      if (count > top_count) {
        top = pos;
        top_count = count;
      }
    cell[kOccurrences] = st.total;
    cell[kTopPosition] = top;
    cell[kTopPositionCount] = top_count;
    cell[kFirstKnown] = not_invented(body.first);
    cell[kSecondKnown] = not_invented(body.second);
    cell[kBothKnown] = cell[kFirstKnown] * cell[kSecondKnown];
    if (auto h = memory.head(body)) {
      cell[kInMemory] = 1.0;
      cell[kHeadKnown] = not_invented(*h);
      cell[kScore] = *memory.score(body);
    }
    if (extra_channels) {
      cell[kMaxPerPath] = *std::max_element(st.per_path.begin(), st.per_path.end());
      cell[kMinPerPath] = *std::min_element(st.per_path.begin(), st.per_path.end());
    }
    t.append(vocab.pair_index(body), cell);
  }
  return t;
}

EnvState step(const EnvState& state, const Body& body, RelationId head) {
  if (state.terminal) throw IllegalAction("step on a terminal state");
  EnvState next = state;
  bool applied = false;
  for (auto& p : next.paths) {
    std::vector<RelationId> out;
    out.reserve(p.size());
    for (std::size_t i = 0; i < p.size();) {
      if (i + 1 < p.size() && p[i] == body.first && p[i + 1] == body.second) {
        out.push_back(head);
        i += 2;
        applied = true;
      } else {
        out.push_back(p[i]);
        i += 1;
      }
    }
    p = std::move(out);
  }
  if (!applied) throw IllegalAction("action body is not adjacent in any current path");
  next.steps += 1;
  check_termination(next);
  return next;
}

int terminal_reward(RelationId final_relation, RelationId target, const RelationVocab& vocab) {
  if (final_relation == target) return 1;
  if (vocab.is_known(final_relation)) return -1;
  return 0;
}

}  // namespace relrule

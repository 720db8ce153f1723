// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relrule {

using RelationId = std::int32_t;
using NodeId = std::int32_t;
using Rng = std::mt19937_64;

/// Ordered relation pair; the key of a rule.
struct Body {
  RelationId first = 0;
  RelationId second = 0;

  friend auto operator<=>(const Body&, const Body&) = default;
};

struct BodyHash {
  std::size_t operator()(const Body& b) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(b.first)) << 32) |
                                      static_cast<std::uint32_t>(b.second));
  }
};

/// Interns relation names observed in data. Ids are dense and first-seen.
class RelationTable {
 public:
  RelationTable() = default;
  explicit RelationTable(std::vector<std::string> names);

  /// Returns the id of `name`, adding it unless the table is frozen.
  /// Throws VocabError for an unseen name on a frozen table.
  RelationId intern(std::string_view name);
  std::optional<RelationId> find(std::string_view name) const;
  const std::string& name(RelationId id) const;
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, RelationId> ids_;
  bool frozen_ = false;
};

/// Known relations M occupy ids [0, m), invented relations N occupy
/// [m, m + n), and the optional dummy relation is the last id.
class RelationVocab {
 public:
  RelationVocab() = default;
  RelationVocab(std::vector<std::string> known_names, int invented, bool dummy);

  int known_count() const noexcept { return static_cast<int>(known_.size()); }
  int invented_count() const noexcept { return invented_; }
  bool has_dummy() const noexcept { return dummy_; }
  std::optional<RelationId> dummy() const noexcept;
  int total() const noexcept { return known_count() + invented_ + (dummy_ ? 1 : 0); }

  bool valid(RelationId r) const noexcept { return r >= 0 && r < total(); }
  bool is_known(RelationId r) const noexcept { return r >= 0 && r < known_count(); }
  bool is_invented(RelationId r) const noexcept {
    return r >= known_count() && r < known_count() + invented_;
  }
  bool is_dummy(RelationId r) const noexcept { return dummy_ && r == total() - 1; }

  RelationId invented(int index) const noexcept { return known_count() + index; }
  std::string name(RelationId r) const;
  std::optional<RelationId> find(std::string_view name) const;
  const std::vector<std::string>& known_names() const noexcept { return known_; }

  /// Flat action index of an ordered pair, in [0, total()^2).
  int pair_index(const Body& b) const noexcept { return b.first * total() + b.second; }
  Body pair_at(int index) const noexcept { return {index / total(), index % total()}; }

  friend bool operator==(const RelationVocab&, const RelationVocab&) = default;

 private:
  std::vector<std::string> known_;
  int invented_ = 0;
  bool dummy_ = false;
};

}  // namespace relrule

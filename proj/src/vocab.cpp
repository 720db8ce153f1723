// SPDX-License-Identifier: Apache-2.0
#include "relrule/vocab.hpp"

#include "relrule/errors.hpp"

namespace relrule {

RelationTable::RelationTable(std::vector<std::string> names) {
  for (auto& n : names) intern(n);
}

RelationId RelationTable::intern(std::string_view name) {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  if (frozen_) throw VocabError("unknown relation '" + std::string(name) + "'");
  const auto id = static_cast<RelationId>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<RelationId> RelationTable::find(std::string_view name) const {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  return std::nullopt;
}

const std::string& RelationTable::name(RelationId id) const {
  return names_.at(static_cast<std::size_t>(id));
}

RelationVocab::RelationVocab(std::vector<std::string> known_names, int invented, bool dummy)
    : known_(std::move(known_names)), invented_(invented), dummy_(dummy) {
  if (invented < 0) throw ConfigError("invented relation count must be non-negative");
}

std::optional<RelationId> RelationVocab::dummy() const noexcept {
  if (!dummy_) return std::nullopt;
  return total() - 1;
}

std::string RelationVocab::name(RelationId r) const {
  if (is_known(r)) return known_[static_cast<std::size_t>(r)];
  if (is_invented(r)) return "inv_" + std::to_string(r - known_count());
  if (is_dummy(r)) return "dummy";
  throw VocabError("relation id " + std::to_string(r) + " outside vocabulary");
}

std::optional<RelationId> RelationVocab::find(std::string_view name) const {
  for (std::size_t i = 0; i < known_.size(); ++i)
    if (known_[i] == name) return static_cast<RelationId>(i);
  if (name.starts_with("inv_")) {
    try {
      const int idx = std::stoi(std::string(name.substr(4)));
      if (idx >= 0 && idx < invented_) return invented(idx);
    } catch (const std::exception&) {
    }
    return std::nullopt;
  }
  if (name == "dummy" && dummy_) return dummy();
  return std::nullopt;
}

}  // namespace relrule

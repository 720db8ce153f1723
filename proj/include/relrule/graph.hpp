// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relrule/vocab.hpp"

namespace relrule {

struct Edge {
  NodeId source = 0;
  RelationId relation = 0;
  NodeId target = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed multigraph with named nodes. Edge relations are always known ids.
class RelGraph {
 public:
  NodeId intern_node(std::string_view name);
  std::optional<NodeId> find_node(std::string_view name) const;
  void add_edge(NodeId source, RelationId relation, NodeId target);

  std::size_t node_count() const noexcept { return names_.size(); }
  const std::string& node_name(NodeId n) const { return names_.at(static_cast<std::size_t>(n)); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// Indices into edges() leaving `n`, in insertion order.
  const std::vector<std::size_t>& out_edges(NodeId n) const { return out_.at(static_cast<std::size_t>(n)); }
  bool has_edge(NodeId source, RelationId relation, NodeId target) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> ids_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> out_;
};

/// A relation path between the query nodes; nodes.size() == relations.size() + 1.
struct RelationPath {
  std::vector<RelationId> relations;
  std::vector<NodeId> nodes;

  friend bool operator==(const RelationPath&, const RelationPath&) = default;
};

struct PathSet {
  std::vector<RelationPath> paths;
  /// True when every simple path within the hop cap was returned.
  bool exhaustive = true;

  bool empty() const noexcept { return paths.empty(); }
  std::size_t size() const noexcept { return paths.size(); }
};

/// Simple directed paths from `from` to `to` with at most `max_hops` edges.
/// Returns all of them when there are at most `max_paths`; otherwise
/// `max_paths` distinct paths drawn by seeded random walks with restart.
PathSet sample_paths(const RelGraph& graph, NodeId from, NodeId to, int max_paths, int max_hops, Rng& rng);

/// Counts simple paths up to `limit` (stops early once reached).
std::size_t count_simple_paths(const RelGraph& graph, NodeId from, NodeId to, int max_hops, std::size_t limit);

/// Breadth-first hop distance, or nullopt when `to` is unreachable.
std::optional<int> shortest_hops(const RelGraph& graph, NodeId from, NodeId to);

/// True when `path` is a walk over existing edges from `from` to `to`.
bool is_walk(const RelGraph& graph, const RelationPath& path, NodeId from, NodeId to);

}  // namespace relrule

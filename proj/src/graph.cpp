// SPDX-License-Identifier: Apache-2.0
#include "relrule/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "relrule/errors.hpp"

namespace relrule {

NodeId RelGraph::intern_node(std::string_view name) {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  const auto id = static_cast<NodeId>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  out_.emplace_back();
  return id;
}

std::optional<NodeId> RelGraph::find_node(std::string_view name) const {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  return std::nullopt;
}

void RelGraph::add_edge(NodeId source, RelationId relation, NodeId target) {
  const auto n = static_cast<NodeId>(names_.size());
  if (source < 0 || source >= n || target < 0 || target >= n)
    throw InternalError("edge references a node outside the graph");
  out_[static_cast<std::size_t>(source)].push_back(edges_.size());
  edges_.push_back({source, relation, target});
}

bool RelGraph::has_edge(NodeId source, RelationId relation, NodeId target) const {
  if (source < 0 || static_cast<std::size_t>(source) >= out_.size()) return false;
  return std::any_of(out_[static_cast<std::size_t>(source)].begin(), out_[static_cast<std::size_t>(source)].end(),
                     [&](std::size_t e) { return edges_[e].relation == relation && edges_[e].target == target; });
}

namespace {

// Nodes from which `to` is reachable; the DFS only descends into these.
std::vector<char> reaches_target(const RelGraph& g, NodeId to) {
  std::vector<std::vector<NodeId>> reverse(g.node_count());
  for (const auto& e : g.edges()) reverse[static_cast<std::size_t>(e.target)].push_back(e.source);
  std::vector<char> seen(g.node_count(), 0);
  std::deque<NodeId> queue{to};
  seen[static_cast<std::size_t>(to)] = 1;
  while (!queue.empty()) {
    const NodeId n = queue.front();
    queue.pop_front();
    for (NodeId p : reverse[static_cast<std::size_t>(n)])
      if (!seen[static_cast<std::size_t>(p)]) {
        seen[static_cast<std::size_t>(p)] = 1;
        queue.push_back(p);
      }
  }
  return seen;
}

struct Enumerator {
  const RelGraph& g;
  NodeId to;
  int max_hops;
  std::size_t limit;
  std::vector<char> useful;
  std::vector<char> on_path;
  RelationPath current;
  std::vector<RelationPath> found;

  void run(NodeId from) {
    if (!useful[static_cast<std::size_t>(from)]) return;
    current.nodes.push_back(from);
    on_path[static_cast<std::size_t>(from)] = 1;
    dfs(from);
  }

  void dfs(NodeId n) {
    for (std::size_t ei : g.out_edges(n)) {
      if (found.size() >= limit) return;
      const Edge& e = g.edges()[ei];
      const auto t = static_cast<std::size_t>(e.target);
      if (on_path[t] || !useful[t]) continue;
      current.relations.push_back(e.relation);
      current.nodes.push_back(e.target);
      if (e.target == to) {
        found.push_back(current);
      } else if (static_cast<int>(current.relations.size()) < max_hops) {
        on_path[t] = 1;
        dfs(e.target);
        on_path[t] = 0;
      }
      current.relations.pop_back();
      current.nodes.pop_back();
    }
  }
};

std::vector<RelationPath> enumerate(const RelGraph& g, NodeId from, NodeId to, int max_hops, std::size_t limit) {
  if (from == to) return {};
  Enumerator en{g, to, max_hops, limit, reaches_target(g, to), std::vector<char>(g.node_count(), 0), {}, {}};
  en.run(from);
  return std::move(en.found);
}

void check_query(const RelGraph& g, NodeId from, NodeId to) {
  const auto n = static_cast<NodeId>(g.node_count());
  if (from < 0 || from >= n || to < 0 || to >= n) throw InternalError("query node outside the graph");
}

}  // namespace

std::size_t count_simple_paths(const RelGraph& graph, NodeId from, NodeId to, int max_hops, std::size_t limit) {
  check_query(graph, from, to);
  return enumerate(graph, from, to, max_hops, limit).size();
}

PathSet sample_paths(const RelGraph& graph, NodeId from, NodeId to, int max_paths, int max_hops, Rng& rng) {
  if (max_paths < 1) throw ConfigError("max_paths must be at least 1");
  check_query(graph, from, to);
  const auto cap = static_cast<std::size_t>(max_paths);
  auto all = enumerate(graph, from, to, max_hops, cap + 1);
  if (all.size() <= cap) return {std::move(all), true};

  // Random walks with restart; each walk avoids revisiting nodes.
  const auto useful = reaches_target(graph, to);
  auto key = [](const RelationPath& p) { return std::make_pair(p.nodes, p.relations); };
  std::set<std::pair<std::vector<NodeId>, std::vector<RelationId>>> seen;
  PathSet out;
  out.exhaustive = false;
  std::vector<char> on_path(graph.node_count(), 0);
  std::vector<std::size_t> choices;
  const std::size_t max_walks = 64 * cap;
  for (std::size_t walk = 0; walk < max_walks && out.paths.size() < cap; ++walk) {
    RelationPath p;
    p.nodes.push_back(from);
    std::fill(on_path.begin(), on_path.end(), 0);
    on_path[static_cast<std::size_t>(from)] = 1;
    NodeId at = from;
    while (static_cast<int>(p.relations.size()) < max_hops) {
      choices.clear();
      for (std::size_t ei : graph.out_edges(at)) {
        const auto t = static_cast<std::size_t>(graph.edges()[ei].target);
        if (!on_path[t] && useful[t]) choices.push_back(ei);
      }
      if (choices.empty()) break;
      const Edge& e = graph.edges()[choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)]];
      p.relations.push_back(e.relation);
      p.nodes.push_back(e.target);
      on_path[static_cast<std::size_t>(e.target)] = 1;
      at = e.target;
      if (at == to) break;
    }
    if (at != to) continue;
    if (seen.insert(key(p)).second) out.paths.push_back(std::move(p));
  }
  // Walks rarely fail to find enough paths; top up from the enumeration.
  for (std::size_t i = 0; i < all.size() && out.paths.size() < cap; ++i)
    if (seen.insert(key(all[i])).second) out.paths.push_back(all[i]);
  return out;
}

std::optional<int> shortest_hops(const RelGraph& graph, NodeId from, NodeId to) {
  check_query(graph, from, to);
  std::vector<int> dist(graph.node_count(), -1);
  std::deque<NodeId> queue{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!queue.empty()) {
    const NodeId n = queue.front();
    queue.pop_front();
    if (n == to) return dist[static_cast<std::size_t>(n)];
    for (std::size_t ei : graph.out_edges(n)) {
      const auto t = static_cast<std::size_t>(graph.edges()[ei].target);
      if (dist[t] < 0) {
        dist[t] = dist[static_cast<std::size_t>(n)] + 1;
        queue.push_back(graph.edges()[ei].target);
      }
    }
  }
  return std::nullopt;
}

bool is_walk(const RelGraph& graph, const RelationPath& path, NodeId from, NodeId to) {
  if (path.relations.empty() || path.nodes.size() != path.relations.size() + 1) return false;
  if (path.nodes.front() != from || path.nodes.back() != to) return false;
  for (std::size_t i = 0; i < path.relations.size(); ++i)
    if (!graph.has_edge(path.nodes[i], path.relations[i], path.nodes[i + 1])) return false;
  return true;
}

}  // namespace relrule

// SPDX-License-Identifier: Apache-2.0
#include "relrule/worldgen.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "relrule/errors.hpp"

namespace relrule {

using nlohmann::json;

GroundRuleSet::GroundRuleSet(std::vector<GroundRule> rules) : rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    auto [it, inserted] = by_body_.emplace(r.body, r.head);
    if (!inserted && it->second != r.head) throw GenerationError("rule set is not functional: body has two heads");
  }
}

std::optional<RelationId> GroundRuleSet::head_of(const Body& b) const {
  if (auto it = by_body_.find(b); it != by_body_.end()) return it->second;
  return std::nullopt;
}

void validate(const GenConfig& cfg) {
  if (cfg.num_relations < 1) throw ConfigError("num_relations must be positive");
  if (cfg.num_rules < 1) throw ConfigError("num_rules must be positive");
  if (static_cast<long long>(cfg.num_rules) > static_cast<long long>(cfg.num_relations) * cfg.num_relations)
    throw ConfigError("num_rules exceeds the number of distinct bodies");
  if (cfg.resolution_len_range.first < 2 || cfg.resolution_len_range.second < cfg.resolution_len_range.first)
    throw ConfigError("resolution length range must satisfy 2 <= min <= max");
  if (cfg.noise_rate < 0.0 || cfg.noise_rate >= 1.0) throw ConfigError("noise rate must lie in [0, 1)");
  if (cfg.distractor_edges < 0) throw ConfigError("distractor edge count must be non-negative");
}

RelationTable world_relations(int num_relations) {
  RelationTable t;
  for (int i = 0; i < num_relations; ++i) t.intern("r" + std::to_string(i));
  return t;
}

namespace {

// Longest derivation length (in leaves) per relation, capped.
std::vector<int> derivation_reach(const GroundRuleSet& rules, int num_relations, int cap) {
  std::vector<int> reach(static_cast<std::size_t>(num_relations), 1);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& r : rules.rules()) {
      const int len = std::min(cap, reach[static_cast<std::size_t>(r.body.first)] +
                                        reach[static_cast<std::size_t>(r.body.second)]);
      auto& h = reach[static_cast<std::size_t>(r.head)];
      if (len > h) {
        h = len;
        changed = true;
      }
    }
  }
  return reach;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

struct Expander {
  const GroundRuleSet& rules;
  const std::vector<int>& reach;
  Rng& rng;

  std::vector<int> splits(const GroundRule& r, int len) const {
    std::vector<int> ks;
    for (int k = 1; k < len; ++k)
      if (reach[static_cast<std::size_t>(r.body.first)] >= k && reach[static_cast<std::size_t>(r.body.second)] >= len - k)
        ks.push_back(k);
    return ks;
  }

  void expand_rule(const GroundRule& r, int len, std::vector<RelationId>& out) {
    const int k = pick(splits(r, len), rng);
    expand(r.body.first, k, out);
    expand(r.body.second, len - k, out);
  }

  void expand(RelationId h, int len, std::vector<RelationId>& out) {
    if (len == 1) {
      out.push_back(h);
      return;
    }
    std::vector<GroundRule> options;
    for (const auto& r : rules.rules())
      if (r.head == h && !splits(r, len).empty()) options.push_back(r);
    if (options.empty()) throw GenerationError("no rule expands relation to the requested length");
    expand_rule(pick(options, rng), len, out);
  }
};

}  // namespace

int max_derivation_length(const GroundRuleSet& rules, int num_relations, int cap) {
  const auto reach = derivation_reach(rules, num_relations, cap);
  return reach.empty() ? 0 : *std::max_element(reach.begin(), reach.end());
}

GroundRuleSet generate_rule_set(const GenConfig& cfg, Rng& rng) {
  validate(cfg);
  const int nrel = cfg.num_relations;
  const int depth = cfg.resolution_len_range.second;
  std::vector<RelationId> all(static_cast<std::size_t>(nrel));
  std::iota(all.begin(), all.end(), 0);
  std::uniform_int_distribution<RelationId> any(0, nrel - 1);

  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<RelationId> heads;
    std::vector<RelationId> perm = all;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < cfg.num_rules; ++i)
      heads.push_back(i < nrel ? perm[static_cast<std::size_t>(i)] : any(rng));

    std::set<Body> used;
    std::vector<GroundRule> rules;
    while (static_cast<int>(rules.size()) < cfg.num_rules) {
      const Body b{any(rng), any(rng)};
      if (!used.insert(b).second) continue;
      rules.push_back({heads[rules.size()], b});
    }
    GroundRuleSet set(std::move(rules));
    if (max_derivation_length(set, nrel, depth) >= depth) return set;
  }
  throw GenerationError("could not sample a rule set reaching the requested derivation depth");
}

std::set<RelationId> forward_chain_oracle(const GroundRuleSet& rules, std::span<const RelationId> path) {
  const std::size_t n = path.size();
  if (n == 0) return {};
  // span[i][len - 1] holds the relations derivable from path[i, i + len).
  std::vector<std::vector<std::set<RelationId>>> span(n, std::vector<std::set<RelationId>>(n));
  for (std::size_t i = 0; i < n; ++i) span[i][0].insert(path[i]);
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      auto& cell = span[i][len - 1];
      for (std::size_t left = 1; left < len; ++left) {
        for (RelationId a : span[i][left - 1])
          for (RelationId b : span[i + left][len - left - 1])
            if (auto h = rules.head_of({a, b})) cell.insert(*h);
      }
    }
  }
  return span[0][n - 1];
}

GeneratedSample generate_sample(const GroundRuleSet& rules, int target_len, const GenConfig& cfg, Rng& rng) {
  validate(cfg);
  if (target_len < cfg.resolution_len_range.first || target_len > cfg.resolution_len_range.second)
    throw ConfigError("target length outside the configured range");
  if (rules.empty()) throw GenerationError("empty rule set");
  const auto reach = derivation_reach(rules, cfg.num_relations, target_len);
  Expander ex{rules, reach, rng};

  std::vector<GroundRule> roots;
  for (const auto& r : rules.rules())
    if (!ex.splits(r, target_len).empty()) roots.push_back(r);
  if (roots.empty()) throw GenerationError("no rule realizes resolution length " + std::to_string(target_len));

  for (int attempt = 0; attempt < 1000; ++attempt) {
    const GroundRule& root = pick(roots, rng);
    std::vector<RelationId> path;
    ex.expand_rule(root, target_len, path);
    const auto derivable = forward_chain_oracle(rules, path);
    if (derivable.size() != 1) continue;  // ambiguous

    GeneratedSample g;
    g.resolution_path = path;
    g.clean_target = *derivable.begin();
    Sample& s = g.sample;
    std::vector<NodeId> chain;
    for (int i = 0; i <= target_len; ++i) chain.push_back(s.graph.intern_node("n" + std::to_string(i)));
    for (int i = 0; i < target_len; ++i)
      s.graph.add_edge(chain[static_cast<std::size_t>(i)], path[static_cast<std::size_t>(i)],
                       chain[static_cast<std::size_t>(i) + 1]);
    s.query_source = chain.front();
    s.query_target = chain.back();

    // Backward edges between chain nodes and edges to pendant nodes can
    // never open a second simple path between the query nodes.
    std::uniform_int_distribution<RelationId> any_rel(0, cfg.num_relations - 1);
    std::bernoulli_distribution coin(0.5);
    int pendant = 0;
    for (int d = 0; d < cfg.distractor_edges; ++d) {
      const auto nodes = static_cast<NodeId>(s.graph.node_count());
      const NodeId a = std::uniform_int_distribution<NodeId>(0, nodes - 1)(rng);
      const RelationId rel = any_rel(rng);
      if (coin(rng) && target_len >= 1) {
        const NodeId i = std::uniform_int_distribution<NodeId>(0, target_len - 1)(rng);
        const NodeId j = std::uniform_int_distribution<NodeId>(i + 1, target_len)(rng);
        s.graph.add_edge(chain[static_cast<std::size_t>(j)], rel, chain[static_cast<std::size_t>(i)]);
      } else {
        const NodeId fresh = s.graph.intern_node("d" + std::to_string(pendant++));
        if (coin(rng))
          s.graph.add_edge(a, rel, fresh);
        else
          s.graph.add_edge(fresh, rel, a);
      }
    }
    if (count_simple_paths(s.graph, s.query_source, s.query_target, target_len + cfg.distractor_edges + 1, 2) != 1)
      throw InternalError("distractor edges opened a second query path");

    s.target = g.clean_target;
    s.resolution_length = target_len;
    if (cfg.noise_rate > 0.0 && std::bernoulli_distribution(cfg.noise_rate)(rng) && cfg.num_relations > 1) {
      RelationId wrong = std::uniform_int_distribution<RelationId>(0, cfg.num_relations - 2)(rng);
      if (wrong >= g.clean_target) ++wrong;
      s.target = wrong;
      g.corrupted = true;
    }
    return g;
  }
  throw GenerationError("could not realize an unambiguous sample of length " + std::to_string(target_len));
}

std::vector<GeneratedSample> generate_samples(const GroundRuleSet& rules, int count, const GenConfig& cfg, Rng& rng) {
  std::vector<GeneratedSample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  std::uniform_int_distribution<int> len(cfg.resolution_len_range.first, cfg.resolution_len_range.second);
  for (int i = 0; i < count; ++i) out.push_back(generate_sample(rules, len(rng), cfg, rng));
  return out;
}

void write_ground_rules(std::ostream& out, const GroundRuleSet& rules, const RelationTable& names) {
  json doc;
  doc["format_version"] = 1;
  doc["rules"] = json::array();
  for (const auto& r : rules.rules())
    doc["rules"].push_back({{"head", names.name(r.head)},
                            {"body", {names.name(r.body.first), names.name(r.body.second)}}});
  out << doc.dump(2) << '\n';
}

GroundRuleSet read_ground_rules(std::istream& in, const RelationTable& names) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("malformed rules file: ") + e.what());
  }
  std::vector<GroundRule> rules;
  for (const auto& r : doc.at("rules")) {
    auto id = [&](const json& v) {
      auto found = names.find(v.get<std::string>());
      if (!found) throw VocabError("rules file names unknown relation '" + v.get<std::string>() + "'");
      return *found;
    };
    rules.push_back({id(r.at("head")), {id(r.at("body").at(0)), id(r.at("body").at(1))}});
  }
  return GroundRuleSet(std::move(rules));
}

GroundRuleSet read_ground_rules(const std::filesystem::path& path, const RelationTable& names) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_ground_rules(in, names);
}

}  // namespace relrule

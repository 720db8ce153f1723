// SPDX-License-Identifier: Apache-2.0
#include "relrule/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relrule/errors.hpp"

namespace relrule {

std::vector<Body> legal_actions(const EnvState& state, const RuleMemory& memory, SearchMode mode) {
  auto actions = valid_actions(state);
  if (mode == SearchMode::Eval)
    std::erase_if(actions, [&](const Body& b) { return !memory.contains(b); });
  return actions;
}

RelationId hypothetical_head(const RuleMemory& memory, const Body& body) {
  if (auto h = memory.head(body)) return *h;
  if (!memory.free_invented().empty()) return *memory.free_invented().begin();
  const auto& v = memory.vocab();
  if (v.invented_count() == 0) throw MemoryExhausted("vocabulary has no invented relations");
  return v.invented(v.invented_count() - 1);
}

namespace {

struct Node {
  EnvState state;
  std::vector<Body> actions;
  std::vector<double> prior;
  std::vector<int> visits;
  std::vector<double> value_sum;
  std::vector<int> child;
  int total_visits = 0;
  bool expanded = false;
  bool leaf_terminal = false;
  double terminal_value = 0.0;
};

class Tree {
 public:
  Tree(const PolicyValueNet* net, const RuleMemory& memory, const SearchConfig& cfg)
      : net_(net), memory_(memory), cfg_(cfg) {}

  std::vector<Node> nodes;

  int add(EnvState s) {
    Node n;
    n.state = std::move(s);
    classify(n);
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }

  // Sets actions and terminal status; leaves expansion to expand().
  void classify(Node& n) const {
    const auto& vocab = memory_.vocab();
    if (n.state.terminal) {
      n.leaf_terminal = true;
      const RelationId f = *n.state.final_relation;
      if (cfg_.mode == SearchMode::Train && n.state.target)
        n.terminal_value = terminal_reward(f, *n.state.target, vocab);
      else
        n.terminal_value = vocab.is_known(f) ? cfg_.known_final_value : 0.0;
      return;
    }
    n.actions = legal_actions(n.state, memory_, cfg_.mode);
    if (n.actions.empty()) {
      n.leaf_terminal = true;
      n.terminal_value = cfg_.dead_end_value;
    }
  }

  // Fills priors and returns the leaf value estimate.
  double expand(Node& n) const {
    const std::size_t k = n.actions.size();
    n.visits.assign(k, 0);
    n.value_sum.assign(k, 0.0);
    n.child.assign(k, -1);
    n.expanded = true;
    if (!cfg_.use_network || net_ == nullptr) {
      n.prior.assign(k, 1.0 / static_cast<double>(k));
      return 0.0;
    }
    const auto features = featurize(n.state, memory_, cfg_.extra_channels);
    auto eval = net_->evaluate(features, n.actions);
    n.prior = std::move(eval.priors);
    return eval.value;
  }

  std::size_t select(const Node& n) const {
    const double sqrt_total = std::sqrt(static_cast<double>(n.total_visits));
    std::size_t best = 0;
    double best_u = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n.actions.size(); ++a) {
      const double q = n.visits[a] > 0 ? n.value_sum[a] / n.visits[a] : 0.0;
      const double u = q + cfg_.c_puct * n.prior[a] * sqrt_total / (1.0 + n.visits[a]);
      if (u > best_u) {
        best_u = u;
        best = a;
      }
    }
    return best;
  }

  void simulate() {
    path_.clear();
    int at = 0;
    double value = 0.0;
    for (;;) {
      Node& n = nodes[static_cast<std::size_t>(at)];
      if (n.leaf_terminal) {
        value = n.terminal_value;
        break;
      }
      if (!n.expanded) {
        value = expand(n);
        break;
      }
      const std::size_t a = select(n);
      path_.emplace_back(at, a);
      if (n.child[a] < 0) {
        const Body body = n.actions[a];
        EnvState next = step(n.state, body, hypothetical_head(memory_, body));
        const int id = add(std::move(next));  // may reallocate `nodes`
        nodes[static_cast<std::size_t>(at)].child[a] = id;
      }
      at = nodes[static_cast<std::size_t>(at)].child[a];
    }
    for (const auto& [id, a] : path_) {
      Node& n = nodes[static_cast<std::size_t>(id)];
      n.visits[a] += 1;
      n.value_sum[a] += value;
      n.total_visits += 1;
    }
  }

 private:
  const PolicyValueNet* net_;
  const RuleMemory& memory_;
  const SearchConfig& cfg_;
  std::vector<std::pair<int, std::size_t>> path_;
};

void add_root_noise(Node& r, const SearchConfig& cfg, Rng& rng) {
  if (!cfg.root_noise || r.actions.size() < 2) return;
  std::gamma_distribution<double> gamma(cfg.dirichlet_alpha, 1.0);
  std::vector<double> noise(r.actions.size());
  double sum = 0.0;
  for (double& x : noise) sum += (x = gamma(rng));
  if (sum > 0.0)
    for (std::size_t a = 0; a < noise.size(); ++a)
      r.prior[a] = (1.0 - cfg.noise_weight) * r.prior[a] + cfg.noise_weight * noise[a] / sum;
}

SearchResult summarize(const Node& root_node, const SearchConfig& cfg) {
  SearchResult out;
  out.actions = root_node.actions;
  out.visits = root_node.visits;
  out.pi.assign(out.actions.size(), 0.0);
  if (cfg.temperature <= 1e-6) {
    const auto best = std::max_element(out.visits.begin(), out.visits.end()) - out.visits.begin();
    out.pi[static_cast<std::size_t>(best)] = 1.0;
  } else {
    const double inv_t = 1.0 / cfg.temperature;
    double z = 0.0;
    for (std::size_t a = 0; a < out.pi.size(); ++a) z += out.pi[a] = std::pow(static_cast<double>(out.visits[a]), inv_t);
    for (double& p : out.pi) p /= z;
  }
  double w = 0.0;
  for (double x : root_node.value_sum) w += x;
  out.root_value = root_node.total_visits > 0 ? w / root_node.total_visits : 0.0;
  return out;
}

void check_search_args(const EnvState& root, const SearchConfig& cfg) {
  if (root.terminal) throw InternalError("search from a terminal state");
  if (cfg.simulations < 1) throw ConfigError("search needs at least one simulation");
}

}  // namespace

SearchResult search(const EnvState& root, const PolicyValueNet* net, const RuleMemory& memory,
                    const SearchConfig& cfg, Rng& rng) {
  check_search_args(root, cfg);
  Tree tree(net, memory, cfg);
  tree.nodes.reserve(static_cast<std::size_t>(cfg.simulations) + 1);
  tree.add(root);
  Node& r = tree.nodes[0];
  if (r.leaf_terminal) throw InternalError("search root has no legal action");
  tree.expand(r);
  add_root_noise(r, cfg, rng);
  for (int s = 0; s < cfg.simulations; ++s) tree.simulate();
  return summarize(tree.nodes[0], cfg);
}

struct SearchSession::Impl {
  Impl(const PolicyValueNet* n, const RuleMemory& m, const SearchConfig& c) : cfg(c), tree(n, m, cfg) {}
  SearchConfig cfg;
  Tree tree;
};

SearchSession::SearchSession(const PolicyValueNet* net, const RuleMemory& memory, const SearchConfig& cfg)
    : impl_(std::make_unique<Impl>(net, memory, cfg)) {}

SearchSession::~SearchSession() = default;

SearchResult SearchSession::run(const EnvState& root, Rng& rng) {
  const SearchConfig& cfg = impl_->cfg;
  check_search_args(root, cfg);
  Tree& tree = impl_->tree;
  if (tree.nodes.empty() || tree.nodes[0].state.paths != root.paths) {
    tree.nodes.clear();
    tree.add(root);
  }
  Node& r = tree.nodes[0];
  if (r.leaf_terminal) throw InternalError("search root has no legal action");
  if (!r.expanded) tree.expand(r);
  add_root_noise(r, cfg, rng);
  for (int s = 0; s < cfg.simulations; ++s) tree.simulate();
  return summarize(tree.nodes[0], cfg);
}

void SearchSession::advance(const Body& action) {
  auto& nodes = impl_->tree.nodes;
  if (nodes.empty()) return;
  const Node& r = nodes[0];
  int keep = -1;
  if (r.expanded)
    for (std::size_t a = 0; a < r.actions.size(); ++a)
      if (r.actions[a] == action) keep = r.child[a];
  if (keep < 0) {
    nodes.clear();
    return;
  }
  // Copy the kept subtree breadth first, renumbering children.
  std::vector<Node> kept;
  std::vector<int> queue{keep};
  std::vector<int> remap(nodes.size(), -1);
  remap[static_cast<std::size_t>(keep)] = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    Node n = std::move(nodes[static_cast<std::size_t>(queue[q])]);
    for (int& c : n.child) {
      if (c < 0) continue;
      if (remap[static_cast<std::size_t>(c)] < 0) {
        remap[static_cast<std::size_t>(c)] = static_cast<int>(queue.size());
        queue.push_back(c);
      }
      c = remap[static_cast<std::size_t>(c)];
    }
    kept.push_back(std::move(n));
  }
  nodes = std::move(kept);
}

Body select_action(const SearchResult& result, SelectMode mode, Rng& rng) {
  if (result.actions.empty() || result.actions.size() != result.pi.size())
    throw InternalError("search result has no actions");
  if (mode == SelectMode::Sample) {
    std::discrete_distribution<std::size_t> dist(result.pi.begin(), result.pi.end());
    return result.actions[dist(rng)];
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < result.pi.size(); ++a)
    if (result.pi[a] > result.pi[best] || (result.pi[a] == result.pi[best] && result.actions[a] < result.actions[best]))
      best = a;
  return result.actions[best];
}

}  // namespace relrule

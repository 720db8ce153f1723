// SPDX-License-Identifier: Apache-2.0
#include "relrule/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <set>
#include <tuple>

#include "relrule/errors.hpp"

namespace relrule {

PredictConfig predict_config(const TrainConfig& cfg) {
  PredictConfig p;
  p.max_paths = cfg.max_paths;
  p.max_hops = cfg.max_hops;
  p.search = eval_search_config(cfg);
  return p;
}

namespace {

Body greedy_policy(const PolicyValueNet* net, const EnvState& state, const RuleMemory& memory,
                   const std::vector<Body>& legal, bool extra) {
  if (net == nullptr) return legal.front();
  const auto eval = net->evaluate(featurize(state, memory, extra), legal);
  std::size_t best = 0;
  for (std::size_t a = 1; a < legal.size(); ++a)
    if (eval.priors[a] > eval.priors[best]) best = a;
  return legal[best];
}

int hop_key(const Sample& s) {
  if (s.resolution_length) return *s.resolution_length;
  if (auto h = shortest_hops(s.graph, s.query_source, s.query_target)) return *h;
  return -1;
}

// A path element with the entity span it covers.
struct Span {
  RelationId relation;
  NodeId left;
  NodeId right;
};

std::vector<Span> spans_of(const RelationPath& path, const RelationVocab& vocab) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < path.relations.size(); ++i)
    out.push_back({path.relations[i], path.nodes[i], path.nodes[i + 1]});
  if (out.size() == 1 && vocab.has_dummy()) out.push_back({*vocab.dummy(), path.nodes.back(), path.nodes.back()});
  return out;
}

}  // namespace

Prediction predict(const Sample& sample, const PolicyValueNet* net, const RuleMemory& memory,
                   const PredictConfig& cfg, Rng& rng) {
  const RelationVocab& vocab = memory.vocab();
  Prediction out;
  if (sample.query_source == sample.query_target) return out;
  out.paths = sample_paths(sample.graph, sample.query_source, sample.query_target, cfg.max_paths, cfg.max_hops, rng)
                  .paths;
  if (out.paths.empty()) return out;

  EnvState state = reset(sample, PathSet{out.paths, true}, vocab);
  state.target.reset();
  const int budget = 2 * state.initial_length;
  SearchConfig scfg = cfg.search;
  scfg.mode = SearchMode::Eval;
  const PolicyValueNet* search_net = scfg.use_network ? net : nullptr;
  SearchSession session(search_net, memory, scfg);

  while (!state.terminal) {
    if (static_cast<int>(out.applied.size()) >= budget) return out;
    const auto legal = legal_actions(state, memory, SearchMode::Eval);
    if (legal.empty()) return out;
    Body body;
    if (cfg.policy_only) {
      body = greedy_policy(search_net, state, memory, legal, scfg.extra_channels);
    } else {
      body = select_action(session.run(state, rng), SelectMode::Argmax, rng);
      session.advance(body);
    }
    const RelationId head = *memory.head(body);
    out.applied.push_back({head, body});
    state = step(state, body, head);
  }
  out.final_path = state.final_path;
  if (vocab.is_known(*state.final_relation)) out.relation = state.final_relation;
  return out;
}

double rule_recall(const RuleMemory& memory, const GroundRuleSet& ground, const RelationTable& ground_names) {
  if (ground.empty()) return 1.0;
  const RelationVocab& vocab = memory.vocab();
  std::set<std::tuple<std::string, std::string, std::string>> learned;
  for (const auto& r : memory.export_rules())
    learned.emplace(vocab.name(r.rule.head), vocab.name(r.rule.body.first), vocab.name(r.rule.body.second));
  std::size_t hit = 0;
  for (const auto& g : ground.rules())
    if (learned.contains({ground_names.name(g.head), ground_names.name(g.body.first), ground_names.name(g.body.second)}))
      ++hit;
  return static_cast<double>(hit) / static_cast<double>(ground.size());
}

Metrics evaluate(const std::vector<Sample>& samples, const PolicyValueNet* net, const RuleMemory& memory,
                 const PredictConfig& cfg, std::uint64_t seed, const GroundRuleSet* ground,
                 const RelationTable* ground_names) {
  if (samples.empty()) throw ConfigError("evaluation set is empty");
  Metrics m;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    const Prediction p = predict(s, net, memory, cfg, rng);
    const bool ok = p.relation && s.target && *p.relation == *s.target;
    ++m.samples;
    if (!p.relation) ++m.invalid;
    if (ok) ++m.correct;
    auto& h = m.per_hop[hop_key(s)];
    ++h.total;
    if (ok) ++h.correct;
  }
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.samples);
  m.invalid_ratio = static_cast<double>(m.invalid) / static_cast<double>(m.samples);
  if (ground != nullptr) {
    if (ground_names == nullptr) throw ConfigError("ground rules need their relation names");
    m.rule_recall = rule_recall(memory, *ground, *ground_names);
  }
  return m;
}

void write_metrics_csv(std::ostream& out, const Metrics& m) {
  out << "format_version,accuracy,rule_recall,invalid_ratio";
  for (const auto& [hop, h] : m.per_hop) out << ",hop_" << hop << "_acc";
  out << '\n' << 1 << ',' << m.accuracy << ',';
  if (m.rule_recall) out << *m.rule_recall;
  out << ',' << m.invalid_ratio;
  for (const auto& [hop, h] : m.per_hop)
    out << ',' << (h.total ? static_cast<double>(h.correct) / static_cast<double>(h.total) : 0.0);
  out << '\n';
}

void print_metrics(std::ostream& out, const Metrics& m) {
  out << std::fixed << std::setprecision(4);
  out << "samples        " << m.samples << '\n';
  out << "accuracy       " << m.accuracy << '\n';
  out << "rule_recall    ";
  if (m.rule_recall)
    out << *m.rule_recall << '\n';
  else
    out << "n/a\n";
  out << "invalid_ratio  " << m.invalid_ratio << '\n';
  for (const auto& [hop, h] : m.per_hop)
    out << "hop " << std::setw(3) << hop << "      " << static_cast<double>(h.correct) / static_cast<double>(h.total)
        << "  (" << h.correct << '/' << h.total << ")\n";
  out << std::defaultfloat;
}

DeductionTrace explain(const Prediction& prediction) {
  if (!prediction.relation || prediction.final_path < 0)
    throw ExplainUnavailable("no known relation was predicted");
  DeductionTrace t;
  t.prediction = *prediction.relation;
  t.path = prediction.paths.at(static_cast<std::size_t>(prediction.final_path));
  // A single-edge path was padded with the dummy relation, which spans no entities.
  std::vector<Span> cur;
  for (std::size_t i = 0; i < t.path.relations.size(); ++i)
    cur.push_back({t.path.relations[i], t.path.nodes[i], t.path.nodes[i + 1]});
  const bool padded = cur.size() == 1 && !prediction.applied.empty() &&
                      prediction.applied.front().body.first == cur[0].relation;
  if (padded) cur.push_back({prediction.applied.front().body.second, cur[0].right, cur[0].right});

  for (const Rule& rule : prediction.applied) {
    std::vector<Span> next;
    for (std::size_t i = 0; i < cur.size();) {
      if (i + 1 < cur.size() && cur[i].relation == rule.body.first && cur[i + 1].relation == rule.body.second) {
        t.steps.push_back({rule, cur[i].left, cur[i].right, cur[i + 1].right});
        next.push_back({rule.head, cur[i].left, cur[i + 1].right});
        i += 2;
      } else {
        next.push_back(cur[i]);
        ++i;
      }
    }
    cur = std::move(next);
  }
  if (cur.size() != 1 || cur[0].relation != t.prediction)
    throw InternalError("deduction trace does not reduce to the prediction");
  return t;
}

std::optional<RelationId> replay(const DeductionTrace& trace, const RuleMemory& memory) {
  std::vector<Span> cur = spans_of(trace.path, memory.vocab());
  for (const auto& s : trace.steps) {
    if (memory.head(s.rule.body) != s.rule.head) return std::nullopt;
    auto it = std::find_if(cur.begin(), cur.end(), [&](const Span& x) { return x.left == s.left && x.right == s.mid; });
    if (it == cur.end() || it + 1 == cur.end()) return std::nullopt;
    auto nx = it + 1;
    if (it->relation != s.rule.body.first || nx->relation != s.rule.body.second || nx->left != s.mid ||
        nx->right != s.right)
      return std::nullopt;
    it->relation = s.rule.head;
    it->right = s.right;
    cur.erase(nx);
  }
  if (cur.size() != 1) return std::nullopt;
  return cur[0].relation;
}

std::vector<std::string> format_trace(const DeductionTrace& trace, const Sample& sample, const RelationVocab& vocab) {
  auto node = [&](NodeId n) { return sample.graph.node_name(n); };
  auto arrow = [&](NodeId a, RelationId r, NodeId b) {
    return node(a) + " -" + vocab.name(r) + "-> " + node(b);
  };
  std::vector<std::string> lines;
  for (const auto& s : trace.steps)
    lines.push_back("(" + arrow(s.left, s.rule.head, s.right) + ") <= (" + arrow(s.left, s.rule.body.first, s.mid) +
                    ", " + arrow(s.mid, s.rule.body.second, s.right) + ")");
  return lines;
}

}  // namespace relrule

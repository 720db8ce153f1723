// SPDX-License-Identifier: Apache-2.0
#include "relrule/rule_memory.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "relrule/errors.hpp"

namespace relrule {

using nlohmann::json;

void validate(const ScoreParams& p) {
  if (!(p.v0 > p.v1 && p.v1 > 0 && 0 > p.v2 && p.v2 > p.v3 && p.v3 > p.v4))
    throw ConfigError("score constants must satisfy v0 > v1 > 0 > v2 > v3 > v4");
  if (!(p.sigma < 0)) throw ConfigError("prune threshold sigma must be negative");
  if (!(p.epsilon > 0)) throw ConfigError("decay epsilon must be positive");
  if (!(p.vt_neg < 0 && 0 < p.vt_pos)) throw ConfigError("episode-end scores must satisfy vt_neg < 0 < vt_pos");
}

RuleMemory::RuleMemory(RelationVocab vocab, ScoreParams params) : vocab_(std::move(vocab)), params_(params) {
  validate(params_);
  for (int i = 0; i < vocab_.invented_count(); ++i) free_.insert(vocab_.invented(i));
}

std::optional<RelationId> RuleMemory::head(const Body& body) const {
  if (auto it = heads_.find(body); it != heads_.end()) return it->second;
  return std::nullopt;
}

std::optional<double> RuleMemory::score(const Body& body) const {
  if (auto it = scores_.find(body); it != scores_.end()) return it->second;
  return std::nullopt;
}

double RuleMemory::score_case(const ScoredAction& a) const {
  const bool body_invented = invented(a.body.first) || invented(a.body.second);
  if (a.was_new) return body_invented ? params_.v4 : params_.v3;
  if (invented(a.head)) return params_.v2;
  return body_invented ? params_.v1 : params_.v0;
}

ScoredAction RuleMemory::resolve_head(const Body& body, Rng& rng) {
  if (!vocab_.valid(body.first) || !vocab_.valid(body.second))
    throw IllegalAction("action body references a relation outside the vocabulary");
  ScoredAction a{body, 0, 0.0, false};
  if (auto h = head(body)) {
    a.head = *h;
  } else {
    // Recycling may free an id that this very body mentions (it can still
    // sit in a live path); such an id is a legal head draw.
    if (free_.empty()) recycle_when_empty();
    auto it = free_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(std::uniform_int_distribution<std::size_t>(0, free_.size() - 1)(rng)));
    a.head = *it;
    free_.erase(it);
    // The body's invented ids are referenced from now on.
    free_.erase(body.first);
    free_.erase(body.second);
    heads_[body] = a.head;
    scores_[body] = 0.0;
    a.was_new = true;
  }
  a.delta = score_case(a);
  scores_[body] += a.delta;
  return a;
}

EpisodeOutcome RuleMemory::apply_episode_end(std::span<const ScoredAction> trace, RelationId target) {
  if (trace.empty()) throw InternalError("episode trace is empty");
  const auto r = head(trace.back().body);
  if (!r) throw InternalError("last action body missing from rule memory");

  EpisodeOutcome outcome = EpisodeOutcome::Unresolved;
  if (*r == target)
    outcome = EpisodeOutcome::Hit;
  else if (vocab_.is_known(*r))
    outcome = EpisodeOutcome::KnownMiss;

  for (const auto& a : trace) {
    auto it = scores_.find(a.body);
    if (it == scores_.end()) continue;  // recycled during the episode
    if (outcome == EpisodeOutcome::Hit)
      it->second += params_.vt_pos;
    else if (outcome == EpisodeOutcome::KnownMiss)
      it->second = params_.vt_neg;
  }
  if (invented(*r)) backtrack_rewrite(trace.back().body, target);
  return outcome;
}

void RuleMemory::decay_scores() {
  for (auto& [body, s] : scores_) {
    if (s < 0)
      s *= 1.0 + params_.epsilon;
    else if (s > 0)
      s *= 1.0 - params_.epsilon;
  }
}

void RuleMemory::erase(const Body& body) {
  heads_.erase(body);
  scores_.erase(body);
}

std::vector<ScoredRule> RuleMemory::remove_mentioning(RelationId r) {
  std::vector<ScoredRule> removed;
  for (auto it = heads_.begin(); it != heads_.end();) {
    if (it->second == r || mentions(it->first, r)) {
      removed.push_back({{it->second, it->first}, scores_.at(it->first)});
      scores_.erase(it->first);
      it = heads_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

void RuleMemory::reclaim_unreferenced() {
  std::set<RelationId> referenced;
  for (const auto& [b, h] : heads_) {
    if (invented(h)) referenced.insert(h);
    if (invented(b.first)) referenced.insert(b.first);
    if (invented(b.second)) referenced.insert(b.second);
  }
  for (int i = 0; i < vocab_.invented_count(); ++i) {
    const RelationId u = vocab_.invented(i);
    if (!referenced.contains(u)) free_.insert(u);
  }
}

std::vector<ScoredRule> RuleMemory::prune() {
  std::vector<ScoredRule> removed;
  std::vector<RelationId> cascade;
  for (auto it = scores_.begin(); it != scores_.end();) {
    if (it->second < params_.sigma) {
      const RelationId h = heads_.at(it->first);
      removed.push_back({{h, it->first}, it->second});
      if (invented(h)) cascade.push_back(h);
      heads_.erase(it->first);
      it = scores_.erase(it);
    } else {
      ++it;
    }
  }
  std::set<RelationId> purged;
  while (!cascade.empty()) {
    const RelationId u = cascade.back();
    cascade.pop_back();
    if (!purged.insert(u).second) continue;
    for (auto& gone : remove_mentioning(u)) {
      if (invented(gone.rule.head) && !purged.contains(gone.rule.head)) cascade.push_back(gone.rule.head);
      removed.push_back(gone);
    }
  }
  reclaim_unreferenced();
  return removed;
}

std::optional<RelationId> RuleMemory::recycle_when_empty(std::span<const RelationId> pinned) {
  if (!free_.empty()) return std::nullopt;
  std::optional<RelationId> worst;
  double worst_score = 0.0;
  for (const auto& [b, h] : heads_) {
    if (!invented(h) || std::find(pinned.begin(), pinned.end(), h) != pinned.end()) continue;
    const double s = scores_.at(b);
    if (!worst || s < worst_score || (s == worst_score && h < *worst)) {
      worst = h;
      worst_score = s;
    }
  }
  if (!worst) throw MemoryExhausted("invented relation buffer empty and no invented-headed rule to recycle");
  remove_mentioning(*worst);
  reclaim_unreferenced();
  return worst;
}

void RuleMemory::backtrack_rewrite(const Body& last_body, RelationId target) {
  const auto found = head(last_body);
  if (!found) throw InternalError("rewrite: last action body missing from rule memory");
  const RelationId r = *found;
  if (!invented(r)) return;

  for (auto& [b, h] : heads_)
    if (h == r) h = target;

  std::vector<Body> keys;
  for (const auto& [b, h] : heads_)
    if (mentions(b, r)) keys.push_back(b);
  for (const Body& old : keys) {
    const Body key{old.first == r ? target : old.first, old.second == r ? target : old.second};
    const RelationId old_head = heads_.at(old);
    const double old_score = scores_.at(old);
    erase(old);
    auto existing = heads_.find(key);
    if (existing == heads_.end() || invented(existing->second)) {
      heads_[key] = old_head;
      scores_[key] = old_score;
    }
  }
  reclaim_unreferenced();
}

std::vector<ScoredRule> RuleMemory::export_rules(double floor) const {
  std::vector<ScoredRule> out;
  for (const auto& [b, h] : heads_) {
    if (invented(h) || invented(b.first) || invented(b.second)) continue;
    const double s = scores_.at(b);
    if (s > floor) out.push_back({{h, b}, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredRule& a, const ScoredRule& b) { return a.score > b.score; });
  return out;
}

void RuleMemory::insert(const Rule& rule, double score) {
  for (RelationId r : {rule.head, rule.body.first, rule.body.second})
    if (!vocab_.valid(r)) throw VocabError("rule references a relation outside the vocabulary");
  heads_[rule.body] = rule.head;
  scores_[rule.body] = score;
  for (RelationId r : {rule.head, rule.body.first, rule.body.second})
    if (invented(r)) free_.erase(r);
  reclaim_unreferenced();
}

void RuleMemory::set_score(const Body& body, double score) {
  auto it = scores_.find(body);
  if (it == scores_.end()) throw InternalError("score update for a body missing from rule memory");
  it->second = score;
}

void RuleMemory::add_score(const Body& body, double delta) {
  auto it = scores_.find(body);
  if (it == scores_.end()) throw InternalError("score update for a body missing from rule memory");
  it->second += delta;
}

void RuleMemory::check_invariants() const {
  if (heads_.size() != scores_.size()) throw InternalError("rule and score tables differ in size");
  auto b = scores_.begin();
  for (auto a = heads_.begin(); a != heads_.end(); ++a, ++b)
    if (a->first != b->first) throw InternalError("rule and score tables have different keys");
  std::set<RelationId> referenced;
  for (const auto& [b, h] : heads_)
    for (RelationId r : {h, b.first, b.second})
      if (invented(r)) referenced.insert(r);
  for (int i = 0; i < vocab_.invented_count(); ++i) {
    const RelationId u = vocab_.invented(i);
    const bool is_free = free_.contains(u);
    if (is_free == referenced.contains(u))
      throw InternalError("invented relation " + vocab_.name(u) + (is_free ? " is free but referenced" : " is lost"));
  }
  for (RelationId u : free_)
    if (!invented(u)) throw InternalError("free buffer holds a non-invented relation");
}

json RuleMemory::to_json() const {
  json doc;
  doc["format_version"] = 1;
  doc["params"] = {{"v0", params_.v0},         {"v1", params_.v1},
                   {"v2", params_.v2},         {"v3", params_.v3},
                   {"v4", params_.v4},         {"vt_pos", params_.vt_pos},
                   {"vt_neg", params_.vt_neg}, {"epsilon", params_.epsilon},
                   {"sigma", params_.sigma},   {"v_true", params_.v_true},
                   {"v_wrong", params_.v_wrong}, {"simple_bonus", params_.simple_bonus}};
  std::vector<ScoredRule> all;
  for (const auto& [b, h] : heads_) all.push_back({{h, b}, scores_.at(b)});
  doc["rules"] = rules_to_json(all, vocab_)["rules"];
  doc["free"] = json::array();
  for (RelationId u : free_) doc["free"].push_back(vocab_.name(u));
  return doc;
}

RuleMemory RuleMemory::from_json(const json& doc, const RelationVocab& vocab) {
  if (doc.value("format_version", 0) != 1) throw ParseError(1, "unsupported rule memory format_version");
  const auto& p = doc.at("params");
  ScoreParams params;
  params.v0 = p.at("v0");
  params.v1 = p.at("v1");
  params.v2 = p.at("v2");
  params.v3 = p.at("v3");
  params.v4 = p.at("v4");
  params.vt_pos = p.at("vt_pos");
  params.vt_neg = p.at("vt_neg");
  params.epsilon = p.at("epsilon");
  params.sigma = p.at("sigma");
  params.v_true = p.at("v_true");
  params.v_wrong = p.at("v_wrong");
  params.simple_bonus = p.at("simple_bonus");
  RuleMemory m(vocab, params);
  for (const auto& r : rules_from_json(doc, vocab)) {
    m.heads_[r.rule.body] = r.rule.head;
    m.scores_[r.rule.body] = r.score;
  }
  m.free_.clear();
  for (const auto& name : doc.at("free")) {
    auto id = vocab.find(name.get<std::string>());
    if (!id || !vocab.is_invented(*id)) throw VocabError("free buffer names a non-invented relation");
    m.free_.insert(*id);
  }
  m.check_invariants();
  return m;
}

json rules_to_json(std::span<const ScoredRule> rules, const RelationVocab& vocab) {
  json doc;
  doc["format_version"] = 1;
  doc["rules"] = json::array();
  for (const auto& r : rules)
    doc["rules"].push_back({{"head", vocab.name(r.rule.head)},
                            {"body", {vocab.name(r.rule.body.first), vocab.name(r.rule.body.second)}},
                            {"score", r.score}});
  return doc;
}

std::vector<ScoredRule> rules_from_json(const json& doc, const RelationVocab& vocab) {
  std::vector<ScoredRule> out;
  auto id = [&](const json& v) {
    const auto name = v.get<std::string>();
    auto found = vocab.find(name);
    if (!found) throw VocabError("rules file names unknown relation '" + name + "'");
    return *found;
  };
  for (const auto& r : doc.at("rules"))
    out.push_back({{id(r.at("head")), {id(r.at("body").at(0)), id(r.at("body").at(1))}}, r.value("score", 0.0)});
  return out;
}

void write_rules_tsv(std::ostream& out, std::span<const ScoredRule> rules, const RelationVocab& vocab) {
  out << "head\tbody0\tbody1\tscore\n";
  for (const auto& r : rules)
    out << vocab.name(r.rule.head) << '\t' << vocab.name(r.rule.body.first) << '\t'
        << vocab.name(r.rule.body.second) << '\t' << std::setprecision(17) << r.score << '\n';
}

}  // namespace relrule

// SPDX-License-Identifier: Apache-2.0
#include "relrule/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "relrule/errors.hpp"

namespace relrule {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("bad value for " + key + ": '" + value + "'");
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// One entry per config key: how to read it and how to print it.
struct Field {
  const char* key;
  void (*set)(TrainConfig&, const std::string&, const std::string&);
  std::string (*get)(const TrainConfig&);
};

#define RELRULE_INT_FIELD(name, member)                                                                 \
  Field {                                                                                               \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) {                              \
      c.member = parse_number<decltype(c.member)>(k, v);                                                \
    },                                                                                                  \
        [](const TrainConfig& c) { return std::to_string(c.member); }                                   \
  }
#define RELRULE_DOUBLE_FIELD(name, member)                                                              \
  Field {                                                                                               \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) {                              \
      c.member = parse_number<double>(k, v);                                                            \
    },                                                                                                  \
        [](const TrainConfig& c) { return format_double(c.member); }                                    \
  }
#define RELRULE_BOOL_FIELD(name, member)                                                                \
  Field {                                                                                               \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); }, \
        [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }                   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RELRULE_INT_FIELD("epochs", epochs),
      RELRULE_DOUBLE_FIELD("lr", lr),
      RELRULE_INT_FIELD("paths-max", max_paths),
      RELRULE_INT_FIELD("max-hops", max_hops),
      RELRULE_INT_FIELD("invented", invented),
      RELRULE_BOOL_FIELD("dummy", use_dummy),
      RELRULE_DOUBLE_FIELD("v0", score.v0),
      RELRULE_DOUBLE_FIELD("v1", score.v1),
      RELRULE_DOUBLE_FIELD("v2", score.v2),
      RELRULE_DOUBLE_FIELD("v3", score.v3),
      RELRULE_DOUBLE_FIELD("v4", score.v4),
      RELRULE_DOUBLE_FIELD("vt-pos", score.vt_pos),
      RELRULE_DOUBLE_FIELD("vt-neg", score.vt_neg),
      RELRULE_DOUBLE_FIELD("epsilon", score.epsilon),
      RELRULE_DOUBLE_FIELD("sigma", score.sigma),
      RELRULE_DOUBLE_FIELD("v-true", score.v_true),
      RELRULE_DOUBLE_FIELD("v-wrong", score.v_wrong),
      RELRULE_BOOL_FIELD("simple-bonus", score.simple_bonus),
      RELRULE_INT_FIELD("sims", simulations),
      RELRULE_DOUBLE_FIELD("c-puct", c_puct),
      RELRULE_DOUBLE_FIELD("temperature", temperature),
      RELRULE_BOOL_FIELD("root-noise", root_noise),
      RELRULE_DOUBLE_FIELD("dirichlet-alpha", dirichlet_alpha),
      RELRULE_DOUBLE_FIELD("noise-weight", noise_weight),
      RELRULE_DOUBLE_FIELD("l2", l2),
      RELRULE_DOUBLE_FIELD("clip-norm", clip_norm),
      RELRULE_INT_FIELD("hidden", hidden),
      RELRULE_BOOL_FIELD("extra-channels", extra_channels),
      RELRULE_INT_FIELD("seed", seed),
      RELRULE_INT_FIELD("replay-capacity", replay_capacity),
      RELRULE_INT_FIELD("batch-size", batch_size),
      RELRULE_INT_FIELD("warmup", warmup_episodes),
      RELRULE_BOOL_FIELD("train-network", train_network),
      RELRULE_BOOL_FIELD("check-invariants", check_invariants),
  };
  return table;
}

#undef RELRULE_INT_FIELD
#undef RELRULE_DOUBLE_FIELD
#undef RELRULE_BOOL_FIELD

int curriculum_key(const Sample& s) {
  if (s.resolution_length) return *s.resolution_length;
  if (auto h = shortest_hops(s.graph, s.query_source, s.query_target)) return *h;
  return std::numeric_limits<int>::max();
}

json vocab_to_json(const RelationVocab& v) {
  return {{"format_version", 1}, {"known", v.known_names()}, {"invented", v.invented_count()}, {"dummy", v.has_dummy()}};
}

RelationVocab vocab_from_json(const json& doc) {
  if (doc.value("format_version", 0) != 1) throw ParseError(1, "unsupported vocab format_version");
  return RelationVocab(doc.at("known").get<std::vector<std::string>>(), doc.at("invented").get<int>(),
                       doc.at("dummy").get<bool>());
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.max_paths < 1) throw ConfigError("paths-max must be at least 1");
  if (cfg.max_hops < 1) throw ConfigError("max-hops must be at least 1");
  if (cfg.invented < 1) throw ConfigError("invented must be at least 1");
  if (cfg.simulations < 1) throw ConfigError("sims must be at least 1");
  if (!(cfg.c_puct > 0.0)) throw ConfigError("c-puct must be positive");
  if (cfg.temperature < 0.0) throw ConfigError("temperature must be non-negative");
  if (cfg.l2 < 0.0) throw ConfigError("l2 must be non-negative");
  if (!(cfg.clip_norm > 0.0)) throw ConfigError("clip-norm must be positive");
  if (cfg.hidden < 1) throw ConfigError("hidden must be at least 1");
  if (cfg.replay_capacity < 1) throw ConfigError("replay-capacity must be at least 1");
  if (cfg.batch_size < 1) throw ConfigError("batch-size must be at least 1");
  if (cfg.noise_weight < 0.0 || cfg.noise_weight > 1.0) throw ConfigError("noise-weight must lie in [0, 1]");
  if (!(cfg.dirichlet_alpha > 0.0)) throw ConfigError("dirichlet-alpha must be positive");
  validate(cfg.score);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

std::map<std::string, std::string> config_entries(const TrainConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(cfg);
  return out;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig read_config(std::istream& in) {
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    try {
      set_config_value(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return cfg;
}

void write_config(std::ostream& out, const TrainConfig& cfg) {
  for (const auto& f : fields()) out << f.key << " = " << f.get(cfg) << '\n';
}

SearchConfig train_search_config(const TrainConfig& cfg) {
  SearchConfig s;
  s.mode = SearchMode::Train;
  s.simulations = cfg.simulations;
  s.c_puct = cfg.c_puct;
  s.temperature = cfg.temperature;
  s.root_noise = cfg.root_noise;
  s.dirichlet_alpha = cfg.dirichlet_alpha;
  s.noise_weight = cfg.noise_weight;
  s.use_network = cfg.train_network;
  s.extra_channels = cfg.extra_channels;
  return s;
}

SearchConfig eval_search_config(const TrainConfig& cfg) {
  SearchConfig s = train_search_config(cfg);
  s.mode = SearchMode::Eval;
  s.temperature = 0.0;
  s.root_noise = false;
  return s;
}

std::vector<std::size_t> curriculum_order(const std::vector<Sample>& samples, int epoch, Rng& rng) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (epoch == 0) {
    std::vector<int> keys(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) keys[i] = curriculum_key(samples[i]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  } else {
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

void apply_simple_bonus(const EpisodeTrace& trace, RelationId target, RuleMemory& memory) {
  if (!memory.params().simple_bonus) return;
  if (trace.steps.size() != 1) throw ContractViolation("simple-data bonus needs a single-action episode");
  const ScoredAction& a = trace.steps.front().action;
  if (!memory.contains(a.body)) return;
  const auto& p = memory.params();
  if (a.head == target) {
    memory.add_score(a.body, p.v_true);
  } else if (memory.vocab().is_known(a.head) && !a.was_new) {
    memory.add_score(a.body, p.v_wrong - a.delta);
  }
}

EpisodeTrace run_episode(const Sample& sample, const PathSet& paths, const PolicyValueNet* net, RuleMemory& memory,
                         const TrainConfig& cfg, Rng& rng) {
  if (!sample.target) throw InvalidEpisode("training sample has no target relation");
  const RelationVocab& vocab = memory.vocab();
  const RelationId y = *sample.target;
  EnvState state = reset(sample, paths, vocab);
  if (state.terminal) throw InvalidEpisode("sample is already resolved (single-edge path)");

  const SearchConfig scfg = train_search_config(cfg);
  const PolicyValueNet* search_net = cfg.train_network ? net : nullptr;
  const int budget = 2 * state.initial_length;

  EpisodeTrace trace;
  while (!state.terminal) {
    if (static_cast<int>(trace.steps.size()) >= budget) {
      trace.aborted = true;
      break;
    }
    EpisodeStep st;
    st.state = featurize(state, memory, cfg.extra_channels);
    auto result = search(state, search_net, memory, scfg, rng);
    const Body body = select_action(result, SelectMode::Sample, rng);
    try {
      st.action = memory.resolve_head(body, rng);
    } catch (const MemoryExhausted&) {
      trace.aborted = true;
      break;
    }
    st.actions = std::move(result.actions);
    st.pi = std::move(result.pi);
    state = step(state, st.action);
    trace.steps.push_back(std::move(st));
  }

  if (!trace.aborted) {
    trace.final_relation = state.final_relation;
    trace.z = terminal_reward(*state.final_relation, y, vocab);
    std::vector<ScoredAction> actions;
    actions.reserve(trace.steps.size());
    for (const auto& s : trace.steps) actions.push_back(s.action);

    const bool simple = trace.steps.size() == 1 && cfg.score.simple_bonus;
    const ScoredAction& last = actions.back();
    const bool simple_conflict = simple && last.head != y && vocab.is_known(last.head) && !last.was_new;
    if (simple_conflict) {
      trace.outcome = EpisodeOutcome::KnownMiss;
      apply_simple_bonus(trace, y, memory);
    } else {
      trace.outcome = memory.apply_episode_end(actions, y);
      if (simple && trace.outcome == EpisodeOutcome::Hit) apply_simple_bonus(trace, y, memory);
    }
  }
  memory.decay_scores();
  memory.prune();
  if (cfg.check_invariants) memory.check_invariants();
  return trace;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(TrainingExample ex) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(ex));
  } else {
    items_[next_] = std::move(ex);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<TrainingExample> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw InternalError("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<TrainingExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(items_[pick(rng)]);
  return out;
}

TrainResult train(const Dataset& dataset, const RelationVocab& vocab, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  validate(cfg);
  if (dataset.samples.empty()) throw ConfigError("training dataset is empty");

  Rng rng(cfg.seed);
  const NetArch arch{vocab.total(), cfg.extra_channels ? kBaseChannels + kExtraChannels : kBaseChannels, cfg.hidden,
                     cfg.hidden};
  TrainResult out{PolicyValueNet(arch, rng), RuleMemory(vocab, cfg.score), {}};

  // Paths are drawn once per sample so every epoch replays the same view.
  std::vector<PathSet> paths;
  paths.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples)
    paths.push_back(sample_paths(s.graph, s.query_source, s.query_target, cfg.max_paths, cfg.max_hops, rng));

  ReplayBuffer replay(cfg.replay_capacity);
  std::size_t episodes_total = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch + 1;
    double loss_sum = 0.0;
    for (std::size_t idx : curriculum_order(dataset.samples, epoch, rng)) {
      const Sample& sample = dataset.samples[idx];
      const PathSet& ps = paths[idx];
      const bool single_edge = std::any_of(ps.paths.begin(), ps.paths.end(),
                                           [](const RelationPath& p) { return p.relations.size() < 2; });
      if (!sample.target || ps.empty() || (single_edge && !vocab.has_dummy())) {
        ++stats.skipped;
        continue;
      }
      EpisodeTrace trace = run_episode(sample, ps, &out.net, out.memory, cfg, rng);
      ++stats.episodes;
      ++episodes_total;
      if (trace.aborted)
        ++stats.aborted;
      else if (trace.outcome == EpisodeOutcome::Hit)
        ++stats.hits;
      else if (trace.outcome == EpisodeOutcome::KnownMiss)
        ++stats.known_misses;
      else
        ++stats.unresolved;

      for (auto& st : trace.steps)
        replay.push({std::move(st.state), std::move(st.actions), std::move(st.pi), static_cast<double>(trace.z)});

      if (cfg.train_network && episodes_total > cfg.warmup_episodes && replay.size() >= cfg.batch_size) {
        const auto batch = replay.sample(cfg.batch_size, rng);
        try {
          loss_sum += out.net.train_step(batch, cfg.lr, cfg.l2, cfg.clip_norm);
        } catch (const NumericError&) {
          stats.rules = out.memory.size();
          if (on_epoch) on_epoch(stats, out.net, out.memory);
          throw;
        }
        ++stats.train_steps;
      }
    }
    if (epoch + 1 == cfg.epochs) out.memory.prune();
    stats.mean_loss = stats.train_steps > 0 ? loss_sum / static_cast<double>(stats.train_steps) : 0.0;
    stats.rules = out.memory.size();
    stats.exported_rules = out.memory.export_rules().size();
    out.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats, out.net, out.memory);
  }
  return out;
}

void save_model(const std::filesystem::path& dir, const PolicyValueNet& net, const RuleMemory& memory,
                const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  net.save(dir / "net.bin");
  auto write_text = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    f << text;
  };
  write_text("memory.json", memory.to_json().dump(1) + "\n");
  const auto rules = memory.export_rules();
  write_text("rules.json", rules_to_json(rules, memory.vocab()).dump(1) + "\n");
  std::ostringstream tsv;
  write_rules_tsv(tsv, rules, memory.vocab());
  write_text("rules.tsv", tsv.str());
  write_text("vocab.json", vocab_to_json(memory.vocab()).dump(1) + "\n");
  std::ostringstream conf;
  write_config(conf, cfg);
  write_text("config.txt", conf.str());
}

Model load_model(const std::filesystem::path& dir) {
  auto read_json = [&](const char* name) {
    std::ifstream f(dir / name);
    if (!f) throw Error("cannot read " + (dir / name).string());
    try {
      return json::parse(f);
    } catch (const json::exception& e) {
      throw ParseError(1, std::string(name) + ": " + e.what());
    }
  };
  Model m;
  m.vocab = vocab_from_json(read_json("vocab.json"));
  m.relations = RelationTable(m.vocab.known_names());
  m.relations.freeze();
  m.net = PolicyValueNet::load(dir / "net.bin");
  m.memory = RuleMemory::from_json(read_json("memory.json"), m.vocab);
  if (std::ifstream conf(dir / "config.txt"); conf) m.config = read_config(conf);
  if (m.net.arch().dim != m.vocab.total()) throw VocabError("network dimension does not match the vocabulary");
  return m;
}

void write_epoch_csv_header(std::ostream& out) {
  out << "epoch,episodes,hits,known_misses,unresolved,aborted,skipped,train_steps,mean_loss,rules,exported_rules\n";
}

void write_epoch_csv_row(std::ostream& out, const EpochStats& s) {
  out << s.epoch << ',' << s.episodes << ',' << s.hits << ',' << s.known_misses << ',' << s.unresolved << ','
      << s.aborted << ',' << s.skipped << ',' << s.train_steps << ',' << s.mean_loss << ',' << s.rules << ','
      << s.exported_rules << '\n';
}

}  // namespace relrule

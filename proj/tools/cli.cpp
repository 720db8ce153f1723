// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "relrule/dataset.hpp"
#include "relrule/errors.hpp"
#include "relrule/eval.hpp"
#include "relrule/trainer.hpp"
#include "relrule/worldgen.hpp"

namespace relrule::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : Error {
  using Error::Error;
};

// Relation names of a generated world, when the data directory carries them.
std::optional<RelationTable> world_table(const fs::path& data, DatasetFormat format) {
  if (format != DatasetFormat::GraphLogDir) return std::nullopt;
  std::ifstream f(data / "relations.json");
  if (!f) return std::nullopt;
  const json doc = json::parse(f);
  if (doc.value("format_version", 0) != 1) throw ParseError(1, "relations.json: unsupported format_version");
  RelationTable t(doc.at("relations").get<std::vector<std::string>>());
  t.freeze();
  return t;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::pair<int, int> parse_range(const std::string& flag, const std::string& v) {
  const auto colon = v.find(':');
  try {
    if (colon == std::string::npos) {
      const int x = std::stoi(v);
      return {x, x};
    }
    return {std::stoi(v.substr(0, colon)), std::stoi(v.substr(colon + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError(flag, "expects lo:hi, got '" + v + "'");
  }
}

struct GenArgs {
  GenConfig cfg;
  int test_min = 4;
  int test_max = 10;
  int train_count = 2000;
  int test_per_length = 100;
  std::string out;
};

void run_gen(const GenArgs& a, std::ostream& out) {
  GenConfig cfg = a.cfg;
  validate(cfg);
  if (a.test_min < 2 || a.test_max < a.test_min) throw ConfigError("bad test length range");
  Rng rng(cfg.seed);
  GenConfig rule_cfg = cfg;
  rule_cfg.resolution_len_range.second = std::max(cfg.resolution_len_range.second, a.test_max);
  const GroundRuleSet rules = generate_rule_set(rule_cfg, rng);
  const RelationTable names = world_relations(cfg.num_relations);

  Dataset train{names, {}};
  for (auto& g : generate_samples(rules, a.train_count, cfg, rng)) train.samples.push_back(std::move(g.sample));
  GenConfig test_cfg = cfg;
  test_cfg.noise_rate = 0.0;
  test_cfg.resolution_len_range = {a.test_min, a.test_max};
  Dataset test{names, {}};
  for (int len = a.test_min; len <= a.test_max; ++len)
    for (int i = 0; i < a.test_per_length; ++i) test.samples.push_back(generate_sample(rules, len, test_cfg, rng).sample);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ostringstream tr, te, gr;
  write_jsonl(tr, train);
  write_jsonl(te, test);
  write_ground_rules(gr, rules, names);
  write_file(dir / "train.jsonl", tr.str());
  write_file(dir / "test.jsonl", te.str());
  write_file(dir / "ground_rules.json", gr.str());
  write_file(dir / "relations.json", json{{"format_version", 1}, {"relations", names.names()}}.dump() + "\n");
  out << "wrote " << train.samples.size() << " train and " << test.samples.size() << " test samples, "
      << rules.size() << " ground rules to " << dir.string() << '\n';
}

struct TrainArgs {
  std::string data;
  std::string format = "jsonl";
  std::string config;
  std::string out = "model";
  std::map<std::string, std::string> overrides;
};

void run_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw Error("cannot read " + a.config);
    cfg = read_config(f);
  }
  for (const auto& [k, v] : a.overrides) set_config_value(cfg, k, v);
  validate(cfg);

  const DatasetFormat format = parse_format(a.format);
  const auto table = world_table(a.data, format);
  const Dataset data = load_dataset(a.data, format, table ? &*table : nullptr, "train");
  const RelationVocab vocab = build_vocab(data, cfg.invented, cfg.use_dummy);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ofstream csv(dir / "train_metrics.csv");
  if (!csv) throw Error("cannot write " + (dir / "train_metrics.csv").string());
  csv << "format_version=1\n";
  write_epoch_csv_header(csv);

  auto checkpoint = [&](const EpochStats& s, const PolicyValueNet& net, const RuleMemory& memory) {
    const fs::path ep = dir / ("epoch_" + std::to_string(s.epoch));
    fs::create_directories(ep);
    net.save(ep / "net.bin");
    write_file(ep / "rules.json", rules_to_json(memory.export_rules(), vocab).dump(1) + "\n");
    write_epoch_csv_row(csv, s);
    csv.flush();
    out << "epoch " << s.epoch << ": episodes " << s.episodes << ", hits " << s.hits << ", misses "
        << s.known_misses << ", unresolved " << s.unresolved << ", aborted " << s.aborted << ", rules "
        << s.rules << ", exported " << s.exported_rules << ", loss " << s.mean_loss << '\n';
  };
  const TrainResult result = train(data, vocab, cfg, checkpoint);
  save_model(dir, result.net, result.memory, cfg);
  out << "model written to " << dir.string() << '\n';
}

struct EvalArgs {
  std::string data;
  std::string format = "jsonl";
  std::string model;
  std::string rules;
  std::string csv;
  bool policy_only = false;
  int sims = 0;
  std::uint64_t seed = 0;
};

Dataset load_eval_data(const std::string& data, const std::string& fmt, const Model& m, const char* split) {
  const DatasetFormat format = parse_format(fmt);
  return load_dataset(data, format, &m.relations, split);
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  const Model m = load_model(a.model);
  const Dataset data = load_eval_data(a.data, a.format, m, "test");
  PredictConfig pc = predict_config(m.config);
  pc.policy_only = a.policy_only;
  if (a.sims > 0) pc.search.simulations = a.sims;

  std::optional<GroundRuleSet> ground;
  if (!a.rules.empty()) ground = read_ground_rules(fs::path(a.rules), m.relations);
  const Metrics metrics = evaluate(data.samples, &m.net, m.memory, pc, a.seed, ground ? &*ground : nullptr,
                                   ground ? &m.relations : nullptr);
  print_metrics(out, metrics);
  const fs::path csv = a.csv.empty() ? fs::path(a.model) / "eval_metrics.csv" : fs::path(a.csv);
  std::ostringstream os;
  write_metrics_csv(os, metrics);
  write_file(csv, os.str());
}

struct ExplainArgs {
  std::string data;
  std::string format = "jsonl";
  std::string model;
  std::size_t sample = 0;
  bool policy_only = false;
  std::uint64_t seed = 0;
};

void run_explain(const ExplainArgs& a, std::ostream& out) {
  const Model m = load_model(a.model);
  const Dataset data = load_eval_data(a.data, a.format, m, "test");
  if (a.sample >= data.samples.size())
    throw UsageError("--sample " + std::to_string(a.sample) + " is out of range (" +
                     std::to_string(data.samples.size()) + " samples)");
  PredictConfig pc = predict_config(m.config);
  pc.policy_only = a.policy_only;
  const Sample& s = data.samples[a.sample];
  Rng rng(a.seed);
  const Prediction p = predict(s, &m.net, m.memory, pc, rng);
  const DeductionTrace t = explain(p);
  if (replay(t, m.memory) != t.prediction) throw InternalError("deduction trace failed to replay");
  out << s.graph.node_name(s.query_source) << " -" << m.vocab.name(t.prediction) << "-> "
      << s.graph.node_name(s.query_target);
  if (s.target) out << "   (target " << m.vocab.name(*s.target) << ")";
  out << '\n';
  for (const auto& line : format_trace(t, s, m.vocab)) out << "  " << line << '\n';
}

struct ExportArgs {
  std::string model;
  std::string out;
  std::string format = "json";
  double floor = 0.0;
};

void run_export(const ExportArgs& a, std::ostream& out) {
  const Model m = load_model(a.model);
  const auto rules = m.memory.export_rules(a.floor);
  std::ostringstream os;
  if (a.format == "json")
    os << rules_to_json(rules, m.vocab).dump(1) << '\n';
  else if (a.format == "tsv")
    write_rules_tsv(os, rules, m.vocab);
  else
    throw UsageError("--format must be json or tsv");
  if (a.out.empty())
    out << os.str();
  else
    write_file(a.out, os.str());
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"relrule: learn chain rules from relational graphs and explain predictions"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic world");
  g->add_option("--relations", gen.cfg.num_relations, "number of known relations");
  g->add_option("--rules", gen.cfg.num_rules, "number of ground rules");
  g->add_option_function<std::string>(
       "--train-len", [&gen](const std::string& v) { gen.cfg.resolution_len_range = parse_range("--train-len", v); },
       "training resolution lengths lo:hi (default 2:3)");
  g->add_option_function<std::string>(
       "--test-len",
       [&gen](const std::string& v) { std::tie(gen.test_min, gen.test_max) = parse_range("--test-len", v); },
       "test resolution lengths lo:hi (default 4:10)");
  g->add_option("--train-n", gen.train_count, "training samples");
  g->add_option("--test-n", gen.test_per_length, "test samples per length");
  g->add_option("--noise", gen.cfg.noise_rate, "fraction of corrupted training targets");
  g->add_option("--distractors", gen.cfg.distractor_edges);
  g->add_option("--seed", gen.cfg.seed);
  g->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", tr.data, "training data")->required();
  t->add_option("--format", tr.format, "jsonl or graphlog-dir");
  t->add_option("--config", tr.config, "key = value config file");
  t->add_option("--out", tr.out, "model directory");
  for (const auto& key : config_keys())
    t->add_option_function<std::string>("--" + key, [&tr, key](const std::string& v) { tr.overrides[key] = v; },
                                        "config override");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a model");
  e->add_option("--data", ev.data)->required();
  e->add_option("--format", ev.format);
  e->add_option("--model", ev.model)->required();
  e->add_option("--rules", ev.rules, "ground rules JSON for recall");
  e->add_option("--csv", ev.csv, "metrics CSV path");
  e->add_flag("--policy-only", ev.policy_only);
  e->add_option("--sims", ev.sims);
  e->add_option("--seed", ev.seed);

  ExplainArgs ex;
  auto* x = app.add_subcommand("explain", "print the deduction steps for one sample");
  x->add_option("--data", ex.data)->required();
  x->add_option("--format", ex.format);
  x->add_option("--model", ex.model)->required();
  x->add_option("--sample", ex.sample);
  x->add_flag("--policy-only", ex.policy_only);
  x->add_option("--seed", ex.seed);

  ExportArgs xp;
  auto* r = app.add_subcommand("export-rules", "write the learned rules");
  r->add_option("--model", xp.model)->required();
  r->add_option("--out", xp.out);
  r->add_option("--format", xp.format);
  r->add_option("--floor", xp.floor);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok, out, err);
  } catch (const CLI::ParseError& pe) {
    err << "usage error: " << pe.what() << '\n' << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*g) run_gen(gen, out);
    else if (*t) run_train(tr, out);
    else if (*e) run_eval(ev, out);
    else if (*x) run_explain(ex, out);
    else if (*r) run_export(xp, out);
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << '\n';
    return 2;
  } catch (const std::exception& ex2) {
    err << "error: " << ex2.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace relrule::cli

// SPDX-License-Identifier: Apache-2.0
#include "relrule/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "relrule/errors.hpp"

namespace relrule {

using nlohmann::json;

DatasetFormat parse_format(const std::string& name) {
  if (name == "jsonl") return DatasetFormat::Jsonl;
  if (name == "graphlog-dir" || name == "graphlog") return DatasetFormat::GraphLogDir;
  throw ConfigError("unknown dataset format '" + name + "' (expected jsonl or graphlog-dir)");
}

namespace {

const std::string& as_name(const json& v, std::size_t line, const char* what) {
  if (!v.is_string()) throw ParseError(line, std::string(what) + " must be a string");
  return v.get_ref<const std::string&>();
}

Sample parse_sample(const json& rec, std::size_t line, RelationTable& relations) {
  if (!rec.is_object()) throw ParseError(line, "record is not a JSON object");
  const auto edges = rec.find("edges");
  const auto query = rec.find("query");
  if (edges == rec.end() || !edges->is_array()) throw ParseError(line, "missing 'edges' array");
  if (query == rec.end() || !query->is_array() || query->size() != 2)
    throw ParseError(line, "'query' must be a two-element array");

  Sample s;
  for (const auto& e : *edges) {
    if (!e.is_array() || e.size() != 3) throw ParseError(line, "edge must be [source, relation, target]");
    const NodeId src = s.graph.intern_node(as_name(e[0], line, "edge source"));
    const RelationId rel = relations.intern(as_name(e[1], line, "edge relation"));
    const NodeId dst = s.graph.intern_node(as_name(e[2], line, "edge target"));
    s.graph.add_edge(src, rel, dst);
  }
  s.query_source = s.graph.intern_node(as_name((*query)[0], line, "query source"));
  s.query_target = s.graph.intern_node(as_name((*query)[1], line, "query target"));
  if (s.query_source == s.query_target) throw ParseError(line, "query nodes must differ");
  if (auto t = rec.find("target"); t != rec.end() && !t->is_null())
    s.target = relations.intern(as_name(*t, line, "target"));
  if (auto r = rec.find("resolution_length"); r != rec.end() && !r->is_null()) {
    if (!r->is_number_integer()) throw ParseError(line, "'resolution_length' must be an integer");
    s.resolution_length = r->get<int>();
  }
  return s;
}

}  // namespace

Dataset load_dataset(std::istream& in, const RelationTable* frozen) {
  Dataset out;
  if (frozen) {
    out.relations = *frozen;
    out.relations.freeze();
  }
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    out.samples.push_back(parse_sample(rec, line, out.relations));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const RelationTable* frozen,
                     const std::string& split) {
  std::filesystem::path file = path;
  if (format == DatasetFormat::GraphLogDir) {
    if (!std::filesystem::is_directory(path)) throw ConfigError("not a world directory: " + path.string());
    file = path / (split + ".jsonl");
  }
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  return load_dataset(in, frozen);
}

void write_jsonl(std::ostream& out, const Dataset& dataset) {
  for (const auto& s : dataset.samples) {
    json rec;
    rec["edges"] = json::array();
    for (const auto& e : s.graph.edges())
      rec["edges"].push_back({s.graph.node_name(e.source), dataset.relations.name(e.relation),
                              s.graph.node_name(e.target)});
    rec["query"] = {s.graph.node_name(s.query_source), s.graph.node_name(s.query_target)};
    if (s.target) rec["target"] = dataset.relations.name(*s.target);
    if (s.resolution_length) rec["resolution_length"] = *s.resolution_length;
    out << rec.dump() << '\n';
  }
}

RelationVocab build_vocab(const Dataset& dataset, int invented, bool use_dummy) {
  if (dataset.samples.empty()) throw ConfigError("cannot build a vocabulary from an empty dataset");
  if (invented <= 0) throw ConfigError("number of invented relations must be positive");
  return RelationVocab(dataset.relations.names(), invented, use_dummy);
}

}  // namespace relrule

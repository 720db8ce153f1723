// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relrule/graph.hpp"
#include "relrule/vocab.hpp"

namespace relrule {

struct Sample {
  RelGraph graph;
  NodeId query_source = 0;
  NodeId query_target = 0;
  std::optional<RelationId> target;
  /// Number of edges on the derivation path, when the producer knows it.
  std::optional<int> resolution_length;
};

/// Samples plus the relation table their ids refer to.
struct Dataset {
  RelationTable relations;
  std::vector<Sample> samples;
};

enum class DatasetFormat { Jsonl, GraphLogDir };

DatasetFormat parse_format(const std::string& name);

/// Reads the canonical JSONL schema, one sample per line:
///   {"edges": [[src, rel, dst], ...], "query": [src, dst], "target": rel}
/// `target` and `resolution_length` are optional. When `frozen` is given,
/// relation ids are taken from it and unseen relations raise VocabError.
Dataset load_dataset(std::istream& in, const RelationTable* frozen = nullptr);

/// Loads a dataset from a file (jsonl) or a world directory (graphlog-dir).
/// For a world directory `split` selects train/valid/test.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const RelationTable* frozen = nullptr, const std::string& split = "train");

void write_jsonl(std::ostream& out, const Dataset& dataset);

/// m = relations observed in `dataset`, then `invented` ids, then the dummy.
RelationVocab build_vocab(const Dataset& dataset, int invented, bool use_dummy);

}  // namespace relrule

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "relrule");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = relrule::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"train", "--data", "x", "--no-such-flag"}).code == 2);
  CHECK(cli({"gen"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("gen, train, eval, explain, export-rules") {
  const fs::path root = fs::temp_directory_path() / "relrule_cli_test";
  fs::remove_all(root);
  const auto world = (root / "w").string(), model = (root / "m").string();

  auto r = cli({"gen", "--relations", "6", "--rules", "6", "--train-len", "2:3", "--test-len", "3:4", "--train-n",
                "120", "--test-n", "5", "--seed", "3", "--out", world});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"train.jsonl", "test.jsonl", "ground_rules.json", "relations.json"})
    CHECK(fs::exists(fs::path(world) / f));

  r = cli({"train", "--data", world, "--format", "graphlog-dir", "--out", model, "--epochs", "2", "--sims", "8",
           "--hidden", "16", "--seed", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(fs::path(model) / "epoch_1" / "net.bin"));
  CHECK(fs::exists(fs::path(model) / "epoch_2" / "rules.json"));
  CHECK(fs::exists(fs::path(model) / "train_metrics.csv"));

  r = cli({"eval", "--data", world, "--format", "graphlog-dir", "--model", model, "--rules",
           (fs::path(world) / "ground_rules.json").string(), "--sims", "8"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("accuracy") != std::string::npos);
  CHECK(r.out.find("rule_recall") != std::string::npos);
  CHECK(r.out.find("invalid_ratio") != std::string::npos);
  CHECK(fs::exists(fs::path(model) / "eval_metrics.csv"));

  r = cli({"explain", "--data", (fs::path(world) / "test.jsonl").string(), "--model", model, "--sample", "0"});
  CHECK((r.code == 0 || r.err.find("no known relation") != std::string::npos));
  if (r.code == 0) CHECK(r.out.find("<=") != std::string::npos);
  CHECK(cli({"explain", "--data", (fs::path(world) / "test.jsonl").string(), "--model", model, "--sample", "999"})
            .code == 2);

  r = cli({"export-rules", "--model", model, "--format", "tsv"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("head\tbody0\tbody1\tscore", 0) == 0);

  r = cli({"eval", "--data", (root / "missing.jsonl").string(), "--model", model});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  fs::remove_all(root);
}

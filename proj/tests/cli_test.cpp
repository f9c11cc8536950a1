#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(QU_CLI_PATH) + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

struct CliWorld {
  qutest::TempDir dir{"cli"};
  std::string data() const { return (dir.path / "data").string(); }
  std::string path(const std::string& rel) const { return (dir.path / rel).string(); }
};

}  // namespace

TEST_CASE("gen is deterministic and creates missing directories") {
  CliWorld w;
  std::string flags = " --seed 5 --queries 60 --products 50 --sessions 12";
  REQUIRE(run_cli("gen --out " + w.path("a/deep/dir") + flags) == 0);
  REQUIRE(run_cli("gen --out " + w.path("b") + flags) == 0);
  for (const char* f : {"catalog.jsonl", "queries.jsonl", "judgments.jsonl", "sessions.jsonl",
                        "gazetteer.brand.tsv"}) {
    CHECK(qutest::read_file(w.path("a/deep/dir/") + f) == qutest::read_file(w.path("b/") + f));
    CHECK(!qutest::read_file(w.path("b/") + f).empty());
  }
}

TEST_CASE("gen rejects bad configs with exit code 2") {
  CliWorld w;
  CHECK(run_cli("gen --out " + w.path("x") + " --queries 0") == 2);
}

TEST_CASE("train and eval are reproducible byte for byte") {
  CliWorld w;
  REQUIRE(run_cli("gen --out " + w.data() + " --seed 11 --queries 70 --products 60 --sessions 15") == 0);

  std::string train_flags = " --data " + w.data() + " --steps 60";
  REQUIRE(run_cli("train --out " + w.path("m1") + train_flags) == 0);
  REQUIRE(run_cli("train --out " + w.path("m2") + train_flags) == 0);
  CHECK(qutest::read_file(w.path("m1/metrics.json")) == qutest::read_file(w.path("m2/metrics.json")));
  CHECK(qutest::read_file(w.path("m1/ranker.json")) == qutest::read_file(w.path("m2/ranker.json")));
  CHECK(qutest::read_file(w.path("m1/weights.csv")) == qutest::read_file(w.path("m2/weights.csv")));

  REQUIRE(run_cli("eval --data " + w.data() + " --models " + w.path("m1") + " --out " +
                  w.path("e1") + " --segments") == 0);
  REQUIRE(run_cli("eval --data " + w.data() + " --models " + w.path("m1") + " --out " +
                  w.path("e2") + " --segments") == 0);
  CHECK(qutest::read_file(w.path("e1/metrics.json")) == qutest::read_file(w.path("e2/metrics.json")));
  CHECK(qutest::read_file(w.path("e1/segment_report.json")) ==
        qutest::read_file(w.path("e2/segment_report.json")));
  CHECK(qutest::read_file(w.path("e1/segment_report.csv")) ==
        qutest::read_file(w.path("e2/segment_report.csv")));

  // the overall row of the segment report equals the plain eval output
  auto metrics = nlohmann::json::parse(qutest::read_file(w.path("e1/metrics.json")));
  auto seg = nlohmann::json::parse(qutest::read_file(w.path("e1/segment_report.json")));
  CHECK(seg.at("overall").at("ndcg").get<double>() ==
        metrics.at("ndcg").at("purchase").get<double>());
  CHECK(seg.at("overall").at("irr").get<double>() == metrics.at("irr").get<double>());
  CHECK(seg.at("overall").at("queries").get<int>() == metrics.at("queries").get<int>());
}

TEST_CASE("a static schedule matches dynamic with alpha zero, bitwise") {
  CliWorld w;
  REQUIRE(run_cli("gen --out " + w.data() + " --seed 13 --queries 60 --products 50 --sessions 12") == 0);
  std::string base = " --data " + w.data() + " --steps 50";
  REQUIRE(run_cli("train --out " + w.path("stat") + base + " --scheduler static") == 0);
  REQUIRE(run_cli("train --out " + w.path("dyn0") + base +
                  " --scheduler dynamic --alpha 0 --every-n 10") == 0);
  CHECK(qutest::read_file(w.path("stat/metrics.json")) ==
        qutest::read_file(w.path("dyn0/metrics.json")));
  CHECK(qutest::read_file(w.path("stat/ranker.json")) ==
        qutest::read_file(w.path("dyn0/ranker.json")));
}

TEST_CASE("weight log rows are ordered by step under the dynamic scheduler") {
  CliWorld w;
  REQUIRE(run_cli("gen --out " + w.data() + " --seed 17 --queries 60 --products 50 --sessions 12") == 0);
  REQUIRE(run_cli("train --out " + w.path("dyn") + " --data " + w.data() +
                  " --steps 60 --scheduler dynamic --alpha 10 --every-n 15") == 0);
  std::string csv = qutest::read_file(w.path("dyn/weights.csv"));
  REQUIRE(csv.rfind("step,task,segment,weight\n", 0) == 0);
  int last = -1;
  size_t pos = csv.find('\n') + 1;
  int rows = 0;
  while (pos < csv.size()) {
    int step = std::atoi(csv.c_str() + pos);
    CHECK(step >= last);
    last = step;
    ++rows;
    size_t next = csv.find('\n', pos);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  CHECK(rows > 0);
}

TEST_CASE("config files feed defaults and flags override them") {
  CliWorld w;
  REQUIRE(run_cli("gen --out " + w.data() + " --seed 31 --queries 50 --products 40 --sessions 10") == 0);

  qutest::write_file(w.path("run.json"),
                     R"({"scheduler": "dynamic", "alpha": 10.0, "every_n": 15, "rank_steps": 40})");
  // config alone: dynamic scheduling with updates -> more than one logged step
  REQUIRE(run_cli("train --config " + w.path("run.json") + " --data " + w.data() + " --out " +
                  w.path("cfg_dyn")) == 0);
  std::string csv = qutest::read_file(w.path("cfg_dyn/weights.csv"));
  CHECK(csv.find("\n15,") != std::string::npos);

  // a flag overrides the config: alpha 0 disables the scheduler entirely
  REQUIRE(run_cli("train --config " + w.path("run.json") + " --data " + w.data() + " --out " +
                  w.path("cfg_off") + " --alpha 0") == 0);
  std::string csv_off = qutest::read_file(w.path("cfg_off/weights.csv"));
  CHECK(csv_off == "step,task,segment,weight\n");

  // invalid config file -> exit code 2
  qutest::write_file(w.path("bad.json"), "{not json");
  CHECK(run_cli("train --config " + w.path("bad.json") + " --data " + w.data() + " --out " +
                w.path("x")) == 2);
  qutest::write_file(w.path("bad2.json"), R"({"scheduler": "sometimes"})");
  CHECK(run_cli("train --config " + w.path("bad2.json") + " --data " + w.data() + " --out " +
                w.path("x")) == 2);
}

TEST_CASE("missing inputs exit with code 3") {
  CliWorld w;
  CHECK(run_cli("train --data " + w.path("nowhere") + " --out " + w.path("m")) == 3);
  REQUIRE(run_cli("gen --out " + w.data() + " --seed 3 --queries 40 --products 30 --sessions 8") == 0);
  CHECK(run_cli("eval --data " + w.data() + " --models " + w.path("missing_models") + " --out " +
                w.path("e")) == 3);
}

TEST_CASE("secondary subcommands produce their artifacts") {
  CliWorld w;
  REQUIRE(run_cli("gen --out " + w.data() + " --seed 23 --queries 50 --products 40 --sessions 10") == 0);
  REQUIRE(run_cli("train --data " + w.data() + " --out " + w.path("m") + " --steps 40") == 0);
  CHECK(run_cli("parse --data " + w.data() + " --model " + w.path("m/ner.json") + " --out " +
                w.path("parsed.jsonl")) == 0);
  CHECK(run_cli("intent --data " + w.data() + " --model " + w.path("m/intent.json") + " --out " +
                w.path("intents.jsonl")) == 0);
  CHECK(run_cli("csu --data " + w.data() + " --models " + w.path("m") + " --out " +
                w.path("csu.jsonl")) == 0);
  CHECK(run_cli("featurize --data " + w.data() + " --models " + w.path("m") + " --out " +
                w.path("features.jsonl")) == 0);
  CHECK(run_cli("report --data " + w.data() + " --models " + w.path("m") + " --out " +
                w.path("rep")) == 0);
  CHECK(!qutest::read_file(w.path("parsed.jsonl")).empty());
  CHECK(!qutest::read_file(w.path("intents.jsonl")).empty());
  CHECK(!qutest::read_file(w.path("csu.jsonl")).empty());
  CHECK(!qutest::read_file(w.path("features.jsonl")).empty());
  CHECK(!qutest::read_file(w.path("rep/segment_report.csv")).empty());
}

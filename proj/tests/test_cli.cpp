#include <doctest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "json.hpp"
#include "kurel/dataset_io.hpp"
#include "kurel/eval.hpp"
#include "support.hpp"

using namespace kurel;
using kurel::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;
};

RunResult cli(const std::string& args) {
  std::string cmd = std::string("\"") + KUREL_CLI_PATH + "\" " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void require_ok(const RunResult& r) {
  INFO(r.output);
  REQUIRE(r.status == 0);
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli("").status != 0);
  CHECK(cli("bogus").status != 0);
  CHECK(cli("ingest --posts /nonexistent --links /nonexistent --out /tmp/x").status != 0);
  CHECK(cli("--help").status == 0);
}

TEST_CASE("gradient check command") {
  auto r = cli("bilstm gradcheck --dim 6 --hidden 5 --coordinates 100 --seed 3");
  require_ok(r);
  CHECK(r.output.find("max relative error") != std::string::npos);
}

TEST_CASE("stage by stage") {
  TempDir dir;
  auto dump = kurel::testing::write_synthetic_dump(dir.path(), 8);
  const auto d = dir.path();

  require_ok(cli("ingest --posts " + q(dump.posts) + " --links " + q(dump.links) + " --tag JAVA --out " + q(d / "net")));
  CHECK(io::read_units(d / "net" / "kus.jsonl").size() == dump.java_questions);

  require_ok(cli("pairs --net " + q(d / "net") + " --seed 4 --out " + q(d / "pairs")));
  auto split = io::read_split(d / "pairs");
  CHECK_FALSE(split.train.empty());
  auto manifest = json::parse(read_file(d / "pairs" / "manifest.json"));
  CHECK(manifest.is_object());

  require_ok(cli("pairs --net " + q(d / "net") + " --seed 4 --out " + q(d / "pairs2")));
  CHECK(read_file(d / "pairs2" / "test.pairs.jsonl") == read_file(d / "pairs" / "test.pairs.jsonl"));

  require_ok(cli("clean --in " + q(d / "net" / "kus.jsonl") + " --workers 2 --out " + q(d / "clean.jsonl")));
  CHECK(io::read_clean(d / "clean.jsonl").size() == dump.java_questions);

  require_ok(cli("embed train --corpus " + q(d / "clean.jsonl") + " --dim 8 --min-count 1 --epochs 1 --out " +
                 q(d / "vecs.txt")));
  require_ok(cli("embed relmat --vectors " + q(d / "vecs.txt") + " --vocab " + q(d / "clean.jsonl") + " --out " +
                 q(d / "rel_corpus.bin")));
  require_ok(cli("embed relmat --levenshtein --vocab " + q(d / "clean.jsonl") + " --out " + q(d / "rel_lev.bin")));
  CHECK(cli("embed relmat --vocab " + q(d / "clean.jsonl") + " --out " + q(d / "none.bin")).status != 0);

  const std::string models = " --clean " + q(d / "clean.jsonl") + " --tfidf " + q(d / "tfidf.json") +
                             " --relmat-corpus " + q(d / "rel_corpus.bin") + " --relmat-lev " + q(d / "rel_lev.bin");
  require_ok(cli("features --pairs " + q(d / "pairs" / "train.pairs.jsonl") + " --fit-pairs " +
                 q(d / "pairs" / "train.pairs.jsonl") + models + " --out " + q(d / "train.feat.jsonl")));
  require_ok(cli("features --pairs " + q(d / "pairs" / "dev.pairs.jsonl") + models + " --out " + q(d / "dev.feat.jsonl")));
  require_ok(cli("features --pairs " + q(d / "pairs" / "test.pairs.jsonl") + models + " --out " + q(d / "test.feat.jsonl")));
  CHECK(io::read_features(d / "test.feat.jsonl").names.size() == 15);
  CHECK(cli("features --two-input --pairs " + q(d / "pairs" / "dev.pairs.jsonl") + models + " --out " +
            q(d / "x.feat.jsonl"))
            .status != 0);  // tf-idf was fitted for three parts

  require_ok(cli("svm train --train " + q(d / "train.feat.jsonl") + " --epochs 5 --out " + q(d / "svm.json")));
  require_ok(cli("svm predict --model " + q(d / "svm.json") + " --features " + q(d / "test.feat.jsonl") + " --out " +
                 q(d / "svm.pred")));
  CHECK(io::read_label_lines(d / "svm.pred").size() == split.test.size());
  auto ev = cli("eval --pred " + q(d / "svm.pred") + " --gold " + q(d / "pairs" / "test.pairs.jsonl") + " --out " +
                q(d / "eval.json"));
  require_ok(ev);
  auto metrics = json::parse(read_file(d / "eval.json"));
  CHECK(metrics["per_class_f"].size() == 4);
  CHECK(metrics["micro_f"].get<double>() == doctest::Approx(metrics["accuracy"].get<double>()));
  require_ok(cli("svm ablate-parts --train " + q(d / "train.feat.jsonl") + " --dev " + q(d / "dev.feat.jsonl") +
                 " --epochs 3 --out " + q(d / "parts.json")));
  CHECK(json::parse(read_file(d / "parts.json")).size() == 4);

  require_ok(cli("bilstm train --data " + q(d / "pairs") + " --clean " + q(d / "clean.jsonl") +
                 " --epochs 2 --embed-dim 8 --hidden 6 --dense 10 --lengths 6,12,20 --vocab-min-count 1 --out " +
                 q(d / "nn.bin")));
  require_ok(cli("bilstm predict --model " + q(d / "nn.bin") + " --pairs " + q(d / "pairs" / "test.pairs.jsonl") +
                 " --clean " + q(d / "clean.jsonl") + " --out " + q(d / "nn.pred")));
  CHECK(io::read_label_lines(d / "nn.pred").size() == split.test.size());

  require_ok(cli("dqd --in " + q(d / "pairs") + " --seed 2 --out " + q(d / "dqd")));
  auto dqd = io::read_dqd(d / "dqd" / "train.dqd.jsonl");
  std::size_t positives = 0;
  for (const auto& p : dqd) positives += p.duplicate;
  CHECK(2 * positives == dqd.size());

  require_ok(cli("export --pairs " + q(d / "pairs" / "test.pairs.jsonl") + " --clean " + q(d / "clean.jsonl") +
                 " --out " + q(d / "export.csv")));
  auto rows = eval::from_csv(read_file(d / "export.csv"));
  CHECK(rows.size() == split.test.size());
  require_ok(cli("export --jsonl --pairs " + q(d / "pairs" / "test.pairs.jsonl") + " --clean " + q(d / "clean.jsonl") +
                 " --out " + q(d / "export.jsonl")));
  CHECK(eval::from_jsonl(read_file(d / "export.jsonl")) == rows);
}

TEST_CASE("pipeline from a config file") {
  TempDir dir;
  kurel::testing::write_synthetic_dump(dir.path(), 9);
  write_file(dir / "config.json", R"({
    "version": 1, "seed": 5,
    "input": {"posts": "Posts.xml", "links": "PostLinks.xml", "tag": "java"},
    "out_dir": "run",
    "embeddings": {"dim": 8, "min_count": 1, "epochs": 1},
    "svm": {"epochs": 5},
    "bilstm": {"embed_dim": 8, "hidden": 6, "dense": 10, "epochs": 1, "lengths": [6, 12, 20], "vocab_min_count": 1}
  })");
  auto r = cli("pipeline --config " + q(dir / "config.json"));
  require_ok(r);
  auto report = json::parse(read_file(dir / "run" / "report.json"));
  CHECK(report["seed"] == 5);
  CHECK(report["svm"]["test"].contains("micro_f"));
  CHECK(report["bilstm"]["test"].contains("micro_f"));

  write_file(dir / "bad.json", R"({"version": 1})");
  CHECK(cli("pipeline --config " + q(dir / "bad.json")).status == 1);
}

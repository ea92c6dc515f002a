#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "coldstart/catalog.hpp"
#include "coldstart/cli.hpp"
#include "coldstart/harness.hpp"
#include "coldstart/scoring.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace coldstart;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "coldstart");
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path data_dir() {
  const char* env = std::getenv("COLDSTART_TEST_DATA");
  REQUIRE(env);
  return env;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<PerUserResult> without_timing(const std::filesystem::path& log) {
  auto results = read_run_log(log);
  for (auto& r : results) r.rerank_seconds = 0;
  return results;
}

// A small exported world shared by the tests in this file.
const std::filesystem::path& world_dir() {
  static testing::TempDir dir("cli_world");
  static bool made = false;
  if (!made) {
    testing::write_file(dir / "world.cfg",
                        "[world]\ncatalog_size = 1200\nuser_count = 60\nembed_dim = 16\nlatent_dim = 6\n"
                        "gt_per_user = 5\nexport_score_depth = 1000\n");
    const auto r = cli({"synth", "--config", (dir / "world.cfg").string(), "--out", (dir / "w").string()});
    REQUIRE(r.code == 0);
    made = true;
  }
  static const auto path = dir / "w";
  return path;
}

}  // namespace

TEST_CASE("run writes one log line per sampled user", "[cli]") {
  testing::TempDir out("cli_run");
  const auto r = cli({"run", "--world", world_dir().string(), "--n-users", "10", "--seeds", "42", "--out",
                      out.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("CE Rerank") != std::string::npos);
  for (const auto& name : {"Random", "Popularity", "Embedding Cosine", "Candidates Only", "CE Rerank"}) {
    const auto log = out / log_file_name(name, 42);
    REQUIRE(std::filesystem::exists(log));
    CHECK(lines(testing::read_file(log)).size() == 10);
  }
  CHECK(std::filesystem::exists(out / std::string(kMasterJson)));
}

TEST_CASE("repeated runs give identical logs apart from timing", "[cli]") {
  testing::TempDir a("cli_det_a"), b("cli_det_b");
  for (const auto* dir : {&a, &b}) {
    const auto r = cli({"run", "--world", world_dir().string(), "--n-users", "15", "--seeds", "42", "7", "--out",
                        dir->path().string(), "--workers", dir == &a ? "1" : "2"});
    REQUIRE(r.code == 0);
  }
  for (const auto& name : {"Random", "Popularity", "CE Rerank"}) {
    for (std::uint64_t seed : {42, 7}) {
      CHECK(without_timing(a / log_file_name(name, seed)) == without_timing(b / log_file_name(name, seed)));
    }
  }
}

TEST_CASE("config file and flags are equivalent", "[cli]") {
  testing::TempDir dir("cli_cfg");
  testing::write_file(dir / "run.cfg", "# same as the flags below\n[run]\nn-users = 12\nseeds = 123\npool_sizes = 100\n");
  const auto via_config = cli({"run", "--world", world_dir().string(), "--config", (dir / "run.cfg").string(),
                               "--out", (dir / "c").string()});
  const auto via_flags = cli({"run", "--world", world_dir().string(), "--n-users", "12", "--seeds", "123",
                              "--pool-sizes", "100", "--out", (dir / "f").string()});
  REQUIRE(via_config.code == 0);
  REQUIRE(via_flags.code == 0);
  for (const auto& name : {"Random", "Candidates Only", "CE Rerank"}) {
    CHECK(without_timing(dir / "c" / log_file_name(name, 123)) == without_timing(dir / "f" / log_file_name(name, 123)));
  }

  // Flags override the config file.
  const auto override = cli({"run", "--world", world_dir().string(), "--config", (dir / "run.cfg").string(),
                             "--n-users", "4", "--out", (dir / "o").string()});
  REQUIRE(override.code == 0);
  CHECK(lines(testing::read_file(dir / "o" / log_file_name("Random", 123))).size() == 4);

  testing::write_file(dir / "bad.cfg", "[run]\nnot_a_key = 1\n");
  const auto bad = cli({"run", "--world", world_dir().string(), "--config", (dir / "bad.cfg").string(), "--out",
                        (dir / "b").string()});
  CHECK(bad.code == kExitValidation);
}

TEST_CASE("ablate writes one row per pool size", "[cli]") {
  testing::TempDir out("cli_ablate");
  const auto r = cli({"ablate", "--world", world_dir().string(), "--n-users", "8", "--seeds", "42", "--pool-sizes",
                      "200", "500", "1000", "--out", out.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto csv = lines(testing::read_file(out / "ablation.csv"));
  REQUIRE(csv.size() == 4);
  CHECK(csv[1].rfind("200,", 0) == 0);
  CHECK(csv[2].rfind("500,", 0) == 0);
  CHECK(csv[3].rfind("1000,", 0) == 0);
  CHECK(std::filesystem::exists(out / "ablation.txt"));
  CHECK(std::filesystem::exists(out / "ablation.tex"));
}

TEST_CASE("analyze and report over existing logs", "[cli]") {
  testing::TempDir out("cli_analyze");
  REQUIRE(cli({"run", "--world", world_dir().string(), "--n-users", "20", "--seeds", "42", "7", "--out",
               out.path().string()})
              .code == 0);
  const auto a = cli({"analyze", "--world", world_dir().string(), "--out", out.path().string()});
  INFO(a.err);
  REQUIRE(a.code == 0);
  const auto stats = json::parse(testing::read_file(out / "stat_tests.json"));
  CHECK(stats.contains("comparisons"));
  const auto r = cli({"report", "--world", world_dir().string(), "--out", out.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(out / "main_results.csv"));
  CHECK(std::filesystem::exists(out / "exposure.tex"));
  CHECK(std::filesystem::exists(out / "plots"));
}

TEST_CASE("usage and I/O errors map to exit codes", "[cli]") {
  const auto unknown = cli({"run", "--no-such-flag"});
  CHECK(unknown.code == kExitValidation);
  CHECK(unknown.err.find("Usage") != std::string::npos);

  const auto nothing = cli({});
  CHECK(nothing.code == kExitValidation);

  testing::TempDir out("cli_err");
  const auto missing = cli({"run", "--catalog", (out / "absent.csv").string(), "--users",
                            (out / "absent.jsonl").string(), "--out", out.path().string()});
  CHECK(missing.code == kExitIo);
  CHECK(missing.err.find("absent") != std::string::npos);

  const auto bad_value = cli({"run", "--world", world_dir().string(), "--n-users", "0", "--out", out.path().string()});
  CHECK(bad_value.code == kExitValidation);

  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("ablate") != std::string::npos);
}

TEST_CASE("ingest validates hand-written inputs", "[cli]") {
  const auto data = data_dir();
  testing::TempDir out("cli_ingest");
  const auto r = cli({"ingest", "--catalog", (data / "catalog.jsonl").string(), "--users",
                      (data / "users.jsonl").string(), "--embeddings", (data / "embeddings.txt").string(),
                      "--queries", (data / "queries.txt").string(), "--scores", (data / "scores.jsonl").string(),
                      "--out", out.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto report = json::parse(testing::read_file(out / "ingest_report.json"));
  CHECK(report["items"] == 6);
  CHECK(report["users"] == 3);
  CHECK(report["users_with_missing_gt"] == 1);
  CHECK(report["missing_gt_items"] == json::array({"m404"}));
  CHECK(report["scores"]["pairs"] == 18);
  const auto catalog = load_catalog(out / "catalog.csv", CatalogFormat::csv);
  CHECK(catalog == load_catalog(data / "catalog.jsonl", CatalogFormat::jsonl));
  CHECK(catalog.at("m3").title == "Amélie");
}

TEST_CASE("adapter files drive a rerank end to end", "[cli]") {
  const auto data = data_dir();
  testing::TempDir out("cli_adapter");
  const auto r = cli({"run", "--catalog", (data / "catalog.jsonl").string(), "--users", (data / "users.jsonl").string(),
                      "--embeddings", (data / "embeddings.txt").string(), "--queries", (data / "queries.txt").string(),
                      "--scores", (data / "scores.jsonl").string(), "--n-users", "3", "--seeds", "42", "--k", "2",
                      "--pool-sizes", "4", "--out", out.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  std::map<std::string, PerUserResult> by_user;
  for (auto& result : read_run_log(out / log_file_name("CE Rerank", 42))) by_user[result.user_id] = result;
  REQUIRE(by_user.size() == 3);
  // Vector pools of 4, then the highest adapter score.
  CHECK(by_user["a"].top1_item == "m5");
  CHECK(by_user["b"].top1_item == "m4");
  CHECK(by_user["c"].top1_item == "m3");
  for (const auto& [user, result] : by_user) {
    CHECK(result.hit);
    CHECK(result.ndcg == 1.0);
  }
}

TEST_CASE("index writes pools and pair texts for the adapter", "[cli]") {
  const auto data = data_dir();
  testing::TempDir out("cli_index");
  const auto r = cli({"index", "--catalog", (data / "catalog.jsonl").string(), "--users",
                      (data / "users.jsonl").string(), "--embeddings", (data / "embeddings.txt").string(),
                      "--queries", (data / "queries.txt").string(), "--pool-sizes", "3", "--out",
                      out.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto catalog = load_catalog(data / "catalog.jsonl", CatalogFormat::jsonl);
  const auto users = load_users(data / "users.jsonl");

  const auto pools = lines(testing::read_file(out / "pools.jsonl"));
  REQUIRE(pools.size() == 3);
  const auto first = json::parse(pools[0]);
  CHECK(first["user_id"] == "a");
  REQUIRE(first["items"].size() == 3);
  CHECK(first["items"][0]["item_id"] == "m1");
  CHECK(first["items"][1]["item_id"] == "m5");
  CHECK(first["items"][0]["score"].get<double>() >= first["items"][1]["score"].get<double>());

  const auto pairs = lines(testing::read_file(out / "pair_texts.jsonl"));
  REQUIRE(pairs.size() == 9);
  std::map<std::string, std::string> profile;
  for (const auto& u : users) profile[u.id] = u.profile_text;
  for (const auto& line : pairs) {
    const auto j = json::parse(line);
    const auto user = j["user_id"].get<std::string>();
    const auto item = j["item_id"].get<std::string>();
    CHECK(j["text"] == build_pair_text(profile.at(user), catalog.at(item)));
  }

  // An adapter answering every listed pair produces a loadable score file.
  ScoreTable table;
  for (const auto& line : pairs) {
    const auto j = json::parse(line);
    table.set(j["user_id"], j["item_id"], static_cast<double>(j["text"].get<std::string>().size()));
  }
  save_scores(table, out / "scores.jsonl");
  CHECK(load_scores(out / "scores.jsonl").size() == 9);
}

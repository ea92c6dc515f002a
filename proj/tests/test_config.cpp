#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "coldstart/config.hpp"
#include "coldstart/error.hpp"

using namespace coldstart;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in, "test.cfg");
}

}  // namespace

TEST_CASE("sections, comments and typed values", "[config]") {
  const auto cfg = parse(
      "# comment\n"
      "[run]\n"
      "; also a comment\n"
      "n-users = 500\n"
      "seeds = 42 7, 123\n"
      "out = \"results dir\"\n"
      "\n"
      "[pipeline.CE Rerank]\n"
      "retriever = vector\n"
      "ensemble_normalized = yes\n"
      "alpha = 0.25\n");
  const auto& run = cfg.section_or_empty("run");
  CHECK(run.get_count("n_users") == 500u);
  CHECK(run.get_u64_list("seeds") == std::vector<std::uint64_t>{42, 7, 123});
  CHECK(run.get("out") == "results dir");
  CHECK_FALSE(run.get("k").has_value());

  const auto pipes = cfg.sections_with_prefix("pipeline.");
  REQUIRE(pipes.size() == 1);
  CHECK(pipes[0]->name() == "pipeline.CE Rerank");
  CHECK(pipes[0]->get_bool("ensemble_normalized") == true);
  CHECK(pipes[0]->get_double("alpha") == 0.25);
  CHECK(cfg.section("absent") == nullptr);
  CHECK(cfg.section_or_empty("absent").entries().empty());
}

TEST_CASE("bad values and structure are rejected", "[config]") {
  CHECK_THROWS_AS(parse("[run]\nk = ten\n").section_or_empty("run").get_count("k"), ValidationError);
  CHECK_THROWS_AS(parse("[run]\nk = -1\n").section_or_empty("run").get_count("k"), ValidationError);
  CHECK_THROWS_AS(parse("[run]\nflag = maybe\n").section_or_empty("run").get_bool("flag"), ValidationError);
  CHECK_THROWS_AS(parse("[run]\nk = 1\nk = 2\n"), ValidationError);
  CHECK_THROWS_AS(parse("[run]\n[run]\n"), ParseError);
  CHECK_THROWS_AS(parse("[run\n"), ParseError);
  try {
    parse("[run]\nk = 1\njust words\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  const auto cfg = parse("[run]\nbogus = 1\n");
  CHECK_THROWS_AS(cfg.section_or_empty("run").require_known({"k", "seeds"}), ValidationError);
  CHECK_NOTHROW(cfg.section_or_empty("run").require_known({"bogus"}));
  CHECK_THROWS_AS(Config::load("/nonexistent/x.cfg"), IoError);
}

TEST_CASE("keys are canonicalized", "[config]") {
  CHECK(canonical_key("Pool-Size") == "pool_size");
  const auto cfg = parse("[world]\nCatalog-Size = 10\n");
  CHECK(cfg.section_or_empty("world").get_count("catalog_size") == 10u);
}

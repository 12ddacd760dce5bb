#include <catch_amalgamated.hpp>

#include <unistd.h>

#include "ctxinfo/pipeline.hpp"
#include "ctxinfo/synthetic.hpp"

using namespace ctxinfo;
namespace fs = std::filesystem;
using pipeline::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ctxinfo_unit_pipeline_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// A small topic world on disk plus the matching config document.
json small_world(const fs::path& dir) {
  synthetic::TopicWorldConfig wc;
  wc.topics = 4;
  wc.words_per_topic = 20;
  wc.targets_per_topic = 2;
  wc.sentences_per_target = 40;
  wc.background_sentences = 1500;
  const auto w = synthetic::make_topic_world(wc);
  auto corpus_out = tsv::open_output(dir / "corpus.txt");
  for (const auto& l : w.lines) corpus_out << l << '\n';
  auto targets_out = tsv::open_output(dir / "targets.txt");
  for (const auto& t : w.targets) targets_out << t << '\n';
  auto scores_out = tsv::open_output(dir / "scores.tsv");
  for (const auto& [id, s] : w.scores) scores_out << id << '\t' << tsv::format_double(s) << '\n';
  auto sim_out = tsv::open_output(dir / "sim.tsv");
  for (const auto& p : w.similarity) sim_out << p.word_a << '\t' << p.word_b << '\t' << p.human_score << '\n';
  return {{"corpus", "corpus.txt"},
          {"targets", "targets.txt"},
          {"filter", {{"min_len", 5}, {"max_len", 30}, {"min_sentences_per_target", 32}}},
          {"scores", {{"source", "file"}, {"path", "scores.tsv"}}},
          {"embedding", {{"dim", 8}, {"min_count", 2}, {"epochs", 1}}},
          {"curriculum", {{"pool_size", 16}, {"heuristics", {"LowInfo", "RandSelect"}}, {"k", {2, 8}}, {"seeds", {1, 2}}}},
          {"fewshot", {{"pool_size", 5}, {"exclusion", 10}, {"shots", {2}}, {"heuristics", {"LowInfo", "RandNonLow"}}, {"seeds", {1}}}},
          {"similarity", {"sim.tsv"}},
          {"deterministic", true}};
}

}  // namespace

TEST_CASE("score tables accept three layouts", "[pipeline]") {
  const auto s = pipeline::read_score_table({"1\t0.5", "2\tword\t0.25", "3\tword\t0.1\t0.75", ""});
  REQUIRE(s.at(1) == 0.5);
  REQUIRE(s.at(2) == 0.25);
  REQUIRE(s.at(3) == 0.1);
  REQUIRE_THROWS_AS(pipeline::read_score_table({"1"}), DataError);
  REQUIRE_THROWS_AS(pipeline::read_score_table({"1\tnan"}), DataError);
}

TEST_CASE("config parsing and validation", "[pipeline]") {
  const auto dir = scratch("config");
  auto j = small_world(dir);
  const auto c = pipeline::parse_config(j, dir);
  REQUIRE(c.corpus == dir / "corpus.txt");
  REQUIRE(c.filter.min_sentences_per_target == 32);
  REQUIRE(c.embedding.dim == 8);
  // update settings start from the embedding block
  REQUIRE(c.update.dim == 8);
  REQUIRE(c.k_values() == std::vector<std::size_t>{2, 8});
  REQUIRE_NOTHROW(pipeline::validate_config(c, true));
  REQUIRE_NOTHROW(pipeline::validate_config(c, false));

  auto bad = j;
  bad["curriculum"]["k"] = {3};
  REQUIRE_THROWS_AS(pipeline::validate_config(pipeline::parse_config(bad, dir), true), ConfigError);
  bad = j;
  bad["similarity"] = {"missing.tsv"};
  REQUIRE_THROWS_AS(pipeline::validate_config(pipeline::parse_config(bad, dir), true), ConfigError);
  bad = j;
  bad["embedding"]["dim"] = "wide";
  REQUIRE_THROWS_AS(pipeline::parse_config(bad, dir), ConfigError);
  bad = j;
  bad["curriculum"]["heuristics"] = {"Clever"};
  REQUIRE_THROWS_AS(pipeline::parse_config(bad, dir), ConfigError);
  REQUIRE_THROWS_AS(pipeline::parse_config(json::array(), dir), ConfigError);
  REQUIRE_THROWS_AS(pipeline::load_config(dir / "nope.json"), ConfigError);

  pipeline::ExperimentConfig d;
  d.sweep.pool_size = 16;
  REQUIRE(d.k_values() == std::vector<std::size_t>{2, 4, 8, 16});
}

TEST_CASE("manifest guards the output directory", "[pipeline]") {
  const auto dir = scratch("manifest");
  tsv::open_output(dir / "in.txt") << "hello\n";
  const json cfg = {{"a", 1}};
  auto m = pipeline::Manifest::open(dir / "out", cfg, {{"in", dir / "in.txt"}}, json::array());
  REQUIRE_FALSE(m.completed("prepare"));
  m.stage("prepare", [] { return std::vector<fs::path>{"x.tsv"}; });
  REQUIRE(m.completed("prepare"));
  REQUIRE_THROWS_AS(m.stage("score", []() -> std::vector<fs::path> { throw DataError("boom"); }), DataError);
  REQUIRE_FALSE(m.completed("score"));
  REQUIRE(m.doc().at("stages").back().at("status") == "failed");

  const auto again = pipeline::Manifest::open(dir / "out", cfg, {{"in", dir / "in.txt"}}, json::array());
  REQUIRE(again.completed("prepare"));
  REQUIRE_THROWS_AS(pipeline::Manifest::open(dir / "out", json{{"a", 2}}, {{"in", dir / "in.txt"}}, json::array()),
                    ConfigError);
  tsv::open_output(dir / "in.txt") << "changed\n";
  REQUIRE_THROWS_AS(pipeline::Manifest::open(dir / "out", cfg, {{"in", dir / "in.txt"}}, json::array()), ConfigError);
}

TEST_CASE("prepare writes a consistent summary", "[pipeline]") {
  const std::vector<std::string> lines{"the cat sat on the mat today", "", "a dog and a cat and a cat", "dog runs far away now"};
  const auto p = pipeline::prepare(lines, {"cat", "dog"}, corpus::FilterPolicy{2, 30, 1, true});
  const auto rows = pipeline::prepare_summary(p);
  const std::map<std::string, std::size_t> summary(rows.begin(), rows.end());
  REQUIRE(summary.at("EMPTY") == 1);
  REQUIRE(summary.at("TOTAL") == 4);
  REQUIRE(summary.at("TARGET") + summary.at("NON_TARGET") + summary.at("MULTI_TARGET") + summary.at("REPEAT_TARGET") +
              summary.at("LEN") + summary.at("SPARSE_TARGET") + summary.at("EMPTY") ==
          summary.at("TOTAL"));
}

TEST_CASE("experiment runs end to end and resumes", "[pipeline][slow]") {
  const auto dir = scratch("experiment");
  const auto j = small_world(dir);
  auto c = pipeline::parse_config(j, dir);
  const auto res = pipeline::run_experiment(c, dir / "out");
  REQUIRE_FALSE(res.skipped);
  REQUIRE(res.rows.size() == 8);
  for (const auto& row : res.rows) {
    REQUIRE(std::isfinite(row.r));
    REQUIRE(row.coverage == 1.0);
  }
  for (const char* f : {"manifest.json", "experiment.csv", "summary.csv", "chart_sim.svg", "curricula.tsv", "scores.tsv"}) {
    REQUIRE(fs::exists(dir / "out" / f));
  }
  const auto csv = tsv::read_file(dir / "out" / "experiment.csv");
  REQUIRE(pipeline::run_experiment(c, dir / "out").skipped);

  c.threads = 2;
  c.snapshot["threads"] = 2;
  REQUIRE(pipeline::run_experiment(c, dir / "out2").rows.size() == 8);
  REQUIRE(tsv::read_file(dir / "out2" / "experiment.csv") == csv);

  auto changed = j;
  changed["seed"] = 9;
  REQUIRE_THROWS_AS(pipeline::run_experiment(pipeline::parse_config(changed, dir), dir / "out"), ConfigError);
}

TEST_CASE("few-shot run produces one row per heuristic, shot and seed", "[pipeline][slow]") {
  const auto dir = scratch("fewshot");
  const auto c = pipeline::parse_config(small_world(dir), dir);
  const auto res = pipeline::run_fewshot(c, dir / "out");
  REQUIRE(res.rows.size() == 2);
  for (const auto& row : res.rows) {
    REQUIRE(row.shots == 2);
    REQUIRE(row.median_rank >= 1);
    REQUIRE(row.n_targets == 8);
  }
  REQUIRE(fs::exists(dir / "out" / "fewshot.csv"));
  REQUIRE(fs::exists(dir / "out" / "fewshot_split.tsv"));
}

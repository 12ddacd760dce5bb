#include <catch_amalgamated.hpp>

#include <sstream>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/pipeline.hpp"
#include "ctxinfo/rng.hpp"

using namespace ctxinfo;
using namespace ctxinfo::corpus;

namespace {

std::vector<std::string> repeat_line(const std::string& line, std::size_t n) { return std::vector<std::string>(n, line); }

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation", "[corpus]") {
  REQUIRE(tokenize("The Cat, sat.") == std::vector<std::string>{"the", "cat", ",", "sat", "."});
  REQUIRE(tokenize("  \t ").empty());
  REQUIRE(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("read_corpus skips empty lines and keeps source lines", "[corpus]") {
  const auto recs = read_corpus({"a b", "", "c"});
  REQUIRE(recs.size() == 2);
  REQUIRE(recs[1].id == 1);
  REQUIRE(recs[1].source_line == 3);
}

TEST_CASE("index_targets marks exactly one occurrence of one target", "[corpus]") {
  const std::set<std::string> targets{"cat", "dog"};
  auto r = index_targets(read_corpus({"the cat sat", "cat and dog", "cat cat", "nothing here"}), targets);
  REQUIRE(r.sentences[0].target_word == std::optional<std::string>("cat"));
  REQUIRE(r.sentences[0].target_pos == std::optional<std::size_t>(1));
  REQUIRE_FALSE(r.sentences[1].target_word);
  REQUIRE_FALSE(r.sentences[2].target_word);
  REQUIRE_FALSE(r.sentences[3].target_word);
  REQUIRE(r.excluded.size() == 2);
  REQUIRE(r.excluded[0].reason == ExclusionReason::MultiTarget);
  REQUIRE(r.excluded[1].reason == ExclusionReason::RepeatTarget);
  REQUIRE(r.occurrences.at("cat") == 4);
}

TEST_CASE("filter_and_split applies length bounds and drops sparse targets", "[corpus]") {
  std::vector<std::string> lines = repeat_line("one two three cat four", 3);
  lines.push_back("cat");                         // too short
  lines.push_back("dog one two three four");      // sparse target
  lines.push_back("plain words without targets");
  FilterPolicy policy{3, 10, 2, true};
  const auto indexed = index_targets(read_corpus(lines), {"cat", "dog"});
  const auto r = filter_and_split(indexed, {"cat", "dog"}, policy);
  REQUIRE(r.split.target_map.size() == 1);
  REQUIRE(r.split.target_map.at("cat").size() == 3);
  REQUIRE(r.dropped_targets == std::vector<std::string>{"dog"});
  REQUIRE(r.split.non_target_ids == std::vector<SentenceId>{5});
  REQUIRE(r.excluded.size() == 2);
  REQUIRE(r.excluded[0].reason == ExclusionReason::Length);
  REQUIRE(r.excluded[1].reason == ExclusionReason::SparseTarget);
}

TEST_CASE("filter policy validation", "[corpus]") {
  REQUIRE_THROWS_AS((FilterPolicy{0, 5, 1, true}.validate()), ConfigError);
  REQUIRE_THROWS_AS((FilterPolicy{6, 5, 1, true}.validate()), ConfigError);
  REQUIRE_THROWS_AS((FilterPolicy{1, 5, 0, true}.validate()), ConfigError);
  const auto indexed = index_targets(read_corpus({"a cat b"}), {"cat"});
  REQUIRE_THROWS_AS(filter_and_split(indexed, {}, FilterPolicy{}), ConfigError);
  REQUIRE_THROWS_AS(filter_and_split(indexed, {"cat"}, FilterPolicy{1, 5, 2, true}), DataError);
}

TEST_CASE("split is a partition: every line is counted exactly once", "[corpus][property]") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const std::vector<std::string> vocab{"cat", "dog", "a", "b", "c", "d", "e", "f", "g"};
    std::vector<std::string> lines;
    const std::size_t n = 20 + rng.uniform_index(80);
    for (std::size_t i = 0; i < n; ++i) {
      std::string l;
      const std::size_t len = rng.uniform_index(9);
      for (std::size_t j = 0; j < len; ++j) l += vocab[rng.uniform_index(vocab.size())] + " ";
      lines.push_back(l);
    }
    const FilterPolicy policy{2, 6, 1 + rng.uniform_index(4), true};
    pipeline::Prepared p;
    try {
      p = pipeline::prepare(lines, {"cat", "dog"}, policy);
    } catch (const DataError&) {
      continue;  // every target dropped
    }
    std::size_t total = 0;
    for (const auto& [k, v] : pipeline::prepare_summary(p)) {
      if (k != "TOTAL") total += v;
    }
    REQUIRE(total == lines.size());
    std::set<SentenceId> seen;
    for (auto id : p.split.non_target_ids) REQUIRE(seen.insert(id).second);
    for (const auto& [t, ids] : p.split.target_map)
      for (auto id : ids) REQUIRE(seen.insert(id).second);
    for (const auto& e : p.excluded) REQUIRE(seen.insert(e.id).second);
    REQUIRE(seen.size() + p.empty_lines == lines.size());
    // no target token ever lands in the non-target set
    const auto index = by_id(p.all);
    for (auto id : p.split.non_target_ids) {
      for (const auto& tok : index.at(id)->tokens) REQUIRE((tok != "cat" && tok != "dog"));
    }
  }
}

TEST_CASE("sentences.tsv round trip", "[corpus]") {
  auto r = index_targets(read_corpus({"x cat y", "plain line"}), {"cat"});
  std::ostringstream out;
  write_sentences(out, r.sentences);
  std::istringstream in(out.str());
  const auto back = read_sentences(tsv::read_lines(in));
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].tokens == r.sentences[0].tokens);
  REQUIRE(back[0].target_pos == r.sentences[0].target_pos);
  REQUIRE_FALSE(back[1].target_word);
  REQUIRE_THROWS_AS(read_sentences(std::vector<std::string>{"0\tcat\t0\tx cat y"}), DataError);
}

TEST_CASE("prepare is deterministic", "[corpus]") {
  const std::vector<std::string> lines{"one cat two three", "dog one two", "four five six", "cat dog", ""};
  const FilterPolicy policy{2, 10, 1, true};
  auto render = [&] {
    const auto p = pipeline::prepare(lines, {"cat", "dog"}, policy);
    std::ostringstream out;
    write_sentences(out, p.retained);
    write_exclusions(out, p.excluded, p.all);
    return out.str();
  };
  REQUIRE(render() == render());
}

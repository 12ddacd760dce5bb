#include <catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "ctxinfo/curriculum.hpp"

using namespace ctxinfo;
using namespace ctxinfo::curriculum;

namespace {

/// n entries with ids 0..n-1 and small random integer scores, many of them
/// tied.
std::vector<ScoredSentence> sorted_entries(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ScoredSentence> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({static_cast<SentenceId>(i), static_cast<double>(rng.uniform_index(n / 2 + 1))});
  std::sort(v.begin(), v.end(), score_less);
  return v;
}

std::set<SentenceId> ids_in(std::span<const ScoredSentence> v) {
  std::set<SentenceId> out;
  for (const auto& e : v) out.insert(e.id);
  return out;
}

}  // namespace

TEST_CASE("heuristic names round trip", "[curriculum]") {
  for (auto h : kAllHeuristics) REQUIRE(parse_heuristic(heuristic_name(h)) == h);
  REQUIRE_THROWS_AS(parse_heuristic("Smart"), ConfigError);
}

TEST_CASE("selection draws from the right part of the pool", "[curriculum][property]") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto v = sorted_entries(32, seed);
    const std::span<const ScoredSentence> all(v);
    Rng rng(seed);
    for (std::size_t k : {2, 4, 8, 16}) {
      const auto low = select(v, Heuristic::LowInfo, k, rng);
      const auto high = select(v, Heuristic::HighInfo, k, rng);
      REQUIRE(low.size() == k);
      REQUIRE(high.size() == k);
      for (std::size_t i = 0; i < k; ++i) REQUIRE(low[i] == v[i].id);
      // highest first, ties broken by id
      std::vector<ScoredSentence> desc(v.begin(), v.end());
      std::sort(desc.begin(), desc.end(), [](auto& a, auto& b) { return a.score != b.score ? a.score > b.score : a.id < b.id; });
      for (std::size_t i = 0; i < k; ++i) REQUIRE(high[i] == desc[i].id);

      const auto top = ids_in(all.subspan(16));
      const auto bottom = ids_in(all.first(16));
      for (auto id : select(v, Heuristic::RandNonLow, k, rng)) REQUIRE(top.count(id));
      for (auto id : select(v, Heuristic::RandNonHigh, k, rng)) REQUIRE(bottom.count(id));
      const auto r = select(v, Heuristic::RandSelect, k, rng);
      REQUIRE(std::set<SentenceId>(r.begin(), r.end()).size() == k);
    }
  }
}

TEST_CASE("curriculum k validation", "[curriculum]") {
  CurriculumSpec spec;
  spec.k = 3;
  REQUIRE_THROWS_AS(spec.validate(16), ConfigError);
  spec.k = 32;
  REQUIRE_THROWS_AS(spec.validate(16), ConfigError);
  spec.k = 16;
  REQUIRE_NOTHROW(spec.validate(16));
  spec.heuristic = Heuristic::RandNonLow;
  REQUIRE_THROWS_AS(spec.validate(16), ConfigError);
  spec.k = 8;
  REQUIRE_NOTHROW(spec.validate(16));
}

TEST_CASE("scored pools need enough scored sentences", "[curriculum]") {
  std::map<std::string, std::vector<SentenceId>> tm{{"w", {1, 2, 3, 4}}};
  std::map<SentenceId, double> scores{{1, 0.4}, {2, 0.1}, {3, 0.9}, {4, 0.1}};
  const auto pool = build_scored_pool(tm, scores, 4, 1);
  const auto& e = pool.at("w");
  REQUIRE(e[0].id == 2);
  REQUIRE(e[1].id == 4);
  REQUIRE(e[3].id == 3);
  REQUIRE_THROWS_AS(build_scored_pool(tm, scores, 3, 1), ConfigError);
  REQUIRE_THROWS_AS(build_scored_pool(tm, scores, 6, 1), DataError);
  scores.erase(3);
  REQUIRE_THROWS_AS(build_scored_pool(tm, scores, 4, 1), DataError);
}

TEST_CASE("batch curricula are reproducible per cell", "[curriculum]") {
  ScoredPool pool{{"a", sorted_entries(16, 1)}, {"b", sorted_entries(16, 2)}};
  CurriculumSpec spec{Heuristic::RandSelect, 4, 7};
  const auto c1 = build_batch_curriculum(pool, spec);
  const auto c2 = build_batch_curriculum(pool, spec);
  REQUIRE(c1 == c2);
  spec.seed = 8;
  REQUIRE_FALSE(build_batch_curriculum(pool, spec) == c1);
  REQUIRE(cell_seed(1, "a", Heuristic::LowInfo, 4) != cell_seed(1, "a", Heuristic::LowInfo, 8));
  std::ostringstream out;
  write_curriculum(out, c1, CurriculumSpec{Heuristic::RandSelect, 4, 7});
  const auto text = out.str();
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 8);
  REQUIRE(text.rfind("a\tRandSelect\t4\t", 0) == 0);
}

TEST_CASE("few-shot split partitions the ids", "[curriculum][property]") {
  FewShotPlan plan;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<SentenceId> ids;
    for (SentenceId i = 0; i < static_cast<SentenceId>(5 + seed * 3); ++i) ids.push_back(i * 2);
    const auto s = fewshot_split(ids, plan, seed);
    REQUIRE(s.background.size() == static_cast<std::size_t>(std::floor(0.6 * static_cast<double>(ids.size()))));
    REQUIRE(s.background.size() + s.holdout.size() == ids.size());
    REQUIRE(std::is_sorted(s.background.begin(), s.background.end()));
    REQUIRE(std::is_sorted(s.holdout.begin(), s.holdout.end()));
    std::set<SentenceId> all(s.background.begin(), s.background.end());
    all.insert(s.holdout.begin(), s.holdout.end());
    REQUIRE(all.size() == ids.size());
  }
  REQUIRE_THROWS_AS(fewshot_split(std::vector<SentenceId>{1, 2, 3}, plan, 1), DataError);
  plan.background_fraction = 1.0;
  REQUIRE_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("few-shot pools respect the exclusion band", "[curriculum]") {
  FewShotPlan plan;
  plan.pool_size = 5;
  plan.exclusion = 20;
  plan.shots = {2};
  const auto full = sorted_entries(60, 3);
  std::vector<SentenceId> holdout;
  for (SentenceId i = 0; i < 60; i += 2) holdout.push_back(i);
  const std::set<SentenceId> hold(holdout.begin(), holdout.end());
  const auto low_band = ids_in(std::span<const ScoredSentence>(full).first(20));
  const auto high_band = ids_in(std::span<const ScoredSentence>(full).last(20));

  const auto non_low = build_fewshot_pool(full, holdout, Heuristic::RandNonLow, plan, 1);
  REQUIRE(non_low.size() == 5);
  for (auto id : non_low) {
    REQUIRE(hold.count(id));
    REQUIRE_FALSE(low_band.count(id));
  }
  for (auto id : build_fewshot_pool(full, holdout, Heuristic::RandNonHigh, plan, 1)) {
    REQUIRE(hold.count(id));
    REQUIRE_FALSE(high_band.count(id));
  }
  const auto low = build_fewshot_pool(full, holdout, Heuristic::LowInfo, plan, 1);
  std::vector<SentenceId> expect;
  for (const auto& e : full) {
    if (hold.count(e.id) && expect.size() < 5) expect.push_back(e.id);
  }
  REQUIRE(low == expect);
  plan.pool_size = 25;
  plan.exclusion = 50;
  REQUIRE_THROWS_AS(build_fewshot_pool(full, holdout, Heuristic::RandNonLow, plan, 1), DataError);
}

TEST_CASE("shots are a seeded subset of the pool", "[curriculum]") {
  const std::vector<SentenceId> pool{5, 6, 7, 8, 9, 10};
  const auto a = sample_shots(pool, 4, 3);
  REQUIRE(a == sample_shots(pool, 4, 3));
  REQUIRE(std::set<SentenceId>(a.begin(), a.end()).size() == 4);
  for (auto id : a) REQUIRE(std::find(pool.begin(), pool.end(), id) != pool.end());
  REQUIRE_THROWS_AS(sample_shots(pool, 7, 1), ConfigError);
}

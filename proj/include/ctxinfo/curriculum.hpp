#pragma once

// Curricula built from per-sentence informativeness scores: batch
// heuristics over a fixed-size scored pool, and few-shot pools drawn from a
// held-out share of each target's sentences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxinfo/error.hpp"
#include "ctxinfo/rng.hpp"

namespace ctxinfo::curriculum {

using SentenceId = std::int64_t;

enum class Heuristic { LowInfo, HighInfo, RandSelect, RandNonLow, RandNonHigh };

inline constexpr Heuristic kAllHeuristics[] = {Heuristic::LowInfo, Heuristic::HighInfo, Heuristic::RandSelect,
                                               Heuristic::RandNonLow, Heuristic::RandNonHigh};

inline std::string_view heuristic_name(Heuristic h) {
  switch (h) {
    case Heuristic::LowInfo: return "LowInfo";
    case Heuristic::HighInfo: return "HighInfo";
    case Heuristic::RandSelect: return "RandSelect";
    case Heuristic::RandNonLow: return "RandNonLow";
    case Heuristic::RandNonHigh: return "RandNonHigh";
  }
  return "?";
}

inline Heuristic parse_heuristic(std::string_view s) {
  for (auto h : kAllHeuristics) {
    if (heuristic_name(h) == s) return h;
  }
  throw ConfigError("unknown curriculum heuristic '" + std::string(s) + "'");
}

struct ScoredSentence {
  SentenceId id = 0;
  double score = 0.0;
};

inline bool score_less(const ScoredSentence& a, const ScoredSentence& b) {
  return a.score != b.score ? a.score < b.score : a.id < b.id;
}

/// target word -> entries sorted ascending by (score, id)
using ScoredPool = std::map<std::string, std::vector<ScoredSentence>>;

/// Samples pool_size sentences per target (all of them when exactly
/// pool_size exist) and sorts them by score.
inline ScoredPool build_scored_pool(const std::map<std::string, std::vector<SentenceId>>& target_map,
                                    const std::map<SentenceId, double>& scores, std::size_t pool_size,
                                    std::uint64_t seed) {
  if (pool_size < 2 || pool_size % 2 != 0) throw ConfigError("pool size must be an even number >= 2");
  ScoredPool pool;
  for (const auto& [target, ids] : target_map) {
    if (ids.size() < pool_size) {
      throw DataError("target '" + target + "' has " + std::to_string(ids.size()) + " sentences, fewer than the pool size " +
                      std::to_string(pool_size));
    }
    Rng rng(derive_seed(seed, "pool|" + target));
    auto& entries = pool[target];
    for (SentenceId id : rng.sample(std::span<const SentenceId>(ids), pool_size)) {
      const auto it = scores.find(id);
      if (it == scores.end()) throw DataError("no informativeness score for sentence " + std::to_string(id));
      if (!std::isfinite(it->second)) throw DataError("non-finite score for sentence " + std::to_string(id));
      entries.push_back({id, it->second});
    }
    std::sort(entries.begin(), entries.end(), score_less);
  }
  return pool;
}

struct CurriculumSpec {
  Heuristic heuristic = Heuristic::RandSelect;
  std::size_t k = 2;
  std::uint64_t seed = 1;

  /// k is a power of two in [2, pool_size]; the half-pool heuristics need
  /// k <= pool_size / 2.
  void validate(std::size_t pool_size) const {
    if (k < 2 || (k & (k - 1)) != 0 || k > pool_size) {
      throw ConfigError("curriculum k must be a power of two between 2 and the pool size " + std::to_string(pool_size));
    }
    if ((heuristic == Heuristic::RandNonLow || heuristic == Heuristic::RandNonHigh) && k > pool_size / 2) {
      throw ConfigError(std::string(heuristic_name(heuristic)) + " draws from half of the pool; k=" + std::to_string(k) +
                        " is too large");
    }
  }
};

inline std::uint64_t cell_seed(std::uint64_t seed, const std::string& target, Heuristic h, std::size_t k) {
  return derive_seed(seed, target + "|" + std::string(heuristic_name(h)) + "|" + std::to_string(k));
}

namespace detail {

inline std::vector<SentenceId> ids_of(std::span<const ScoredSentence> entries) {
  std::vector<SentenceId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

/// Highest first; equal scores keep the smaller id first.
inline std::vector<SentenceId> highest(std::span<const ScoredSentence> sorted_asc, std::size_t k) {
  std::vector<ScoredSentence> v(sorted_asc.begin(), sorted_asc.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  v.resize(std::min(k, v.size()));
  return ids_of(v);
}

}  // namespace detail

/// Selects k sentence ids for one target from its sorted entries.
inline std::vector<SentenceId> select(std::span<const ScoredSentence> sorted, Heuristic h, std::size_t k, Rng& rng) {
  const std::size_t n = sorted.size();
  const std::size_t half = n / 2;
  switch (h) {
    case Heuristic::LowInfo: return detail::ids_of(sorted.first(std::min(k, n)));
    case Heuristic::HighInfo: return detail::highest(sorted, k);
    case Heuristic::RandSelect: {
      const auto ids = detail::ids_of(sorted);
      return rng.sample(std::span<const SentenceId>(ids), k);
    }
    case Heuristic::RandNonLow: {
      const auto ids = detail::ids_of(sorted.subspan(half));
      return rng.sample(std::span<const SentenceId>(ids), k);
    }
    case Heuristic::RandNonHigh: {
      const auto ids = detail::ids_of(sorted.first(half));
      return rng.sample(std::span<const SentenceId>(ids), k);
    }
  }
  return {};
}

using Curriculum = std::map<std::string, std::vector<SentenceId>>;

inline Curriculum build_batch_curriculum(const ScoredPool& pool, const CurriculumSpec& spec) {
  Curriculum out;
  for (const auto& [target, entries] : pool) {
    spec.validate(entries.size());
    Rng rng(cell_seed(spec.seed, target, spec.heuristic, spec.k));
    out[target] = select(entries, spec.heuristic, spec.k, rng);
  }
  return out;
}

/// TSV: target_word, heuristic, k, sentence_id, rank_in_curriculum (from 1).
inline void write_curriculum(std::ostream& out, const Curriculum& c, const CurriculumSpec& spec) {
  for (const auto& [target, ids] : c) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << target << '\t' << heuristic_name(spec.heuristic) << '\t' << spec.k << '\t' << ids[i] << '\t' << i + 1
          << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Few-shot pools

struct FewShotPlan {
  double background_fraction = 0.6;
  std::size_t pool_size = 50;
  std::size_t exclusion = 256;
  std::vector<std::size_t> shots{2, 4, 6};

  void validate() const {
    if (!(background_fraction > 0.0 && background_fraction < 1.0)) {
      throw ConfigError("background_fraction must lie strictly between 0 and 1");
    }
    if (pool_size == 0 || shots.empty()) throw ConfigError("few-shot plan needs a pool size and shot counts");
    for (auto s : shots) {
      if (s == 0 || s > pool_size) throw ConfigError("shot counts must lie in [1, pool_size]");
    }
  }
};

struct FewShotSplit {
  std::vector<SentenceId> background;
  std::vector<SentenceId> holdout;
};

/// Uniform per-target split; floor(fraction * n) sentences go to the
/// background. Both lists come back sorted.
inline FewShotSplit fewshot_split(std::span<const SentenceId> ids, const FewShotPlan& plan, std::uint64_t seed) {
  plan.validate();
  if (ids.size() < 5) throw DataError("few-shot split needs at least 5 sentences per target");
  std::vector<SentenceId> v(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(v);
  const auto nb = static_cast<std::size_t>(std::floor(plan.background_fraction * static_cast<double>(v.size())));
  FewShotSplit s;
  s.background.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nb));
  s.holdout.assign(v.begin() + static_cast<std::ptrdiff_t>(nb), v.end());
  std::sort(s.background.begin(), s.background.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  return s;
}

/// pool_size ids for one heuristic. LowInfo / HighInfo take the extreme
/// holdout sentences; the NonLow / NonHigh variants first drop the
/// `exclusion` lowest / highest of the target's full scored set, then keep
/// only holdout sentences and sample uniformly.
inline std::vector<SentenceId> build_fewshot_pool(std::span<const ScoredSentence> full_sorted,
                                                  std::span<const SentenceId> holdout, Heuristic h,
                                                  const FewShotPlan& plan, std::uint64_t seed) {
  plan.validate();
  const std::set<SentenceId> hold(holdout.begin(), holdout.end());
  std::vector<ScoredSentence> full(full_sorted.begin(), full_sorted.end());
  std::sort(full.begin(), full.end(), score_less);
  std::vector<ScoredSentence> candidates;
  const std::size_t n = full.size();
  std::size_t lo = 0, hi = n;
  if (h == Heuristic::RandNonLow) lo = std::min(plan.exclusion, n);
  if (h == Heuristic::RandNonHigh) hi = n - std::min(plan.exclusion, n);
  for (std::size_t i = lo; i < hi; ++i) {
    if (hold.count(full[i].id)) candidates.push_back(full[i]);
  }
  if (candidates.size() < plan.pool_size) {
    throw DataError("few-shot pool for " + std::string(heuristic_name(h)) + " needs " + std::to_string(plan.pool_size) +
                    " sentences but only " + std::to_string(candidates.size()) + " remain");
  }
  Rng rng(seed);
  const Heuristic pick = (h == Heuristic::RandNonLow || h == Heuristic::RandNonHigh) ? Heuristic::RandSelect : h;
  return select(candidates, pick, plan.pool_size, rng);
}

inline std::vector<SentenceId> sample_shots(std::span<const SentenceId> pool, std::size_t shots, std::uint64_t seed) {
  if (shots > pool.size()) throw ConfigError("more shots requested than the pool holds");
  Rng rng(seed);
  return rng.sample(pool, shots);
}

}  // namespace ctxinfo::curriculum

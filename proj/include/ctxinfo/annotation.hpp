#pragma once

// Best-worst scaling: tuple design, judgment aggregation and split-half
// replicability.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxinfo/error.hpp"
#include "ctxinfo/metrics.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/tsv.hpp"

namespace ctxinfo::annotation {

using SentenceId = std::int64_t;

struct BwsTuple {
  std::int64_t tuple_id = 0;
  std::array<SentenceId, 4> sentence_ids{};
};

struct BwsJudgment {
  std::int64_t tuple_id = 0;
  std::string annotator_id;
  SentenceId best_id = 0;
  SentenceId worst_id = 0;
};

struct InformativenessScore {
  SentenceId sentence_id = 0;
  double raw = 0.0;
  double normalized = 0.0;
  std::size_t n_ratings = 0;
};

namespace detail {

inline std::uint64_t pair_key(SentenceId a, SentenceId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint64_t>(b);
}

inline std::array<SentenceId, 4> sorted(std::array<SentenceId, 4> t) {
  std::sort(t.begin(), t.end());
  return t;
}

inline double binomial4(std::size_t n) {
  const double x = static_cast<double>(n);
  return x * (x - 1) * (x - 2) * (x - 3) / 24.0;
}

}  // namespace detail

/// Greedy randomized 4-tuple design. Each pass shuffles the ids and chunks
/// them into tuples, padding a short last chunk with the least-used ids, so
/// every sentence lands in tuples_per_sentence (+1 for padding) tuples. Every
/// pass keeps the best of several candidate shuffles by pair co-occurrence
/// cost, rejecting any that repeat a tuple or an id within a tuple.
inline std::vector<BwsTuple> generate_tuples(std::span<const SentenceId> sentence_ids,
                                             std::size_t tuples_per_sentence, std::uint64_t seed,
                                             std::size_t candidates_per_pass = 16) {
  const std::size_t n = sentence_ids.size();
  if (n < 4) throw DataError("generate_tuples needs at least 4 sentences");
  if (tuples_per_sentence == 0) throw ConfigError("tuples_per_sentence must be positive");
  {
    std::set<SentenceId> unique(sentence_ids.begin(), sentence_ids.end());
    if (unique.size() != n) throw DataError("generate_tuples: duplicate sentence ids");
  }
  const std::size_t per_pass = (n + 3) / 4;
  if (detail::binomial4(n) < static_cast<double>(per_pass * tuples_per_sentence)) {
    throw DataError("generate_tuples: not enough distinct 4-tuples for the requested design");
  }

  Rng rng(seed);
  std::vector<BwsTuple> tuples;
  std::set<std::array<SentenceId, 4>> seen;
  std::unordered_map<std::uint64_t, std::uint32_t> pair_count;
  std::map<SentenceId, std::size_t> appearances;
  for (SentenceId id : sentence_ids) appearances[id] = 0;

  std::vector<SentenceId> order(sentence_ids.begin(), sentence_ids.end());
  constexpr std::size_t kMaxAttempts = 200;
  for (std::size_t pass = 0; pass < tuples_per_sentence; ++pass) {
    std::vector<std::array<SentenceId, 4>> best;
    double best_cost = 0.0;
    std::size_t valid = 0;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && valid < candidates_per_pass; ++attempt) {
      rng.shuffle(order);
      std::vector<std::array<SentenceId, 4>> cand;
      cand.reserve(per_pass);
      for (std::size_t i = 0; i + 4 <= n; i += 4) {
        cand.push_back({order[i], order[i + 1], order[i + 2], order[i + 3]});
      }
      const std::size_t rest = n % 4;
      if (rest) {
        std::array<SentenceId, 4> last{};
        std::set<SentenceId> used;
        for (std::size_t r = 0; r < rest; ++r) {
          last[r] = order[n - rest + r];
          used.insert(last[r]);
        }
        // pad with the least-used ids (random tie-break via the shuffled order)
        std::vector<SentenceId> pool(order.begin(), order.end() - static_cast<std::ptrdiff_t>(rest));
        std::stable_sort(pool.begin(), pool.end(),
                         [&](SentenceId a, SentenceId b) { return appearances[a] < appearances[b]; });
        std::size_t slot = rest;
        for (SentenceId id : pool) {
          if (slot == 4) break;
          if (!used.count(id)) last[slot++] = id;
        }
        cand.push_back(last);
      }
      // constraints: unique within the pass and against earlier passes
      std::set<std::array<SentenceId, 4>> local;
      bool ok = true;
      double cost = 0.0;
      for (const auto& t : cand) {
        const auto key = detail::sorted(t);
        if (seen.count(key) || !local.insert(key).second) {
          ok = false;
          break;
        }
        for (int a = 0; a < 4; ++a) {
          for (int b = a + 1; b < 4; ++b) {
            const auto it = pair_count.find(detail::pair_key(t[a], t[b]));
            const double c = it == pair_count.end() ? 0.0 : it->second;
            cost += c * c;
          }
        }
      }
      if (!ok) continue;
      ++valid;
      if (best.empty() || cost < best_cost) {
        best = std::move(cand);
        best_cost = cost;
      }
    }
    if (best.empty()) throw DataError("generate_tuples: could not satisfy tuple constraints");
    for (const auto& t : best) {
      seen.insert(detail::sorted(t));
      for (int a = 0; a < 4; ++a) {
        ++appearances[t[a]];
        for (int b = a + 1; b < 4; ++b) ++pair_count[detail::pair_key(t[a], t[b])];
      }
      tuples.push_back({static_cast<std::int64_t>(tuples.size()), t});
    }
  }
  return tuples;
}

/// Throws when the judgment is not a valid best/worst pick over its tuple.
inline void validate(const BwsJudgment& j, const std::map<std::int64_t, const BwsTuple*>& tuples) {
  const auto it = tuples.find(j.tuple_id);
  if (it == tuples.end()) throw DataError("judgment references unknown tuple " + std::to_string(j.tuple_id));
  const auto& ids = it->second->sentence_ids;
  auto contains = [&](SentenceId s) { return std::find(ids.begin(), ids.end(), s) != ids.end(); };
  if (j.best_id == j.worst_id) throw DataError("judgment has best == worst in tuple " + std::to_string(j.tuple_id));
  if (!contains(j.best_id) || !contains(j.worst_id)) {
    throw DataError("judgment picks a sentence outside tuple " + std::to_string(j.tuple_id));
  }
}

/// Per-sentence list of ratings in {+1, 0, -1}, one per judgment of a tuple
/// that contains the sentence. Keyed by sentence id.
inline std::map<SentenceId, std::vector<int>> ratings_by_sentence(std::span<const BwsTuple> tuples,
                                                                  std::span<const BwsJudgment> judgments) {
  std::map<std::int64_t, const BwsTuple*> by_id;
  for (const auto& t : tuples) by_id[t.tuple_id] = &t;
  std::map<SentenceId, std::vector<int>> ratings;
  for (const auto& j : judgments) {
    validate(j, by_id);
    for (SentenceId s : by_id[j.tuple_id]->sentence_ids) {
      ratings[s].push_back(s == j.best_id ? 1 : (s == j.worst_id ? -1 : 0));
    }
  }
  return ratings;
}

/// Min-max rescale to [0, 1].
inline std::vector<double> minmax_normalize(std::span<const double> raw) {
  if (raw.empty()) throw DataError("minmax_normalize of empty sequence");
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DataError("minmax_normalize: all values are equal");
  std::vector<double> out;
  out.reserve(raw.size());
  for (double r : raw) out.push_back((r - lo) / (hi - lo));
  return out;
}

/// Rescales values from a known scale [lo, hi] (e.g. a 1..4 Likert scale).
inline double minmax_normalize(double value, double lo, double hi) {
  if (!(hi > lo)) throw DataError("minmax_normalize: empty domain");
  return (value - lo) / (hi - lo);
}

/// raw = (best picks - worst picks) / ratings, sorted by sentence id, with
/// the corpus-wide min-max normalization filled in.
inline std::vector<InformativenessScore> aggregate(std::span<const BwsTuple> tuples,
                                                   std::span<const BwsJudgment> judgments) {
  const auto ratings = ratings_by_sentence(tuples, judgments);
  std::vector<InformativenessScore> scores;
  std::vector<double> raw;
  for (const auto& [id, r] : ratings) {
    InformativenessScore s;
    s.sentence_id = id;
    s.n_ratings = r.size();
    double sum = 0.0;
    for (int x : r) sum += x;
    s.raw = sum / static_cast<double>(r.size());
    raw.push_back(s.raw);
    scores.push_back(s);
  }
  const auto norm = minmax_normalize(raw);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].normalized = norm[i];
  return scores;
}

struct Replicability {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> per_trial;
};

/// Split-half reliability: per trial every sentence's ratings are shuffled
/// and halved, each half is averaged, and the two score vectors are compared
/// by Spearman correlation. Trial t uses seed + t.
inline Replicability replicability(std::span<const BwsTuple> tuples, std::span<const BwsJudgment> judgments,
                                   std::size_t trials, std::uint64_t seed) {
  const auto ratings = ratings_by_sentence(tuples, judgments);
  for (const auto& [id, r] : ratings) {
    if (r.size() < 2) throw DataError("sentence " + std::to_string(id) + " has fewer than 2 ratings");
  }
  if (trials == 0) throw ConfigError("replicability needs at least one trial");
  Replicability out;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(seed + t);
    std::vector<double> a, b;
    a.reserve(ratings.size());
    b.reserve(ratings.size());
    for (const auto& [id, r] : ratings) {
      std::vector<int> shuffled = r;
      rng.shuffle(shuffled);
      const std::size_t half = shuffled.size() / 2;
      double sa = 0.0, sb = 0.0;
      for (std::size_t i = 0; i < shuffled.size(); ++i) (i < half ? sa : sb) += shuffled[i];
      a.push_back(sa / static_cast<double>(half));
      b.push_back(sb / static_cast<double>(shuffled.size() - half));
    }
    out.per_trial.push_back(metrics::spearman(a, b));
  }
  out.mean = metrics::mean(out.per_trial);
  out.variance = metrics::variance(out.per_trial);
  return out;
}

// ---------------------------------------------------------------------------
// TSV persistence

inline void write_tuples(std::ostream& out, std::span<const BwsTuple> tuples) {
  for (const auto& t : tuples) {
    out << t.tuple_id;
    for (SentenceId s : t.sentence_ids) out << '\t' << s;
    out << '\n';
  }
}

inline std::vector<BwsTuple> read_tuples(const std::vector<std::string>& lines) {
  std::vector<BwsTuple> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = tsv::split(lines[i]);
    if (f.size() != 5) throw DataError("tuples line " + std::to_string(i + 1) + ": expected 5 fields");
    BwsTuple t;
    t.tuple_id = tsv::to_int(f[0], "tuple_id");
    for (int k = 0; k < 4; ++k) t.sentence_ids[k] = tsv::to_int(f[k + 1], "sentence id");
    out.push_back(t);
  }
  return out;
}

/// Judgments TSV: tuple_id, annotator_id, best_id, worst_id.
inline std::vector<BwsJudgment> read_judgments(const std::vector<std::string>& lines) {
  std::vector<BwsJudgment> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = tsv::split(lines[i]);
    if (f.size() != 4) throw DataError("judgments line " + std::to_string(i + 1) + ": expected 4 fields");
    out.push_back({tsv::to_int(f[0], "tuple_id"), std::string(f[1]), tsv::to_int(f[2], "best_id"),
                   tsv::to_int(f[3], "worst_id")});
  }
  return out;
}

inline void write_judgments(std::ostream& out, std::span<const BwsJudgment> judgments) {
  for (const auto& j : judgments) {
    out << j.tuple_id << '\t' << j.annotator_id << '\t' << j.best_id << '\t' << j.worst_id << '\n';
  }
}

/// Scores TSV: sentence_id, raw, normalized, n_ratings.
inline void write_scores(std::ostream& out, std::span<const InformativenessScore> scores) {
  for (const auto& s : scores) {
    out << s.sentence_id << '\t' << tsv::format_double(s.raw) << '\t' << tsv::format_double(s.normalized) << '\t'
        << s.n_ratings << '\n';
  }
}

inline std::vector<InformativenessScore> read_scores(const std::vector<std::string>& lines) {
  std::vector<InformativenessScore> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = tsv::split(lines[i]);
    if (f.size() != 4) throw DataError("scores line " + std::to_string(i + 1) + ": expected 4 fields");
    InformativenessScore s;
    s.sentence_id = tsv::to_int(f[0], "sentence_id");
    s.raw = tsv::to_double(f[1], "raw");
    s.normalized = tsv::to_double(f[2], "normalized");
    s.n_ratings = static_cast<std::size_t>(tsv::to_int(f[3], "n_ratings"));
    out.push_back(s);
  }
  return out;
}

}  // namespace ctxinfo::annotation

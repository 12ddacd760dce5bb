#pragma once

// Corpus ingestion: tokenization, target-word indexing, length / density
// filtering and the target / non-target split.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctxinfo/error.hpp"
#include "ctxinfo/tsv.hpp"

namespace ctxinfo::corpus {

using SentenceId = std::int64_t;

struct SentenceRecord {
  SentenceId id = 0;
  std::vector<std::string> tokens;
  std::optional<std::size_t> target_pos;
  std::optional<std::string> target_word;
  std::int64_t source_line = 0;

  bool has_target() const { return target_pos.has_value(); }
};

struct CorpusSplit {
  std::vector<SentenceId> non_target_ids;
  std::map<std::string, std::vector<SentenceId>> target_map;
};

struct FilterPolicy {
  std::size_t min_len = 10;
  std::size_t max_len = 30;
  std::size_t min_sentences_per_target = 512;
  bool require_single_occurrence = true;

  void validate() const {
    if (min_len == 0 || min_len > max_len) {
      throw ConfigError("filter policy requires 0 < min_len <= max_len");
    }
    if (min_sentences_per_target < 1) {
      throw ConfigError("filter policy requires min_sentences_per_target >= 1");
    }
  }
};

enum class ExclusionReason { MultiTarget, RepeatTarget, Length, SparseTarget };

inline std::string_view reason_code(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::MultiTarget: return "MULTI_TARGET";
    case ExclusionReason::RepeatTarget: return "REPEAT_TARGET";
    case ExclusionReason::Length: return "LEN";
    case ExclusionReason::SparseTarget: return "SPARSE_TARGET";
  }
  return "?";
}

struct Exclusion {
  SentenceId id = 0;
  ExclusionReason reason = ExclusionReason::Length;
  std::string detail;  // offending target word(s)
};

/// Lowercases ASCII, splits on whitespace and detaches every ASCII
/// punctuation character as its own token. Bytes >= 0x80 are word bytes.
inline std::vector<std::string> tokenize(std::string_view raw_line) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : raw_line) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return tokens;
}

/// One record per non-empty line; ids are consecutive from 0, source_line is
/// 1-based.
inline std::vector<SentenceRecord> read_corpus(const std::vector<std::string>& lines) {
  std::vector<SentenceRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tokens = tokenize(lines[i]);
    if (tokens.empty()) continue;
    SentenceRecord rec;
    rec.id = static_cast<SentenceId>(out.size());
    rec.tokens = std::move(tokens);
    rec.source_line = static_cast<std::int64_t>(i + 1);
    out.push_back(std::move(rec));
  }
  return out;
}

struct IndexResult {
  std::vector<SentenceRecord> sentences;
  std::vector<Exclusion> excluded;            // MULTI_TARGET / REPEAT_TARGET
  std::map<std::string, std::size_t> occurrences;  // total token occurrences per target
};

/// Marks sentences holding exactly one occurrence of exactly one target.
/// Sentences with several distinct targets or a repeated target are reported
/// as excluded and keep no target annotation.
inline IndexResult index_targets(std::vector<SentenceRecord> sentences,
                                 const std::set<std::string>& targets) {
  IndexResult result;
  for (const auto& t : targets) result.occurrences[t] = 0;
  for (auto& s : sentences) {
    s.target_pos.reset();
    s.target_word.reset();
    std::map<std::string, std::vector<std::size_t>> hits;
    for (std::size_t p = 0; p < s.tokens.size(); ++p) {
      if (targets.count(s.tokens[p])) hits[s.tokens[p]].push_back(p);
    }
    for (const auto& [word, positions] : hits) result.occurrences[word] += positions.size();
    if (hits.size() > 1) {
      std::string detail;
      for (const auto& [word, positions] : hits) detail += (detail.empty() ? "" : ",") + word;
      result.excluded.push_back({s.id, ExclusionReason::MultiTarget, detail});
    } else if (hits.size() == 1) {
      const auto& [word, positions] = *hits.begin();
      if (positions.size() > 1) {
        result.excluded.push_back({s.id, ExclusionReason::RepeatTarget, word});
      } else {
        s.target_pos = positions.front();
        s.target_word = word;
      }
    }
  }
  result.sentences = std::move(sentences);
  return result;
}

struct SplitResult {
  CorpusSplit split;
  std::vector<Exclusion> excluded;  // every exclusion, ordered by sentence id
  std::vector<std::string> dropped_targets;
};

/// Applies the length bounds to target sentences, drops targets with too few
/// surviving sentences (their sentences are quarantined, never recycled into
/// the non-target pool) and collects the non-target set.
inline SplitResult filter_and_split(const IndexResult& indexed, const std::set<std::string>& targets,
                                    const FilterPolicy& policy) {
  policy.validate();
  if (targets.empty()) throw ConfigError("target word set is empty");

  SplitResult result;
  result.excluded = indexed.excluded;
  std::set<SentenceId> already_excluded;
  for (const auto& e : indexed.excluded) already_excluded.insert(e.id);

  std::map<std::string, std::vector<SentenceId>> candidates;
  for (const auto& t : targets) candidates[t];
  for (const auto& s : indexed.sentences) {
    if (already_excluded.count(s.id)) continue;
    if (!s.has_target()) {
      result.split.non_target_ids.push_back(s.id);
      continue;
    }
    const std::size_t len = s.tokens.size();
    if (len < policy.min_len || len > policy.max_len) {
      result.excluded.push_back({s.id, ExclusionReason::Length, *s.target_word});
      continue;
    }
    candidates[*s.target_word].push_back(s.id);
  }

  for (auto& [word, ids] : candidates) {
    if (ids.size() >= policy.min_sentences_per_target) {
      result.split.target_map[word] = std::move(ids);
    } else {
      result.dropped_targets.push_back(word);
      for (SentenceId id : ids) result.excluded.push_back({id, ExclusionReason::SparseTarget, word});
    }
  }
  if (result.split.target_map.empty()) {
    throw DataError("every target word was dropped (fewer than " +
                    std::to_string(policy.min_sentences_per_target) + " usable sentences each)");
  }
  std::sort(result.excluded.begin(), result.excluded.end(),
            [](const Exclusion& a, const Exclusion& b) { return a.id < b.id; });
  return result;
}

// ---------------------------------------------------------------------------
// TSV persistence

/// sentences.tsv: id, target_word or "-", target_pos or -1, tokens.
inline void write_sentences(std::ostream& out, const std::vector<SentenceRecord>& sentences) {
  for (const auto& s : sentences) {
    out << s.id << '\t' << (s.target_word ? *s.target_word : "-") << '\t'
        << (s.target_pos ? static_cast<std::int64_t>(*s.target_pos) : -1) << '\t'
        << tsv::join(s.tokens) << '\n';
  }
}

inline std::vector<SentenceRecord> read_sentences(const std::vector<std::string>& lines) {
  std::vector<SentenceRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = tsv::split(lines[i]);
    if (f.size() != 4) {
      throw DataError("sentences.tsv line " + std::to_string(i + 1) + ": expected 4 fields");
    }
    SentenceRecord s;
    s.id = tsv::to_int(f[0], "sentence id");
    s.tokens = tsv::split_whitespace(f[3]);
    s.source_line = static_cast<std::int64_t>(i + 1);
    const std::int64_t pos = tsv::to_int(f[2], "target_pos");
    if (f[1] != "-") {
      if (pos < 0 || static_cast<std::size_t>(pos) >= s.tokens.size() ||
          s.tokens[static_cast<std::size_t>(pos)] != f[1]) {
        throw DataError("sentences.tsv line " + std::to_string(i + 1) +
                        ": target_pos does not point at target_word");
      }
      s.target_pos = static_cast<std::size_t>(pos);
      s.target_word = std::string(f[1]);
    }
    if (s.tokens.empty()) throw DataError("sentences.tsv line " + std::to_string(i + 1) + ": no tokens");
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<SentenceRecord> read_sentences(const std::filesystem::path& path) {
  return read_sentences(tsv::read_lines(path));
}

inline void write_exclusions(std::ostream& out, const std::vector<Exclusion>& excluded,
                             const std::vector<SentenceRecord>& sentences) {
  std::map<SentenceId, std::int64_t> line_of;
  for (const auto& s : sentences) line_of[s.id] = s.source_line;
  for (const auto& e : excluded) {
    out << e.id << '\t' << line_of[e.id] << '\t' << reason_code(e.reason) << '\t' << e.detail << '\n';
  }
}

inline std::set<std::string> read_targets(const std::vector<std::string>& lines) {
  std::set<std::string> targets;
  for (const auto& line : lines) {
    for (auto& tok : tokenize(line)) targets.insert(std::move(tok));
  }
  return targets;
}

/// Builds a lookup from id to record.
inline std::map<SentenceId, const SentenceRecord*> by_id(const std::vector<SentenceRecord>& sentences) {
  std::map<SentenceId, const SentenceRecord*> out;
  for (const auto& s : sentences) out[s.id] = &s;
  return out;
}

}  // namespace ctxinfo::corpus

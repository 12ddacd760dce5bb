#pragma once

// Constructed corpora with known structure: a topic world whose target
// sentences carry a controlled amount of topical evidence, a two-cluster
// corpus for embedding sanity checks, and a cue-lexicon scoring task.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/error.hpp"
#include "ctxinfo/eval.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/scorer.hpp"

namespace ctxinfo::synthetic {

inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> words{"the", "a",    "of",    "to",   "and",  "in",   "is",   "was",
                                              "that", "it",  "for",   "on",   "with", "as",   "at",   "by",
                                              "this", "from", "or",   "but",  "not",  "be",   "are",  "have",
                                              "had",  "were", "which", "one", "all",  "there"};
  return words;
}

/// Unique pronounceable word for an index: three consonant-vowel syllables.
inline std::string syllable_word(std::size_t index) {
  static constexpr char kCons[] = "bdfgklmnprstvz";
  static constexpr char kVow[] = "aeiou";
  constexpr std::size_t nc = sizeof(kCons) - 1;
  constexpr std::size_t nv = sizeof(kVow) - 1;
  std::string w;
  for (int s = 0; s < 3; ++s) {
    const std::size_t syl = index % (nc * nv);
    index /= nc * nv;
    w += kCons[syl / nv];
    w += kVow[syl % nv];
  }
  return w;
}

struct TopicWorldConfig {
  std::size_t topics = 8;
  std::size_t words_per_topic = 40;
  std::size_t targets_per_topic = 4;
  std::size_t sentences_per_target = 300;
  std::size_t background_sentences = 16000;
  std::size_t min_len = 10;
  std::size_t max_len = 20;
  double background_content_rate = 0.5;
  double own_topic_rate = 0.8;
  double cue_scale = 0.8;
  double frame_fraction = 0.5;  // share of target sentences that are bare function-word frames
  std::uint64_t seed = 7;
};

struct TopicWorld {
  std::vector<std::vector<std::string>> topic_words;
  std::vector<std::string> targets;
  std::map<std::string, std::size_t> target_topic;
  std::vector<std::string> lines;            // one sentence per line; line i becomes sentence id i
  std::map<std::int64_t, double> scores;     // target sentences only
  std::vector<eval::SimilarityPair> similarity;
};

/// Ring of topics. Background sentences mix own-topic content words, some
/// neighbouring-topic words and function words. A target sentence draws a
/// latent u ~ U(0,1); each context slot is an own-topic content word with
/// probability max(0, (u - f) / (1 - f)) * cue_scale, f = frame_fraction, and
/// a function word otherwise, so sentences with u < f are bare frames. Its score is the
/// fraction of context slots holding a topic word. Similarity pairs rate
/// target pairs 3 (same topic), 1 (neighbouring topics) or 0.
inline TopicWorld make_topic_world(const TopicWorldConfig& cfg) {
  if (cfg.topics < 3 || cfg.words_per_topic == 0 || cfg.targets_per_topic == 0 || cfg.min_len < 3 ||
      cfg.min_len > cfg.max_len || !(cfg.frame_fraction >= 0.0 && cfg.frame_fraction < 1.0)) {
    throw ConfigError("topic world config is out of range");
  }
  TopicWorld w;
  Rng rng(cfg.seed);
  std::size_t next = 0;
  w.topic_words.resize(cfg.topics);
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t i = 0; i < cfg.words_per_topic; ++i) w.topic_words[t].push_back(syllable_word(next++));
  }
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t i = 0; i < cfg.targets_per_topic; ++i) {
      const auto name = syllable_word(next++);
      w.targets.push_back(name);
      w.target_topic[name] = t;
    }
  }
  const auto& fw = function_words();
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.uniform_index(v.size())]; };
  auto length = [&] { return cfg.min_len + rng.uniform_index(cfg.max_len - cfg.min_len + 1); };

  struct Line {
    std::string text;
    double score;
    bool target;
  };
  std::vector<Line> all;
  for (std::size_t i = 0; i < cfg.background_sentences; ++i) {
    const std::size_t topic = rng.uniform_index(cfg.topics);
    const std::size_t n = length();
    std::vector<std::string> toks;
    for (std::size_t j = 0; j < n; ++j) {
      if (rng.uniform01() < cfg.background_content_rate) {
        std::size_t tp = topic;
        if (rng.uniform01() >= cfg.own_topic_rate) tp = (topic + (rng.uniform01() < 0.5 ? 1 : cfg.topics - 1)) % cfg.topics;
        toks.push_back(pick(w.topic_words[tp]));
      } else {
        toks.push_back(pick(fw));
      }
    }
    all.push_back({tsv::join(toks), 0.0, false});
  }
  for (const auto& target : w.targets) {
    const std::size_t topic = w.target_topic[target];
    for (std::size_t i = 0; i < cfg.sentences_per_target; ++i) {
      const double u = rng.uniform01();
      const double p = std::max(0.0, (u - cfg.frame_fraction) / (1.0 - cfg.frame_fraction)) * cfg.cue_scale;
      const std::size_t n = length();
      const std::size_t tpos = rng.uniform_index(n);
      std::vector<std::string> toks;
      std::size_t cues = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == tpos) {
          toks.push_back(target);
        } else if (rng.uniform01() < p) {
          toks.push_back(pick(w.topic_words[topic]));
          ++cues;
        } else {
          toks.push_back(pick(fw));
        }
      }
      all.push_back({tsv::join(toks), static_cast<double>(cues) / static_cast<double>(n - 1), true});
    }
  }
  rng.shuffle(all);
  for (std::size_t i = 0; i < all.size(); ++i) {
    w.lines.push_back(all[i].text);
    if (all[i].target) w.scores[static_cast<std::int64_t>(i)] = all[i].score;
  }
  for (std::size_t a = 0; a < w.targets.size(); ++a) {
    for (std::size_t b = a + 1; b < w.targets.size(); ++b) {
      const std::size_t ta = w.target_topic[w.targets[a]];
      const std::size_t tb = w.target_topic[w.targets[b]];
      const std::size_t gap = std::min((ta + cfg.topics - tb) % cfg.topics, (tb + cfg.topics - ta) % cfg.topics);
      const double human = gap == 0 ? 3.0 : gap == 1 ? 1.0 : 0.0;
      w.similarity.push_back({w.targets[a], w.targets[b], human, "", ""});
    }
  }
  return w;
}

// ---------------------------------------------------------------------------

struct TwoTopicCorpus {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> topic_a;
  std::vector<std::string> topic_b;
};

/// Two disjoint content clusters (animals, household objects) sharing a
/// small set of function words. Sentences stay within one cluster.
inline TwoTopicCorpus make_two_topic_corpus(std::size_t tokens, std::uint64_t seed, double function_rate = 0.3) {
  TwoTopicCorpus c;
  c.topic_a = {"cat",   "dog",    "horse", "cow",    "sheep",  "goat",  "tiger", "lion",  "wolf",   "fox",
               "bear",  "rabbit", "mouse", "camel",  "zebra",  "otter", "eagle", "falcon", "parrot", "snake"};
  c.topic_b = {"door",  "window", "table", "chair", "lamp",   "sofa",  "shelf",  "carpet", "mirror", "kettle",
               "stove", "sink",   "bed",   "pillow", "curtain", "drawer", "closet", "fridge", "spoon", "plate"};
  const auto& fw = function_words();
  Rng rng(seed);
  std::size_t produced = 0;
  while (produced < tokens) {
    const auto& topic = rng.uniform01() < 0.5 ? c.topic_a : c.topic_b;
    const std::size_t n = 8 + rng.uniform_index(9);
    std::vector<std::string> s;
    for (std::size_t j = 0; j < n; ++j) {
      s.push_back(rng.uniform01() < function_rate ? fw[rng.uniform_index(fw.size())]
                                                  : topic[rng.uniform_index(topic.size())]);
    }
    produced += n;
    c.sentences.push_back(std::move(s));
  }
  return c;
}

// ---------------------------------------------------------------------------

struct CueTaskConfig {
  std::size_t cue_words = 20;
  std::size_t filler_words = 200;
  std::size_t target_words = 10;
  std::size_t min_len = 10;
  std::size_t max_len = 20;
  double max_rate = 0.6;
};

/// Sentences with one target slot; each context slot is a cue-lexicon word
/// with a per-sentence rate drawn from U(0, max_rate). The score is the
/// fraction of context tokens that are cue words.
inline std::vector<scorer::LabeledSentence> make_cue_task(std::size_t n, std::uint64_t seed,
                                                          const CueTaskConfig& cfg = {}, std::int64_t first_id = 0) {
  Rng rng(seed);
  std::vector<scorer::LabeledSentence> out;
  auto word = [](const char* prefix, std::size_t i) { return std::string(prefix) + syllable_word(i); };
  for (std::size_t i = 0; i < n; ++i) {
    const double rate = rng.uniform(0.0, cfg.max_rate);
    const std::size_t len = cfg.min_len + rng.uniform_index(cfg.max_len - cfg.min_len + 1);
    const std::size_t tpos = rng.uniform_index(len);
    scorer::LabeledSentence ex;
    ex.sentence.id = first_id + static_cast<std::int64_t>(i);
    std::size_t cues = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if (j == tpos) {
        ex.sentence.tokens.push_back(word("tq", rng.uniform_index(cfg.target_words)));
      } else if (rng.uniform01() < rate) {
        ex.sentence.tokens.push_back(word("cu", rng.uniform_index(cfg.cue_words)));
        ++cues;
      } else {
        ex.sentence.tokens.push_back(word("fi", rng.uniform_index(cfg.filler_words)));
      }
    }
    ex.sentence.target_pos = tpos;
    ex.sentence.target_word = ex.sentence.tokens[tpos];
    ex.score = static_cast<double>(cues) / static_cast<double>(len - 1);
    out.push_back(std::move(ex));
  }
  return out;
}

/// Relation-template sentences over random word pairs.
inline std::vector<eval::RelationExample> make_relation_examples(std::size_t per_relation, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<eval::RelationExample> out;
  for (const auto& t : eval::kRelationTemplates) {
    for (std::size_t i = 0; i < per_relation; ++i) {
      const auto x = syllable_word(rng.uniform_index(2000));
      auto y = syllable_word(rng.uniform_index(2000));
      if (y == x) y += "o";
      out.push_back(eval::make_relation_example(t.relation, x, y));
    }
  }
  return out;
}

}  // namespace ctxinfo::synthetic

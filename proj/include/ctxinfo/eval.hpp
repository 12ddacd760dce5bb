#pragma once

// Evaluation protocols: target-grouped cross-validation, word-similarity
// correlation, nonce pair scoring and attention-rank probes on relation
// template sentences.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxinfo/embeddings.hpp"
#include "ctxinfo/error.hpp"
#include "ctxinfo/metrics.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/scorer.hpp"
#include "ctxinfo/tsv.hpp"

namespace ctxinfo::eval {

using scorer::LabeledSentence;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Grouped k-fold

using FoldAssignment = std::map<std::string, std::size_t>;

/// Greedy largest-first: targets by descending sentence count (equal counts
/// in seeded random order), each placed in the currently smallest fold.
inline FoldAssignment group_kfold(const std::map<std::string, std::size_t>& target_counts, std::size_t k,
                                  std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (target_counts.size() < k) {
    throw DataError("group k-fold: " + std::to_string(target_counts.size()) + " targets for " + std::to_string(k) +
                    " folds");
  }
  std::vector<std::pair<std::string, std::size_t>> order(target_counts.begin(), target_counts.end());
  Rng rng(seed);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::size_t> load(k, 0);
  FoldAssignment out;
  for (const auto& [target, n] : order) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    out[target] = f;
    load[f] += n;
  }
  return out;
}

inline std::map<std::string, std::size_t> target_counts(std::span<const LabeledSentence> data) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : data) {
    if (!ex.sentence.target_word) throw DataError("sentence " + std::to_string(ex.sentence.id) + " has no target word");
    ++counts[*ex.sentence.target_word];
  }
  return counts;
}

struct RegressionMetrics {
  double rmse = 0.0;
  double auc_bottom20 = 0.0;
  double auc_median = 0.0;
  double auc_top20 = 0.0;
};

/// RMSE plus ROC-AUC for each label threshold, labels taken from the truth.
/// The bottom-20 task detects low scores, so it ranks by the negated
/// prediction; a useful model lands above 0.5 on all three.
inline RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth,
                                            std::span<const std::int64_t> ids) {
  RegressionMetrics m;
  m.rmse = metrics::rmse(pred, truth);
  std::vector<double> negated(pred.begin(), pred.end());
  for (auto& v : negated) v = -v;
  m.auc_bottom20 = metrics::roc_auc(negated, metrics::binary_labels(truth, ids, metrics::LabelMode::Bottom20));
  m.auc_median = metrics::roc_auc(pred, metrics::binary_labels(truth, ids, metrics::LabelMode::Median));
  m.auc_top20 = metrics::roc_auc(pred, metrics::binary_labels(truth, ids, metrics::LabelMode::Top20));
  return m;
}

/// Fits on the training span and predicts every test sentence.
using FitPredict =
    std::function<std::vector<double>(std::span<const LabeledSentence> train, std::span<const LabeledSentence> test)>;

inline RegressionMetrics evaluate_split(std::span<const LabeledSentence> train, std::span<const LabeledSentence> test,
                                        const FitPredict& fit_predict) {
  const auto pred = fit_predict(train, test);
  if (pred.size() != test.size()) throw DataError("model returned the wrong number of predictions");
  std::vector<double> truth;
  std::vector<std::int64_t> ids;
  for (const auto& ex : test) {
    truth.push_back(ex.score);
    ids.push_back(ex.sentence.id);
  }
  return regression_metrics(pred, truth, ids);
}

struct CvResult {
  std::vector<RegressionMetrics> folds;
  metrics::MeanCi rmse, auc_bottom20, auc_median, auc_top20;
};

inline CvResult summarize(std::vector<RegressionMetrics> folds) {
  CvResult r;
  r.folds = std::move(folds);
  auto column = [&](double RegressionMetrics::*field) {
    std::vector<double> v;
    for (const auto& f : r.folds) v.push_back(f.*field);
    return metrics::mean_ci95(v);
  };
  r.rmse = column(&RegressionMetrics::rmse);
  r.auc_bottom20 = column(&RegressionMetrics::auc_bottom20);
  r.auc_median = column(&RegressionMetrics::auc_median);
  r.auc_top20 = column(&RegressionMetrics::auc_top20);
  return r;
}

/// Target-grouped k-fold cross-validation; no target is ever in both the
/// training and the test side of a fold.
inline CvResult cross_validate(std::span<const LabeledSentence> data, std::size_t k, std::uint64_t seed,
                               const FitPredict& fit_predict) {
  const auto folds = group_kfold(target_counts(data), k, seed);
  std::vector<RegressionMetrics> per_fold;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<LabeledSentence> train, test;
    for (const auto& ex : data) (folds.at(*ex.sentence.target_word) == f ? test : train).push_back(ex);
    per_fold.push_back(evaluate_split(train, test, fit_predict));
  }
  return summarize(std::move(per_fold));
}

/// Train on one dataset, test on another.
inline RegressionMetrics cross_train(std::span<const LabeledSentence> train, std::span<const LabeledSentence> test,
                                     const FitPredict& fit_predict) {
  return evaluate_split(train, test, fit_predict);
}

// ---------------------------------------------------------------------------
// Word similarity

struct SimilarityPair {
  std::string word_a;
  std::string word_b;
  double human_score = 0.0;
  std::string pos;
  std::string assoc;
};

/// TSV: word_a, word_b, human_score[, pos[, assoc]].
inline std::vector<SimilarityPair> read_similarity(const std::vector<std::string>& lines) {
  std::vector<SimilarityPair> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const auto f = tsv::split(lines[i]);
    if (f.size() < 3) throw DataError("similarity line " + std::to_string(i + 1) + ": expected at least 3 fields");
    SimilarityPair p{std::string(f[0]), std::string(f[1]), tsv::to_double(f[2], "human_score"), "", ""};
    if (f.size() > 3) p.pos = std::string(f[3]);
    if (f.size() > 4) p.assoc = std::string(f[4]);
    if (p.word_a == p.word_b) throw DataError("similarity line " + std::to_string(i + 1) + ": identical words");
    out.push_back(std::move(p));
  }
  return out;
}

struct SimilarityResult {
  double r = 0.0;
  double coverage = 0.0;
  std::size_t scored = 0;
  std::size_t total = 0;
};

/// Spearman r between cosine and human scores over the pairs the model can
/// represent; the rest only lower the coverage.
inline SimilarityResult similarity_eval(const embeddings::EmbeddingModel& model, std::span<const SimilarityPair> pairs) {
  if (pairs.empty()) throw DataError("similarity task has no pairs");
  std::vector<double> cos, human;
  for (const auto& p : pairs) {
    if (!embeddings::representable(model, p.word_a) || !embeddings::representable(model, p.word_b)) continue;
    cos.push_back(embeddings::cosine(embeddings::word_vector(model, p.word_a), embeddings::word_vector(model, p.word_b)));
    human.push_back(p.human_score);
  }
  if (cos.size() < 3) throw DataError("fewer than 3 similarity pairs are covered by the model");
  SimilarityResult r;
  r.r = metrics::spearman(cos, human);
  r.scored = cos.size();
  r.total = pairs.size();
  r.coverage = static_cast<double>(cos.size()) / static_cast<double>(pairs.size());
  return r;
}

/// Mean of cos(nonce_a, background_b) and cos(nonce_b, background_a).
inline double nonce_pair_score(const VectorXd& nonce_a, const VectorXd& nonce_b, const VectorXd& background_a,
                               const VectorXd& background_b) {
  return 0.5 * (embeddings::cosine(nonce_a, background_b) + embeddings::cosine(nonce_b, background_a));
}

inline double nonce_pair_score(const embeddings::EmbeddingModel& background, const std::map<std::string, VectorXd>& nonces,
                               const SimilarityPair& pair) {
  const auto a = nonces.find(pair.word_a);
  const auto b = nonces.find(pair.word_b);
  if (a == nonces.end() || b == nonces.end()) {
    throw DataError("nonce pair " + pair.word_a + "/" + pair.word_b + " lacks a learned direction");
  }
  return nonce_pair_score(a->second, b->second, embeddings::word_vector(background, pair.word_a),
                          embeddings::word_vector(background, pair.word_b));
}

// ---------------------------------------------------------------------------
// Relation templates and attention-rank evaluation

struct RelationExample {
  std::vector<std::string> tokens;
  std::size_t target_pos = 0;
  std::size_t pair_pos = 0;
  std::size_t rcue_pos = 0;
  std::string relation;

  void validate() const {
    const std::size_t n = tokens.size();
    if (target_pos >= n || pair_pos >= n || rcue_pos >= n) throw DataError("relation example position out of range");
    if (target_pos == pair_pos || target_pos == rcue_pos || pair_pos == rcue_pos) {
      throw DataError("relation example positions must be distinct");
    }
  }
};

struct RelationTemplate {
  std::string_view relation;
  std::string_view text;  // X = target, Y = pair word
  std::string_view cue;
};

inline constexpr RelationTemplate kRelationTemplates[] = {
    {"IsA", "X is a kind of Y", "kind"},
    {"Antonym", "X can be used as the opposite of Y", "opposite"},
    {"Synonym", "X can be used with the same meaning of Y", "same"},
    {"PartOf", "X is part of Y", "part"},
    {"MemberOf", "X is member of Y", "member"},
    {"MadeOf", "X is made of Y", "made"},
    {"Entailment", "If X is true, then also Y is true", "true"},
    {"HasA", "X can have or can contain Y", "have"},
    {"HasProperty", "Y is to specify X", "specify"},
};

/// Fills a template; the cue position is its first occurrence.
inline RelationExample make_relation_example(std::string_view relation, const std::string& x, const std::string& y) {
  for (const auto& t : kRelationTemplates) {
    if (t.relation != relation) continue;
    RelationExample ex;
    ex.relation = std::string(relation);
    bool have_cue = false;
    for (const auto& raw : corpus::tokenize(t.text)) {
      if (raw == "x") {
        ex.target_pos = ex.tokens.size();
        ex.tokens.push_back(x);
      } else if (raw == "y") {
        ex.pair_pos = ex.tokens.size();
        ex.tokens.push_back(y);
      } else {
        if (!have_cue && raw == t.cue) {
          ex.rcue_pos = ex.tokens.size();
          have_cue = true;
        }
        ex.tokens.push_back(raw);
      }
    }
    ex.validate();
    return ex;
  }
  throw ConfigError("unknown relation '" + std::string(relation) + "'");
}

/// TSV: space-joined tokens, target_pos, pair_pos, rcue_pos, relation.
inline std::vector<RelationExample> read_relations(const std::vector<std::string>& lines) {
  std::vector<RelationExample> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = tsv::split(lines[i]);
    if (f.size() != 5) throw DataError("relation line " + std::to_string(i + 1) + ": expected 5 fields");
    RelationExample ex;
    ex.tokens = tsv::split_whitespace(f[0]);
    ex.target_pos = static_cast<std::size_t>(tsv::to_int(f[1], "target_pos"));
    ex.pair_pos = static_cast<std::size_t>(tsv::to_int(f[2], "pair_pos"));
    ex.rcue_pos = static_cast<std::size_t>(tsv::to_int(f[3], "rcue_pos"));
    ex.relation = std::string(f[4]);
    ex.validate();
    out.push_back(std::move(ex));
  }
  return out;
}

inline void write_relations(std::ostream& out, std::span<const RelationExample> examples) {
  for (const auto& ex : examples) {
    out << tsv::join(ex.tokens) << '\t' << ex.target_pos << '\t' << ex.pair_pos << '\t' << ex.rcue_pos << '\t'
        << ex.relation << '\n';
  }
}

struct ContextRanks {
  double pair = 0.0;
  double rcue = 0.0;
};

/// Normalized ranks of the pair and cue words among the context positions
/// (the target is not a candidate).
inline ContextRanks context_ranks(std::span<const double> sentence_weights, const RelationExample& ex) {
  std::vector<double> w;
  std::size_t pair_idx = 0, rcue_idx = 0;
  for (std::size_t p = 0; p < ex.tokens.size(); ++p) {
    if (p == ex.target_pos) continue;
    if (p == ex.pair_pos) pair_idx = w.size();
    if (p == ex.rcue_pos) rcue_idx = w.size();
    w.push_back(sentence_weights[p]);
  }
  return {metrics::normalized_rank(w, pair_idx), metrics::normalized_rank(w, rcue_idx)};
}

struct RelationSummary {
  std::string relation;
  metrics::MeanCi pair, rcue, random_pair, random_rcue;
};

/// Attention weight per token of one example (index = token position).
inline std::vector<double> token_attention(const scorer::ScorerParams& params, const scorer::EmbeddingBackbone& backbone,
                                           const RelationExample& ex, std::size_t max_len) {
  if (ex.tokens.size() > max_len) throw DataError("relation example is longer than the scorer window");
  corpus::SentenceRecord s;
  s.tokens = ex.tokens;
  s.target_pos = ex.target_pos;
  s.target_word = ex.tokens[ex.target_pos];
  const auto enc = backbone.encode(s, max_len);
  const VectorXd w = scorer::attention_weights(enc.query, enc.context, enc.mask, params.attention, params.mask_mode);
  return std::vector<double>(w.data(), w.data() + ex.tokens.size());
}

/// Per-relation (and "ALL") mean normalized ranks with 95% intervals, plus a
/// baseline that gives every context word a uniform random weight.
inline std::vector<RelationSummary> relation_eval(std::span<const RelationExample> examples,
                                                  const std::function<std::vector<double>(const RelationExample&)>& weights,
                                                  std::uint64_t seed) {
  if (examples.empty()) throw DataError("relation evaluation needs at least one example");
  std::map<std::string, std::vector<double>> pair, rcue, rpair, rrcue;
  Rng rng(seed);
  for (const auto& ex : examples) {
    ex.validate();
    const auto w = weights(ex);
    const auto r = context_ranks(w, ex);
    std::vector<double> noise(ex.tokens.size());
    for (auto& x : noise) x = rng.uniform01();
    const auto b = context_ranks(noise, ex);
    for (const std::string& key : {ex.relation, std::string("ALL")}) {
      pair[key].push_back(r.pair);
      rcue[key].push_back(r.rcue);
      rpair[key].push_back(b.pair);
      rrcue[key].push_back(b.rcue);
    }
  }
  std::vector<RelationSummary> out;
  for (const auto& [key, v] : pair) {
    out.push_back({key, metrics::mean_ci95(v), metrics::mean_ci95(rcue[key]), metrics::mean_ci95(rpair[key]),
                   metrics::mean_ci95(rrcue[key])});
  }
  return out;
}

inline std::vector<RelationSummary> relation_eval(const scorer::ScorerParams& params,
                                                  const scorer::EmbeddingBackbone& backbone,
                                                  std::span<const RelationExample> examples, std::size_t max_len,
                                                  std::uint64_t seed) {
  return relation_eval(
      examples, [&](const RelationExample& ex) { return token_attention(params, backbone, ex, max_len); }, seed);
}

}  // namespace ctxinfo::eval

#pragma once

// Skip-gram with negative sampling, the subword (character n-gram) variant,
// incremental updates and few-shot nonce learning against a frozen model.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ctxinfo/error.hpp"
#include "ctxinfo/metrics.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/tsv.hpp"

namespace ctxinfo::embeddings {

using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::VectorXd;
using TokenSentence = std::vector<std::string>;

struct Vocab {
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  std::unordered_map<std::string, int> index;
  std::uint64_t total = 0;

  std::size_t size() const { return words.size(); }
  int id(const std::string& w) const {
    const auto it = index.find(w);
    return it == index.end() ? -1 : it->second;
  }
  bool contains(const std::string& w) const { return index.count(w) != 0; }

  int add(const std::string& w, std::uint64_t count) {
    const int id = static_cast<int>(words.size());
    words.push_back(w);
    counts.push_back(count);
    index.emplace(w, id);
    total += count;
    return id;
  }

  void relabel(int id, const std::string& w) {
    if (index.count(w)) throw DataError("relabel: word '" + w + "' already in vocabulary");
    index.erase(words[static_cast<std::size_t>(id)]);
    words[static_cast<std::size_t>(id)] = w;
    index.emplace(w, id);
  }
};

/// Words with count >= min_count, ordered by descending count then word.
inline Vocab build_vocab(std::span<const TokenSentence> corpus, std::size_t min_count) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& s : corpus)
    for (const auto& w : s) ++counts[w];
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  if (kept.empty()) throw DataError("vocabulary is empty after the min_count cutoff of " + std::to_string(min_count));
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [w, c] : kept) v.add(w, c);
  return v;
}

/// Draws ids with probability proportional to count^power.
class NegativeSampler {
 public:
  NegativeSampler() = default;
  NegativeSampler(const Vocab& vocab, double power) {
    cumulative_.reserve(vocab.size());
    double acc = 0.0;
    for (auto c : vocab.counts) {
      acc += std::pow(static_cast<double>(c), power);
      cumulative_.push_back(acc);
    }
  }

  bool empty() const { return cumulative_.empty() || cumulative_.back() <= 0.0; }

  double mass(std::size_t id) const {
    const double lo = id == 0 ? 0.0 : cumulative_[id - 1];
    return (cumulative_[id] - lo) / cumulative_.back();
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform01() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                     static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
  }

 private:
  std::vector<double> cumulative_;
};

struct SubwordConfig {
  std::size_t n_min = 3;
  std::size_t n_max = 6;
  std::size_t bucket_count = std::size_t{1} << 21;

  void validate() const {
    if (n_min < 1 || n_min > n_max) throw ConfigError("subword config requires 1 <= n_min <= n_max");
    if (bucket_count < 1) throw ConfigError("subword bucket_count must be >= 1");
  }
};

namespace detail {

/// Splits UTF-8 text into code points (invalid bytes stand alone).
inline std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = k;
        break;
      }
    }
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace detail

/// Character n-grams of "<word>" for n in [n_min, n_max], plus the whole
/// bracketed word when it is longer than n_max.
inline std::vector<std::string> char_ngram_strings(std::string_view word, const SubwordConfig& cfg) {
  if (word.empty()) throw DataError("char n-grams of an empty word");
  const std::string marked = "<" + std::string(word) + ">";
  const auto cps = detail::code_points(marked);
  std::vector<std::string> out;
  for (std::size_t n = cfg.n_min; n <= cfg.n_max; ++n) {
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      std::string g;
      for (std::size_t k = i; k < i + n; ++k) g += cps[k];
      out.push_back(std::move(g));
    }
  }
  if (cps.size() > cfg.n_max || cps.size() < cfg.n_min) out.push_back(marked);
  return out;
}

inline std::vector<std::uint64_t> char_ngrams(std::string_view word, const SubwordConfig& cfg) {
  std::vector<std::uint64_t> ids;
  for (const auto& g : char_ngram_strings(word, cfg)) ids.push_back(fnv1a64(g) % cfg.bucket_count);
  return ids;
}

enum class Mode { Word2Vec, FastText };

inline std::string_view mode_name(Mode m) { return m == Mode::FastText ? "fasttext" : "word2vec"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "word2vec") return Mode::Word2Vec;
  if (s == "fasttext") return Mode::FastText;
  throw ConfigError("unknown embedding mode '" + std::string(s) + "'");
}

struct SgConfig {
  std::size_t dim = 400;
  std::size_t window = 5;
  std::size_t negatives = 5;
  double alpha = 0.025;
  double subsample_t = 1e-3;
  std::size_t min_count = 50;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double unigram_power = 0.75;
  Mode mode = Mode::Word2Vec;
  SubwordConfig subword;
  std::size_t threads = 1;  // > 1 selects lock-free parallel training

  void validate(bool allow_zero_alpha = false) const {
    if (dim == 0 || window == 0 || negatives == 0 || epochs == 0 || threads == 0) {
      throw ConfigError("skip-gram config: dim, window, negatives, epochs and threads must be positive");
    }
    if (!(alpha > 0.0 || (allow_zero_alpha && alpha == 0.0))) throw ConfigError("skip-gram config: alpha must be positive");
    if (!(subsample_t > 0.0) || !(unigram_power > 0.0)) {
      throw ConfigError("skip-gram config: subsample_t and unigram_power must be positive");
    }
    if (mode == Mode::FastText) subword.validate();
  }
};

struct EmbeddingModel {
  Vocab vocab;
  Table input;
  Table output;
  Mode mode = Mode::Word2Vec;
  SubwordConfig subword;
  Table buckets;                                   // fasttext only
  std::vector<std::vector<std::uint64_t>> ngrams;  // fasttext: bucket ids per vocab word
  NegativeSampler sampler;
  double unigram_power = 0.75;

  std::size_t dim() const { return static_cast<std::size_t>(input.cols()); }

  void rebuild_sampler() { sampler = NegativeSampler(vocab, unigram_power); }

  /// Appends a word with a random input row and a zero output row.
  int add_word(const std::string& w, std::uint64_t count, Rng& rng) {
    const int id = vocab.add(w, count);
    const auto d = input.cols();
    input.conservativeResize(input.rows() + 1, d);
    output.conservativeResize(output.rows() + 1, d);
    const double lim = 0.5 / static_cast<double>(d);
    for (Eigen::Index k = 0; k < d; ++k) input(id, k) = rng.uniform(-lim, lim);
    output.row(id).setZero();
    if (mode == Mode::FastText) ngrams.push_back(char_ngrams(w, subword));
    return id;
  }
};

inline double cosine(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

/// Input-side representation. word2vec: the input row (OOV is an error).
/// fasttext: mean of the whole-word row (if known) and the n-gram buckets.
inline VectorXd word_vector(const EmbeddingModel& m, const std::string& word) {
  const int id = m.vocab.id(word);
  if (m.mode == Mode::Word2Vec) {
    if (id < 0) throw DataError("word '" + word + "' is not in the vocabulary");
    return m.input.row(id).transpose();
  }
  VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(m.dim()));
  double parts = 0.0;
  if (id >= 0) {
    v += m.input.row(id).transpose();
    parts += 1.0;
  }
  for (auto b : char_ngrams(word, m.subword)) {
    v += m.buckets.row(static_cast<Eigen::Index>(b)).transpose();
    parts += 1.0;
  }
  return v / parts;
}

inline bool representable(const EmbeddingModel& m, const std::string& word) {
  return !word.empty() && (m.mode == Mode::FastText || m.vocab.contains(word));
}

namespace detail {

template <bool Atomic>
inline double load(const double* p) {
  if constexpr (Atomic) return std::atomic_ref<double>(*const_cast<double*>(p)).load(std::memory_order_relaxed);
  else return *p;
}

template <bool Atomic>
inline void store(double* p, double v) {
  if constexpr (Atomic) std::atomic_ref<double>(*p).store(v, std::memory_order_relaxed);
  else *p = v;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

/// One positive and several negative logistic terms against input h. Adds
/// the input-side step to neu1e and, unless frozen, steps the output rows.
/// Returns the pair loss at the starting point.
template <bool Atomic>
inline double sgns_kernel(const double* h, double* neu1e, double* output, std::size_t dim, int positive,
                          std::span<const int> negatives, double lr, bool update_output) {
  double loss = 0.0;
  auto term = [&](int r, double label) {
    double* o = output + static_cast<std::size_t>(r) * dim;
    double dot = 0.0;
    for (std::size_t k = 0; k < dim; ++k) dot += load<Atomic>(o + k) * h[k];
    loss -= label > 0.0 ? log_sigmoid(dot) : log_sigmoid(-dot);
    const double g = (label - sigmoid(dot)) * lr;
    for (std::size_t k = 0; k < dim; ++k) neu1e[k] += g * load<Atomic>(o + k);
    if (update_output) {
      for (std::size_t k = 0; k < dim; ++k) store<Atomic>(o + k, load<Atomic>(o + k) + g * h[k]);
    }
  };
  term(positive, 1.0);
  for (int n : negatives) term(n, 0.0);
  return loss;
}

}  // namespace detail

/// -log s(pos.h) - sum log s(-neg.h)
inline double sgns_pair_loss(const VectorXd& h, const VectorXd& positive, const std::vector<VectorXd>& negatives) {
  double loss = -detail::log_sigmoid(positive.dot(h));
  for (const auto& n : negatives) loss -= detail::log_sigmoid(-n.dot(h));
  return loss;
}

/// One plain gradient step of size lr on every vector of the pair loss.
inline void sgns_update(VectorXd& h, VectorXd& positive, std::vector<VectorXd>& negatives, double lr) {
  const std::size_t d = static_cast<std::size_t>(h.size());
  Table out(static_cast<Eigen::Index>(1 + negatives.size()), h.size());
  out.row(0) = positive.transpose();
  std::vector<int> neg_rows;
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i + 1)) = negatives[i].transpose();
    neg_rows.push_back(static_cast<int>(i + 1));
  }
  VectorXd neu1e = VectorXd::Zero(h.size());
  detail::sgns_kernel<false>(h.data(), neu1e.data(), out.data(), d, 0, neg_rows, lr, true);
  h += neu1e;
  positive = out.row(0).transpose();
  for (std::size_t i = 0; i < negatives.size(); ++i) negatives[i] = out.row(static_cast<Eigen::Index>(i + 1)).transpose();
}

struct EpochLog {
  std::size_t epoch = 0;
  std::uint64_t examples = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

namespace detail {

inline std::vector<std::vector<int>> to_ids(const Vocab& vocab, std::span<const TokenSentence> sentences) {
  std::vector<std::vector<int>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    std::vector<int> ids;
    ids.reserve(s.size());
    for (const auto& w : s) {
      const int id = vocab.id(w);
      if (id >= 0) ids.push_back(id);
    }
    out.push_back(std::move(ids));
  }
  return out;
}

struct ShardStats {
  std::uint64_t examples = 0;
  double loss = 0.0;
  double last_lr = 0.0;
};

template <bool Atomic>
inline void train_shard(EmbeddingModel& m, std::span<const std::vector<int>> sentences, const SgConfig& cfg, Rng& rng,
                        std::atomic<std::uint64_t>& processed, double total_work, ShardStats& stats) {
  const std::size_t d = m.dim();
  const bool subword = m.mode == Mode::FastText;
  std::vector<double> h(d), neu1e(d);
  std::vector<int> negs;
  std::vector<int> kept;
  const double total = static_cast<double>(m.vocab.total);
  for (const auto& sent : sentences) {
    const double done = static_cast<double>(processed.load(std::memory_order_relaxed));
    const double lr = cfg.alpha * std::max(1e-4, 1.0 - done / (total_work + 1.0));
    stats.last_lr = lr;
    processed.fetch_add(sent.size(), std::memory_order_relaxed);
    kept.clear();
    for (int w : sent) {
      const double f = static_cast<double>(m.vocab.counts[static_cast<std::size_t>(w)]) / total;
      const double discard = 1.0 - std::sqrt(cfg.subsample_t / f);
      if (discard > 0.0 && rng.uniform01() < discard) continue;
      kept.push_back(w);
    }
    for (std::size_t pos = 0; pos < kept.size(); ++pos) {
      const int center = kept[pos];
      const std::size_t b = 1 + rng.uniform_index(cfg.window);
      const std::size_t lo = pos >= b ? pos - b : 0;
      const std::size_t hi = std::min(kept.size() - 1, pos + b);
      double* in_row = m.input.data() + static_cast<std::size_t>(center) * d;
      const auto* grams = subword ? &m.ngrams[static_cast<std::size_t>(center)] : nullptr;
      const double parts = subword ? 1.0 + static_cast<double>(grams->size()) : 1.0;
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        const int ctx = kept[c];
        for (std::size_t k = 0; k < d; ++k) h[k] = load<Atomic>(in_row + k);
        if (subword) {
          for (auto g : *grams) {
            const double* br = m.buckets.data() + g * d;
            for (std::size_t k = 0; k < d; ++k) h[k] += load<Atomic>(br + k);
          }
          for (std::size_t k = 0; k < d; ++k) h[k] /= parts;
        }
        negs.clear();
        for (std::size_t n = 0; n < cfg.negatives; ++n) {
          const int s = m.sampler.sample(rng);
          if (s != ctx) negs.push_back(s);
        }
        std::fill(neu1e.begin(), neu1e.end(), 0.0);
        stats.loss += sgns_kernel<Atomic>(h.data(), neu1e.data(), m.output.data(), d, ctx, negs, lr, true);
        ++stats.examples;
        const double share = 1.0 / parts;
        for (std::size_t k = 0; k < d; ++k) store<Atomic>(in_row + k, load<Atomic>(in_row + k) + neu1e[k] * share);
        if (subword) {
          for (auto g : *grams) {
            double* br = m.buckets.data() + g * d;
            for (std::size_t k = 0; k < d; ++k) store<Atomic>(br + k, load<Atomic>(br + k) + neu1e[k] * share);
          }
        }
      }
    }
  }
}

inline std::vector<EpochLog> run_training(EmbeddingModel& m, const std::vector<std::vector<int>>& sentences,
                                          const SgConfig& cfg) {
  std::uint64_t words = 0;
  for (const auto& s : sentences) words += s.size();
  const double total_work = static_cast<double>(words) * static_cast<double>(cfg.epochs);
  std::atomic<std::uint64_t> processed{0};
  const std::uint64_t base = derive_seed(cfg.seed, "skipgram-train");
  std::vector<Rng> rngs;
  for (std::size_t t = 0; t < cfg.threads; ++t) rngs.emplace_back(cfg.threads == 1 ? base : derive_seed(base, t));
  std::vector<EpochLog> log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<ShardStats> stats(cfg.threads);
    if (cfg.threads == 1) {
      train_shard<false>(m, sentences, cfg, rngs[0], processed, total_work, stats[0]);
    } else {
      std::vector<std::thread> pool;
      const std::size_t per = (sentences.size() + cfg.threads - 1) / cfg.threads;
      for (std::size_t t = 0; t < cfg.threads; ++t) {
        const std::size_t lo = std::min(sentences.size(), t * per);
        const std::size_t hi = std::min(sentences.size(), lo + per);
        pool.emplace_back([&, t, lo, hi] {
          train_shard<true>(m, std::span(sentences).subspan(lo, hi - lo), cfg, rngs[t], processed, total_work,
                            stats[t]);
        });
      }
      for (auto& th : pool) th.join();
    }
    EpochLog e;
    e.epoch = epoch + 1;
    double loss = 0.0;
    for (const auto& s : stats) {
      e.examples += s.examples;
      loss += s.loss;
      e.lr = std::max(e.lr, s.last_lr);
    }
    e.mean_loss = e.examples ? loss / static_cast<double>(e.examples) : 0.0;
    if (!std::isfinite(loss) || !m.input.allFinite() || !m.output.allFinite()) {
      throw NumericError("skip-gram training diverged (non-finite loss or vectors) in epoch " +
                         std::to_string(epoch + 1) + "; lower alpha");
    }
    log.push_back(e);
  }
  return log;
}

}  // namespace detail

struct TrainedModel {
  EmbeddingModel model;
  std::vector<EpochLog> log;
};

/// Builds the vocabulary, initializes the tables (input uniform in
/// +-0.5/dim, output zero) and trains for cfg.epochs passes.
inline TrainedModel train_skipgram(std::span<const TokenSentence> corpus, const SgConfig& cfg) {
  cfg.validate();
  TrainedModel out;
  EmbeddingModel& m = out.model;
  m.vocab = build_vocab(corpus, cfg.min_count);
  m.mode = cfg.mode;
  m.subword = cfg.subword;
  m.unigram_power = cfg.unigram_power;
  const auto v = static_cast<Eigen::Index>(m.vocab.size());
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const double lim = 0.5 / static_cast<double>(cfg.dim);
  Rng init(derive_seed(cfg.seed, "skipgram-init"));
  m.input.resize(v, d);
  for (Eigen::Index i = 0; i < v; ++i)
    for (Eigen::Index k = 0; k < d; ++k) m.input(i, k) = init.uniform(-lim, lim);
  m.output = Table::Zero(v, d);
  if (m.mode == Mode::FastText) {
    m.buckets.resize(static_cast<Eigen::Index>(cfg.subword.bucket_count), d);
    for (Eigen::Index i = 0; i < m.buckets.rows(); ++i)
      for (Eigen::Index k = 0; k < d; ++k) m.buckets(i, k) = init.uniform(-lim, lim);
    for (const auto& w : m.vocab.words) m.ngrams.push_back(char_ngrams(w, m.subword));
  }
  m.rebuild_sampler();
  out.log = detail::run_training(m, detail::to_ids(m.vocab, corpus), cfg);
  return out;
}

/// Continues training on the given sentences only. Unseen words join the
/// vocabulary (no count cutoff); counts and the negative table are updated.
/// The model's mode and dimension win over cfg.dim / cfg.mode.
inline std::vector<EpochLog> update_model(EmbeddingModel& m, std::span<const TokenSentence> sentences,
                                          const SgConfig& cfg) {
  cfg.validate(true);
  if (sentences.empty()) return {};
  Rng init(derive_seed(cfg.seed, "update-init"));
  std::map<std::string, std::uint64_t> fresh;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      const int id = m.vocab.id(w);
      if (id >= 0) {
        ++m.vocab.counts[static_cast<std::size_t>(id)];
        ++m.vocab.total;
      } else {
        ++fresh[w];
      }
    }
  }
  for (const auto& [w, c] : fresh) m.add_word(w, c, init);
  m.rebuild_sampler();
  SgConfig run = cfg;
  run.dim = m.dim();
  run.mode = m.mode;
  if (cfg.alpha == 0.0) return {};
  return detail::run_training(m, detail::to_ids(m.vocab, sentences), run);
}

// ---------------------------------------------------------------------------
// Few-shot nonce learning

struct NonceConfig {
  double learning_rate = 0.5;
  std::size_t epochs = 5;
  std::size_t window = 15;
  std::size_t negatives = 3;
  std::size_t min_count = 1;
  double sample = 10000.0;  // subsampling threshold; >= 1 keeps every word
  double decay = 0.99;      // per processed context word

  void validate() const {
    if (learning_rate < 0.0 || epochs == 0 || window == 0 || negatives == 0 || !(sample > 0.0) ||
        !(decay > 0.0 && decay <= 1.0)) {
      throw ConfigError("nonce config: values must be positive and decay in (0, 1]");
    }
  }
};

struct NonceResult {
  std::string target;
  std::string gold_label;
  int nonce_id = -1;
  int gold_id = -1;
};

inline std::string gold_label(const std::string& target) { return target + "_gold"; }

/// In place: the target's existing row is relabeled "<target>_gold" and a
/// fresh row for the target is learned from the sentences alone. Only that
/// new input row changes; every other input and output row stays frozen.
inline NonceResult train_nonce(EmbeddingModel& m, const std::string& target, std::span<const TokenSentence> sentences,
                               const NonceConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (m.mode != Mode::Word2Vec) throw ConfigError("nonce learning needs a word2vec-mode background model");
  const int gold = m.vocab.id(target);
  if (gold < 0) throw DataError("nonce target '" + target + "' is not in the background vocabulary");
  NonceResult r;
  r.target = target;
  r.gold_label = gold_label(target);
  r.gold_id = gold;
  m.vocab.relabel(gold, r.gold_label);
  Rng rng(seed);
  // the nonce never enters the negative table; counts stay as trained
  r.nonce_id = m.add_word(target, 1, rng);
  m.vocab.total -= 1;

  const std::size_t d = m.dim();
  const double total = static_cast<double>(m.vocab.total);
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> h(d), neu1e(d);
  std::vector<int> negs;
  double lr = cfg.learning_rate;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t si : order) {
      const auto& s = sentences[si];
      std::vector<int> ids;
      std::vector<std::size_t> targets;
      for (const auto& w : s) {
        const int id = m.vocab.id(w);
        if (id < 0) continue;
        if (id == r.nonce_id) {
          targets.push_back(ids.size());
        } else {
          const double f = static_cast<double>(m.vocab.counts[static_cast<std::size_t>(id)]) / total;
          const double discard = 1.0 - std::sqrt(cfg.sample / f);
          if (discard > 0.0 && rng.uniform01() < discard) continue;
        }
        ids.push_back(id);
      }
      double* row = m.input.data() + static_cast<std::size_t>(r.nonce_id) * d;
      for (std::size_t tp : targets) {
        const std::size_t lo = tp >= cfg.window ? tp - cfg.window : 0;
        const std::size_t hi = std::min(ids.size() - 1, tp + cfg.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (ids[c] == r.nonce_id) continue;
          std::copy(row, row + d, h.begin());
          negs.clear();
          for (std::size_t n = 0; n < cfg.negatives; ++n) {
            const int smp = m.sampler.sample(rng);
            if (smp != ids[c]) negs.push_back(smp);
          }
          std::fill(neu1e.begin(), neu1e.end(), 0.0);
          detail::sgns_kernel<false>(h.data(), neu1e.data(), m.output.data(), d, ids[c], negs, lr, false);
          for (std::size_t k = 0; k < d; ++k) row[k] += neu1e[k];
          lr *= cfg.decay;
        }
      }
    }
  }
  if (!m.input.row(r.nonce_id).allFinite()) throw NumericError("nonce vector for '" + target + "' is non-finite");
  return r;
}

/// Rank of the gold row among all vocabulary rows except the nonce, by
/// descending cosine to the nonce. Ties take the average rank, rounded up.
inline std::size_t gold_rank(const EmbeddingModel& m, int nonce_id, int gold_id) {
  if (gold_id < 0 || static_cast<std::size_t>(gold_id) >= m.vocab.size()) throw DataError("gold vector missing");
  const VectorXd nv = m.input.row(nonce_id).transpose();
  const double g = cosine(nv, m.input.row(gold_id).transpose());
  double greater = 0.0, ties = 0.0;
  for (Eigen::Index i = 0; i < m.input.rows(); ++i) {
    if (i == nonce_id || i == gold_id) continue;
    const double c = cosine(nv, m.input.row(i).transpose());
    if (c > g) greater += 1.0;
    else if (c == g) ties += 1.0;
  }
  return static_cast<std::size_t>(std::ceil(1.0 + greater + 0.5 * ties));
}

inline std::size_t median_rank(std::vector<std::size_t> ranks) { return metrics::lower_median(std::move(ranks)); }

// ---------------------------------------------------------------------------
// Persistence: <prefix>.vec holds the input vectors in the common text
// layout; .output, .vocab, .meta and (fasttext) .buckets complete the model.

namespace detail {

inline void write_table(std::ostream& out, const Table& t, const std::vector<std::string>* words) {
  out << t.rows() << ' ' << t.cols() << '\n';
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    out << (words ? (*words)[static_cast<std::size_t>(r)] : std::to_string(r));
    for (Eigen::Index c = 0; c < t.cols(); ++c) out << ' ' << tsv::format_double(t(r, c));
    out << '\n';
  }
}

inline Table read_table(const std::vector<std::string>& lines, std::vector<std::string>* words, const std::string& what) {
  if (lines.empty()) throw DataError(what + ": empty file");
  const auto head = tsv::split_whitespace(lines[0]);
  if (head.size() != 2) throw DataError(what + ": bad header line");
  const auto rows = tsv::to_int(head[0], "row count");
  const auto cols = tsv::to_int(head[1], "dimension");
  if (static_cast<std::int64_t>(lines.size()) - 1 < rows) throw DataError(what + ": fewer rows than declared");
  Table t(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto f = tsv::split_whitespace(lines[static_cast<std::size_t>(r + 1)]);
    if (static_cast<std::int64_t>(f.size()) != cols + 1) throw DataError(what + ": row " + std::to_string(r + 1) + " has the wrong width");
    if (words) words->push_back(f[0]);
    for (std::int64_t c = 0; c < cols; ++c) t(r, c) = tsv::to_double(f[static_cast<std::size_t>(c + 1)], what);
  }
  return t;
}

}  // namespace detail

inline void save_text(std::ostream& out, const EmbeddingModel& m) { detail::write_table(out, m.input, &m.vocab.words); }

inline void save_model(const std::filesystem::path& prefix, const EmbeddingModel& m) {
  auto with = [&](const char* ext) { return std::filesystem::path(prefix.string() + ext); };
  {
    auto out = tsv::open_output(with(".vec"));
    save_text(out, m);
  }
  {
    auto out = tsv::open_output(with(".output"));
    detail::write_table(out, m.output, &m.vocab.words);
  }
  {
    auto out = tsv::open_output(with(".vocab"));
    for (std::size_t i = 0; i < m.vocab.size(); ++i) out << m.vocab.words[i] << '\t' << m.vocab.counts[i] << '\n';
  }
  {
    auto out = tsv::open_output(with(".meta"));
    out << "mode\t" << mode_name(m.mode) << "\nunigram_power\t" << tsv::format_double(m.unigram_power) << "\nn_min\t"
        << m.subword.n_min << "\nn_max\t" << m.subword.n_max << "\nbucket_count\t" << m.subword.bucket_count << '\n';
  }
  if (m.mode == Mode::FastText) {
    auto out = tsv::open_output(with(".buckets"));
    detail::write_table(out, m.buckets, nullptr);
  }
}

inline EmbeddingModel load_model(const std::filesystem::path& prefix) {
  auto with = [&](const char* ext) { return std::filesystem::path(prefix.string() + ext); };
  EmbeddingModel m;
  std::map<std::string, std::string> meta;
  for (const auto& line : tsv::read_lines(with(".meta"))) {
    const auto f = tsv::split(line);
    if (f.size() == 2) meta[std::string(f[0])] = std::string(f[1]);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    const auto it = meta.find(k);
    if (it == meta.end()) throw DataError("embedding meta file lacks '" + k + "'");
    return it->second;
  };
  m.mode = parse_mode(need("mode"));
  m.unigram_power = tsv::to_double(need("unigram_power"), "unigram_power");
  m.subword.n_min = static_cast<std::size_t>(tsv::to_int(need("n_min"), "n_min"));
  m.subword.n_max = static_cast<std::size_t>(tsv::to_int(need("n_max"), "n_max"));
  m.subword.bucket_count = static_cast<std::size_t>(tsv::to_int(need("bucket_count"), "bucket_count"));
  std::vector<std::string> words;
  m.input = detail::read_table(tsv::read_lines(with(".vec")), &words, "embedding vectors");
  std::vector<std::string> out_words;
  m.output = detail::read_table(tsv::read_lines(with(".output")), &out_words, "output vectors");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& line : tsv::read_lines(with(".vocab"))) {
    if (line.empty()) continue;
    const auto f = tsv::split(line);
    if (f.size() != 2) throw DataError("vocab file: expected word and count");
    counts[std::string(f[0])] = static_cast<std::uint64_t>(tsv::to_int(f[1], "count"));
  }
  if (out_words != words || m.output.cols() != m.input.cols()) throw DataError("embedding tables disagree");
  for (const auto& w : words) {
    const auto it = counts.find(w);
    if (it == counts.end()) throw DataError("vocab file lacks a count for '" + w + "'");
    m.vocab.add(w, it->second);
  }
  if (m.mode == Mode::FastText) {
    m.buckets = detail::read_table(tsv::read_lines(with(".buckets")), nullptr, "bucket vectors");
    if (static_cast<std::size_t>(m.buckets.rows()) != m.subword.bucket_count) throw DataError("bucket table size mismatch");
    for (const auto& w : m.vocab.words) m.ngrams.push_back(char_ngrams(w, m.subword));
  }
  m.rebuild_sampler();
  return m;
}

inline void write_training_log(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch\texamples\tmean_loss\tlr\n";
  for (const auto& e : log) {
    out << e.epoch << '\t' << e.examples << '\t' << tsv::format_double(e.mean_loss) << '\t' << tsv::format_double(e.lr)
        << '\n';
  }
}

}  // namespace ctxinfo::embeddings

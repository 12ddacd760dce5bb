#pragma once

// Informativeness regressor: masked bilinear attention between the masked
// target slot and its context tokens, attention-weighted average pooling,
// and a ReLU + linear regression head trained on squared error.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/error.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/tsv.hpp"

namespace ctxinfo::scorer {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using corpus::SentenceId;
using corpus::SentenceRecord;

enum class MaskMode {
  PostSoftmax,  // softmax over every position, then zero masked weights
  PreSoftmax,   // softmax over unmasked positions only (ablation)
};

/// One sentence as seen by the attention block, padded to max_len rows.
struct EncodedSentence {
  MatrixXd context;          // max_len x d, padding rows are zero
  VectorXd query;            // d, the masked target slot
  std::vector<char> mask;    // 1 = real context token
  std::vector<int> rows;     // trainable backbone row per position, -1 = none
  int query_row = -1;
};

/// First kept token when a sentence is longer than max_len: tokens are cut
/// from the end, but the window slides right if it would lose the target.
inline std::size_t window_start(std::size_t length, std::size_t target_pos, std::size_t max_len) {
  if (length <= max_len || target_pos < max_len) return 0;
  return target_pos - max_len + 1;
}

class EmbeddingBackbone {
 public:
  virtual ~EmbeddingBackbone() = default;
  virtual std::size_t dim() const = 0;
  virtual EncodedSentence encode(const SentenceRecord& sentence, std::size_t max_len) const = 0;
  virtual bool trainable() const { return false; }
  virtual void apply_row_gradients(const std::map<int, VectorXd>& /*grads*/, double /*lr*/) {}
  virtual std::string_view mode_name() const = 0;
};

namespace detail {

inline void check_target(const SentenceRecord& s) {
  if (!s.target_pos || *s.target_pos >= s.tokens.size()) {
    throw DataError("sentence " + std::to_string(s.id) + " has no target position");
  }
}

}  // namespace detail

/// Trainable static lookup table. Row 0 is the UNK vector: it stands in for
/// the masked target slot and for every token missing from the table.
class LookupBackbone : public EmbeddingBackbone {
 public:
  static constexpr std::string_view kUnk = "<unk>";

  LookupBackbone(std::vector<std::string> words, MatrixXd table) : words_(std::move(words)), table_(std::move(table)) {
    if (words_.empty() || words_.front() != kUnk) throw DataError("lookup table must start with <unk>");
    if (static_cast<std::size_t>(table_.rows()) != words_.size()) throw DataError("lookup table row count mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
  }

  /// Vocabulary of context tokens seen at least min_count times, random
  /// uniform init in [-init_scale, init_scale].
  static LookupBackbone build(std::span<const SentenceRecord> sentences, std::size_t dim, std::size_t min_count,
                              std::uint64_t seed, double init_scale = 0.5) {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : sentences) {
      for (std::size_t p = 0; p < s.tokens.size(); ++p) {
        if (s.target_pos && *s.target_pos == p) continue;
        ++counts[s.tokens[p]];
      }
    }
    std::vector<std::string> words{std::string(kUnk)};
    for (const auto& [w, c] : counts) {
      if (c >= min_count && w != kUnk) words.push_back(w);
    }
    Rng rng(seed);
    MatrixXd table(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      for (Eigen::Index j = 0; j < table.cols(); ++j) table(i, j) = rng.uniform(-init_scale, init_scale);
    }
    return LookupBackbone(std::move(words), std::move(table));
  }

  std::size_t dim() const override { return static_cast<std::size_t>(table_.cols()); }
  bool trainable() const override { return true; }
  std::string_view mode_name() const override { return "lookup"; }

  int row(const std::string& word) const {
    const auto it = index_.find(word);
    return it == index_.end() ? 0 : it->second;
  }

  const std::vector<std::string>& words() const { return words_; }
  const MatrixXd& table() const { return table_; }
  MatrixXd& table() { return table_; }

  EncodedSentence encode(const SentenceRecord& s, std::size_t max_len) const override {
    detail::check_target(s);
    const std::size_t d = dim();
    const std::size_t start = window_start(s.tokens.size(), *s.target_pos, max_len);
    EncodedSentence enc;
    enc.context = MatrixXd::Zero(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(d));
    enc.mask.assign(max_len, 0);
    enc.rows.assign(max_len, -1);
    enc.query = table_.row(0).transpose();
    enc.query_row = 0;
    for (std::size_t p = start; p < s.tokens.size() && p - start < max_len; ++p) {
      const std::size_t slot = p - start;
      const bool is_target = p == *s.target_pos;
      const int r = is_target ? 0 : row(s.tokens[p]);
      enc.context.row(static_cast<Eigen::Index>(slot)) = table_.row(r);
      enc.rows[slot] = r;
      enc.mask[slot] = is_target ? 0 : 1;
    }
    return enc;
  }

  void apply_row_gradients(const std::map<int, VectorXd>& grads, double lr) override {
    for (const auto& [r, g] : grads) table_.row(r) -= lr * g.transpose();
  }

 private:
  std::vector<std::string> words_;
  MatrixXd table_;
  std::unordered_map<std::string, int> index_;
};

/// Read-only contextual vectors computed elsewhere: one row per token
/// position, the target position carrying the producer's own mask vector.
class IngestedBackbone : public EmbeddingBackbone {
 public:
  explicit IngestedBackbone(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const override { return dim_; }
  std::string_view mode_name() const override { return "ingested"; }

  void set(SentenceId id, MatrixXd vectors) {
    if (static_cast<std::size_t>(vectors.cols()) != dim_) throw DataError("ingested vectors have wrong dimension");
    vectors_[id] = std::move(vectors);
  }

  bool contains(SentenceId id) const { return vectors_.count(id) != 0; }

  EncodedSentence encode(const SentenceRecord& s, std::size_t max_len) const override {
    detail::check_target(s);
    const auto it = vectors_.find(s.id);
    if (it == vectors_.end()) throw DataError("no ingested vectors for sentence " + std::to_string(s.id));
    const MatrixXd& v = it->second;
    if (static_cast<std::size_t>(v.rows()) != s.tokens.size()) {
      throw DataError("ingested vectors for sentence " + std::to_string(s.id) + " do not match its token count");
    }
    const std::size_t start = window_start(s.tokens.size(), *s.target_pos, max_len);
    EncodedSentence enc;
    enc.context = MatrixXd::Zero(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(dim_));
    enc.mask.assign(max_len, 0);
    enc.rows.assign(max_len, -1);
    enc.query = v.row(static_cast<Eigen::Index>(*s.target_pos)).transpose();
    for (std::size_t p = start; p < s.tokens.size() && p - start < max_len; ++p) {
      const std::size_t slot = p - start;
      enc.context.row(static_cast<Eigen::Index>(slot)) = v.row(static_cast<Eigen::Index>(p));
      enc.mask[slot] = p == *s.target_pos ? 0 : 1;
    }
    return enc;
  }

  /// TSV rows: sentence_id, position, d floats. Positions of one sentence
  /// must be contiguous from 0.
  static IngestedBackbone read(const std::vector<std::string>& lines) {
    std::map<SentenceId, std::map<std::int64_t, std::vector<double>>> rows;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = tsv::split(lines[i]);
      if (f.size() < 3) throw DataError("vectors line " + std::to_string(i + 1) + ": too few fields");
      if (dim == 0) dim = f.size() - 2;
      if (f.size() - 2 != dim) throw DataError("vectors line " + std::to_string(i + 1) + ": inconsistent dimension");
      std::vector<double> v;
      v.reserve(dim);
      for (std::size_t k = 2; k < f.size(); ++k) v.push_back(tsv::to_double(f[k], "vector component"));
      rows[tsv::to_int(f[0], "sentence_id")][tsv::to_int(f[1], "position")] = std::move(v);
    }
    if (dim == 0) throw DataError("vectors file is empty");
    IngestedBackbone out(dim);
    for (auto& [id, by_pos] : rows) {
      MatrixXd m(static_cast<Eigen::Index>(by_pos.size()), static_cast<Eigen::Index>(dim));
      std::int64_t expect = 0;
      for (auto& [pos, v] : by_pos) {
        if (pos != expect++) throw DataError("vectors for sentence " + std::to_string(id) + " skip a position");
        m.row(pos) = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(dim)).transpose();
      }
      out.set(id, std::move(m));
    }
    return out;
  }

  void write(std::ostream& out) const {
    for (const auto& [id, m] : vectors_) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << id << '\t' << r;
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << '\t' << tsv::format_double(m(r, c));
        out << '\n';
      }
    }
  }

 private:
  std::size_t dim_;
  std::map<SentenceId, MatrixXd> vectors_;
};

/// Opaque per-sentence feature vectors appended to the pooled context.
class ExternalFeatures {
 public:
  ExternalFeatures() = default;
  explicit ExternalFeatures(std::map<SentenceId, std::vector<double>> features) : features_(std::move(features)) {
    for (const auto& [id, f] : features_) {
      if (dim_ == 0) dim_ = f.size();
      if (f.size() != dim_) throw DataError("external features must share one length");
    }
  }
  std::size_t dim() const { return dim_; }
  std::span<const double> get(SentenceId id) const {
    const auto it = features_.find(id);
    if (it == features_.end()) throw DataError("no external features for sentence " + std::to_string(id));
    return it->second;
  }

 private:
  std::map<SentenceId, std::vector<double>> features_;
  std::size_t dim_ = 0;
};

struct ScorerParams {
  MatrixXd attention;       // d x d bilinear form
  MatrixXd hidden_weights;  // (d + ext_dim) x hidden
  VectorXd hidden_bias;     // hidden
  VectorXd output_weights;  // hidden
  double output_bias = 0.0;
  std::size_t ext_dim = 0;
  MaskMode mask_mode = MaskMode::PostSoftmax;

  std::size_t dim() const { return static_cast<std::size_t>(attention.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(hidden_bias.size()); }

  static ScorerParams zeros(std::size_t d, std::size_t hidden, std::size_t ext_dim = 0) {
    ScorerParams p;
    const auto di = static_cast<Eigen::Index>(d);
    const auto hi = static_cast<Eigen::Index>(hidden);
    p.attention = MatrixXd::Zero(di, di);
    p.hidden_weights = MatrixXd::Zero(di + static_cast<Eigen::Index>(ext_dim), hi);
    p.hidden_bias = VectorXd::Zero(hi);
    p.output_weights = VectorXd::Zero(hi);
    p.ext_dim = ext_dim;
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static ScorerParams init(std::size_t d, std::size_t hidden, std::size_t ext_dim, std::uint64_t seed) {
    ScorerParams p = zeros(d, hidden, ext_dim);
    Rng rng(seed);
    auto fill = [&](auto& m, double limit) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
    };
    fill(p.attention, std::sqrt(3.0 / static_cast<double>(d)));
    fill(p.hidden_weights, std::sqrt(6.0 / static_cast<double>(d + ext_dim + hidden)));
    fill(p.output_weights, std::sqrt(6.0 / static_cast<double>(hidden + 1)));
    return p;
  }

  bool finite() const {
    return attention.allFinite() && hidden_weights.allFinite() && hidden_bias.allFinite() &&
           output_weights.allFinite() && std::isfinite(output_bias);
  }
};

namespace detail {

/// Softmax over every position (PostSoftmax) or over the unmasked ones
/// (PreSoftmax). Masked entries of the returned probabilities are only zero
/// in PreSoftmax mode.
inline VectorXd softmax(const VectorXd& logits, std::span<const char> mask, MaskMode mode) {
  const auto n = logits.size();
  auto live = [&](Eigen::Index j) { return mode == MaskMode::PostSoftmax || mask[static_cast<std::size_t>(j)] != 0; };
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (live(j)) hi = std::max(hi, logits(j));
  }
  VectorXd e = VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (live(j)) e(j) = std::exp(logits(j) - hi);
  }
  return e / e.sum();
}

inline VectorXd apply_mask(VectorXd probs, std::span<const char> mask) {
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    if (!mask[static_cast<std::size_t>(j)]) probs(j) = 0.0;
  }
  return probs;
}

}  // namespace detail

/// logits_j = query . (W context_j); softmax; masked positions forced to 0.
/// In PostSoftmax mode the surviving weights are not renormalized.
inline VectorXd attention_weights(const VectorXd& query, const MatrixXd& context, std::span<const char> mask,
                                  const MatrixXd& W, MaskMode mode = MaskMode::PostSoftmax) {
  if (static_cast<std::size_t>(context.rows()) != mask.size()) throw DataError("attention: mask length mismatch");
  if (std::none_of(mask.begin(), mask.end(), [](char m) { return m != 0; })) {
    throw DataError("attention: every position is masked");
  }
  const VectorXd logits = context * (W.transpose() * query);
  return detail::apply_mask(detail::softmax(logits, mask, mode), mask);
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardPass {
  VectorXd u;         // W^T query
  VectorXd probs;     // softmax output before masking
  VectorXd weights;   // masked attention weights
  VectorXd pooled;    // sum_j weights_j context_j / n_context
  VectorXd features;  // pooled ++ external
  VectorXd pre;       // hidden pre-activation
  VectorXd hidden;    // relu(pre)
  double n_context = 0.0;
  double score = 0.0;
};

inline ForwardPass forward(const ScorerParams& p, const EncodedSentence& enc, std::span<const double> ext = {}) {
  if (ext.size() != p.ext_dim) throw DataError("external feature length does not match the model");
  if (static_cast<std::size_t>(enc.context.cols()) != p.dim()) throw DataError("backbone dimension does not match the model");
  ForwardPass f;
  f.u = p.attention.transpose() * enc.query;
  f.n_context = static_cast<double>(std::count_if(enc.mask.begin(), enc.mask.end(), [](char m) { return m != 0; }));
  if (f.n_context == 0.0) throw DataError("attention: every position is masked");
  f.probs = detail::softmax(enc.context * f.u, enc.mask, p.mask_mode);
  f.weights = detail::apply_mask(f.probs, enc.mask);
  f.pooled = enc.context.transpose() * f.weights / f.n_context;
  f.features.resize(f.pooled.size() + static_cast<Eigen::Index>(ext.size()));
  f.features.head(f.pooled.size()) = f.pooled;
  for (std::size_t k = 0; k < ext.size(); ++k) f.features(f.pooled.size() + static_cast<Eigen::Index>(k)) = ext[k];
  f.pre = p.hidden_weights.transpose() * f.features + p.hidden_bias;
  f.hidden = f.pre.cwiseMax(0.0);
  f.score = p.output_weights.dot(f.hidden) + p.output_bias;
  return f;
}

struct Gradients {
  MatrixXd attention;
  MatrixXd hidden_weights;
  VectorXd hidden_bias;
  VectorXd output_weights;
  double output_bias = 0.0;
  std::map<int, VectorXd> rows;  // backbone lookup rows

  explicit Gradients(const ScorerParams& p)
      : attention(MatrixXd::Zero(p.attention.rows(), p.attention.cols())),
        hidden_weights(MatrixXd::Zero(p.hidden_weights.rows(), p.hidden_weights.cols())),
        hidden_bias(VectorXd::Zero(p.hidden_bias.size())),
        output_weights(VectorXd::Zero(p.output_weights.size())) {}
};

/// Adds d(loss)/d(params) given d(loss)/d(score) for one sentence.
inline void backward(const ScorerParams& p, const EncodedSentence& enc, const ForwardPass& f, double dscore,
                     Gradients& g) {
  g.output_bias += dscore;
  g.output_weights += dscore * f.hidden;
  VectorXd dpre = dscore * p.output_weights;
  for (Eigen::Index k = 0; k < dpre.size(); ++k) {
    if (f.pre(k) <= 0.0) dpre(k) = 0.0;
  }
  g.hidden_bias += dpre;
  g.hidden_weights.noalias() += f.features * dpre.transpose();
  const VectorXd dfeatures = p.hidden_weights * dpre;
  const VectorXd dpooled = dfeatures.head(f.pooled.size());

  // pooled = context^T weights / n
  const VectorXd dweights = enc.context * dpooled / f.n_context;
  MatrixXd dcontext = (f.weights / f.n_context) * dpooled.transpose();

  // weights = mask * probs (masked probs are already 0 in PreSoftmax mode)
  VectorXd dprobs = dweights;
  for (Eigen::Index j = 0; j < dprobs.size(); ++j) {
    if (!enc.mask[static_cast<std::size_t>(j)]) dprobs(j) = 0.0;
  }
  const double inner = f.probs.dot(dprobs);
  const VectorXd dlogits = f.probs.cwiseProduct((dprobs.array() - inner).matrix());

  // logits = context u, u = W^T query
  const VectorXd du = enc.context.transpose() * dlogits;
  dcontext.noalias() += dlogits * f.u.transpose();
  g.attention.noalias() += enc.query * du.transpose();
  const VectorXd dquery = p.attention * du;

  auto add_row = [&](int r, const VectorXd& v) {
    auto it = g.rows.find(r);
    if (it == g.rows.end()) g.rows.emplace(r, v);
    else it->second += v;
  };
  for (std::size_t j = 0; j < enc.rows.size(); ++j) {
    if (enc.rows[j] >= 0) add_row(enc.rows[j], dcontext.row(static_cast<Eigen::Index>(j)).transpose());
  }
  if (enc.query_row >= 0) add_row(enc.query_row, dquery);
}

struct LabeledSentence {
  SentenceRecord sentence;
  double score = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::size_t max_len = 32;
  std::size_t hidden = 256;
  MaskMode mask_mode = MaskMode::PostSoftmax;
  bool bias_from_mean = true;  // start the output bias at the label mean

  void validate() const {
    if (batch_size == 0 || epochs == 0 || max_len < 2 || hidden == 0 || !(learning_rate > 0.0)) {
      throw ConfigError("scorer training config values must be positive (max_len >= 2)");
    }
  }
};

struct TrainResult {
  ScorerParams params;
  std::vector<double> epoch_rmse;
};

inline std::span<const double> external_for(const ExternalFeatures* ext, SentenceId id) {
  return ext ? ext->get(id) : std::span<const double>{};
}

/// Mini-batch gradient descent on mean squared error with a constant rate.
/// A trainable backbone is updated alongside the head; an ingested one is
/// left untouched.
inline TrainResult train(std::span<const LabeledSentence> data, const TrainConfig& cfg, EmbeddingBackbone& backbone,
                         const ExternalFeatures* ext = nullptr) {
  cfg.validate();
  if (data.empty()) throw DataError("scorer training set is empty");
  double label_sum = 0.0;
  for (const auto& ex : data) {
    if (!std::isfinite(ex.score)) throw DataError("non-finite training label for sentence " + std::to_string(ex.sentence.id));
    label_sum += ex.score;
  }
  TrainResult result;
  result.params = ScorerParams::init(backbone.dim(), cfg.hidden, ext ? ext->dim() : 0, derive_seed(cfg.seed, "scorer-init"));
  result.params.mask_mode = cfg.mask_mode;
  if (cfg.bias_from_mean) result.params.output_bias = label_sum / static_cast<double>(data.size());
  ScorerParams& p = result.params;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double sq_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 2.0 / static_cast<double>(end - start);
      Gradients g(p);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        const auto enc = backbone.encode(ex.sentence, cfg.max_len);
        const auto f = forward(p, enc, external_for(ext, ex.sentence.id));
        const double err = f.score - ex.score;
        sq_sum += err * err;
        backward(p, enc, f, scale * err, g);
      }
      if (!std::isfinite(sq_sum)) {
        throw NumericError("scorer loss became non-finite in epoch " + std::to_string(epoch + 1) +
                           "; lower the learning rate");
      }
      const double lr = cfg.learning_rate;
      p.attention -= lr * g.attention;
      p.hidden_weights -= lr * g.hidden_weights;
      p.hidden_bias -= lr * g.hidden_bias;
      p.output_weights -= lr * g.output_weights;
      p.output_bias -= lr * g.output_bias;
      if (backbone.trainable()) backbone.apply_row_gradients(g.rows, lr);
    }
    result.epoch_rmse.push_back(std::sqrt(sq_sum / static_cast<double>(data.size())));
  }
  if (!p.finite()) throw NumericError("scorer parameters became non-finite");
  return result;
}

inline double predict(const SentenceRecord& sentence, const ScorerParams& p, const EmbeddingBackbone& backbone,
                      std::size_t max_len, const ExternalFeatures* ext = nullptr) {
  const auto enc = backbone.encode(sentence, max_len);
  return forward(p, enc, external_for(ext, sentence.id)).score;
}

// ---------------------------------------------------------------------------
// Model file: a versioned text dump of every matrix plus, in lookup mode,
// the embedding table.

struct ScorerModel {
  ScorerParams params;
  std::size_t max_len = 32;
  std::string backbone_mode = "lookup";
  std::optional<LookupBackbone> lookup;
};

namespace detail {

inline void write_matrix(std::ostream& out, std::string_view name, const MatrixXd& m) {
  out << "matrix\t" << name << '\t' << m.rows() << '\t' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "\t" : "") << tsv::format_double(m(r, c));
    out << '\n';
  }
}

class LineReader {
 public:
  explicit LineReader(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  std::vector<std::string_view> next() {
    if (pos_ >= lines_.size()) throw DataError("model file ends early");
    return tsv::split(lines_[pos_++]);
  }
  std::vector<std::string_view> expect(std::string_view key, std::size_t fields) {
    auto f = next();
    if (f.size() != fields || f[0] != key) throw DataError("model file: expected '" + std::string(key) + "' at line " + std::to_string(pos_));
    return f;
  }
  MatrixXd matrix(std::string_view name) {
    const auto h = expect("matrix", 4);
    if (h[1] != name) throw DataError("model file: expected matrix " + std::string(name));
    const auto rows = tsv::to_int(h[2], "rows");
    const auto cols = tsv::to_int(h[3], "cols");
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto f = next();
      if (static_cast<Eigen::Index>(f.size()) != cols) throw DataError("model file: short matrix row in " + std::string(name));
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = tsv::to_double(f[static_cast<std::size_t>(c)], name);
    }
    return m;
  }
  bool done() const { return pos_ >= lines_.size(); }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void save_model(std::ostream& out, const ScorerModel& m) {
  const auto& p = m.params;
  out << "ctxinfo-scorer\t1\n";
  out << "dim\t" << p.dim() << '\n';
  out << "hidden\t" << p.hidden() << '\n';
  out << "ext_dim\t" << p.ext_dim << '\n';
  out << "backbone\t" << m.backbone_mode << '\n';
  out << "mask_mode\t" << (p.mask_mode == MaskMode::PostSoftmax ? "post" : "pre") << '\n';
  out << "max_len\t" << m.max_len << '\n';
  detail::write_matrix(out, "attention", p.attention);
  detail::write_matrix(out, "hidden_weights", p.hidden_weights);
  detail::write_matrix(out, "hidden_bias", p.hidden_bias.transpose());
  detail::write_matrix(out, "output_weights", p.output_weights.transpose());
  out << "output_bias\t" << tsv::format_double(p.output_bias) << '\n';
  if (m.lookup) {
    const auto& words = m.lookup->words();
    out << "vocab\t" << words.size() << '\n';
    for (const auto& w : words) out << w << '\n';
    detail::write_matrix(out, "lookup", m.lookup->table());
  }
}

inline ScorerModel load_model(const std::vector<std::string>& lines) {
  detail::LineReader in(lines);
  const auto magic = in.expect("ctxinfo-scorer", 2);
  if (magic[1] != "1") throw DataError("unsupported scorer model version " + std::string(magic[1]));
  ScorerModel m;
  const auto dim = static_cast<std::size_t>(tsv::to_int(in.expect("dim", 2)[1], "dim"));
  const auto hidden = static_cast<std::size_t>(tsv::to_int(in.expect("hidden", 2)[1], "hidden"));
  m.params.ext_dim = static_cast<std::size_t>(tsv::to_int(in.expect("ext_dim", 2)[1], "ext_dim"));
  m.backbone_mode = std::string(in.expect("backbone", 2)[1]);
  const auto mask = in.expect("mask_mode", 2)[1];
  m.params.mask_mode = mask == "pre" ? MaskMode::PreSoftmax : MaskMode::PostSoftmax;
  m.max_len = static_cast<std::size_t>(tsv::to_int(in.expect("max_len", 2)[1], "max_len"));
  m.params.attention = in.matrix("attention");
  m.params.hidden_weights = in.matrix("hidden_weights");
  m.params.hidden_bias = in.matrix("hidden_bias").transpose();
  m.params.output_weights = in.matrix("output_weights").transpose();
  m.params.output_bias = tsv::to_double(in.expect("output_bias", 2)[1], "output_bias");
  if (m.params.dim() != dim || m.params.hidden() != hidden ||
      static_cast<std::size_t>(m.params.hidden_weights.rows()) != dim + m.params.ext_dim) {
    throw DataError("model file: matrix shapes disagree with the header");
  }
  if (m.backbone_mode == "lookup") {
    const auto n = tsv::to_int(in.expect("vocab", 2)[1], "vocab size");
    std::vector<std::string> words;
    for (std::int64_t i = 0; i < n; ++i) words.emplace_back(in.next().at(0));
    m.lookup.emplace(std::move(words), in.matrix("lookup"));
  } else if (m.backbone_mode != "ingested") {
    throw DataError("model file: unknown backbone mode " + m.backbone_mode);
  }
  return m;
}

}  // namespace ctxinfo::scorer

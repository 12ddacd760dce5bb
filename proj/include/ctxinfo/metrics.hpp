#pragma once

// Rank-based and regression metrics. Ties are always resolved by average
// rank; spearman, roc_auc, normalized_rank and median_rank share this rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ctxinfo/error.hpp"

namespace ctxinfo::metrics {

/// 1-based ascending ranks; tied values share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // ranks i+1 .. j averaged
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw DataError("mean of empty sequence");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample variance (n - 1 denominator); 0 for a single value.
inline double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation undefined: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

/// Pearson correlation of average-ranked data.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: length mismatch");
  if (x.size() < 3) throw DataError("spearman needs at least 3 points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DataError("rmse: length mismatch");
  if (pred.empty()) throw DataError("rmse of empty sequence");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

enum class LabelMode { Bottom20, Median, Top20 };

inline std::string label_mode_name(LabelMode m) {
  switch (m) {
    case LabelMode::Bottom20: return "BOTTOM20";
    case LabelMode::Median: return "MEDIAN";
    case LabelMode::Top20: return "TOP20";
  }
  return "?";
}

/// Binary labels for thresholded ROC-AUC. Exactly floor(q*n) positives
/// (q = 0.2 or 0.5): the highest scores for TOP20 / MEDIAN, the lowest for
/// BOTTOM20. Ties at the boundary go to the smaller id.
inline std::vector<int> binary_labels(std::span<const double> scores, std::span<const std::int64_t> ids,
                                      LabelMode mode) {
  const std::size_t n = scores.size();
  if (ids.size() != n) throw DataError("binary_labels: ids/scores length mismatch");
  if (n < 5) throw DataError("binary_labels needs at least 5 scores");
  if (std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores[0]; })) {
    throw DataError("binary_labels: all scores are equal");
  }
  const double q = mode == LabelMode::Median ? 0.5 : 0.2;
  const auto count = static_cast<std::size_t>(std::floor(q * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool high = mode != LabelMode::Bottom20;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return high ? scores[a] > scores[b] : scores[a] < scores[b];
    return ids[a] < ids[b];
  });
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < count; ++i) labels[order[i]] = 1;
  return labels;
}

inline std::vector<int> binary_labels(std::span<const double> scores, LabelMode mode) {
  std::vector<std::int64_t> ids(scores.size());
  std::iota(ids.begin(), ids.end(), std::int64_t{0});
  return binary_labels(scores, ids, mode);
}

/// Mann-Whitney AUC via the rank sum of the positive class.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: length mismatch");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      rank_sum += ranks[i];
      ++n_pos;
    }
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// 1 - (rank - 1) / (N - 1), rank by descending weight with average ties.
inline double normalized_rank(std::span<const double> weights, std::size_t idx) {
  const std::size_t n = weights.size();
  if (n < 2) throw DataError("normalized_rank needs at least 2 positions");
  if (idx >= n) throw DataError("normalized_rank: index out of range");
  double greater = 0.0, ties = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == idx) continue;
    if (weights[j] > weights[idx]) greater += 1.0;
    else if (weights[j] == weights[idx]) ties += 1.0;
  }
  const double rank = 1.0 + greater + 0.5 * ties;
  return 1.0 - (rank - 1.0) / static_cast<double>(n - 1);
}

/// Lower median (element floor((n-1)/2) of the sorted sequence).
template <class T>
T lower_median(std::vector<T> values) {
  if (values.empty()) throw DataError("median of empty sequence");
  const std::size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  return values[mid];
}

struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

/// Mean with a normal-approximation 95% interval over the given values.
inline MeanCi mean_ci95(std::span<const double> v) {
  MeanCi out;
  out.n = v.size();
  out.mean = mean(v);
  const double half = v.size() > 1 ? 1.959963984540054 * std::sqrt(variance(v) / static_cast<double>(v.size())) : 0.0;
  out.lo = out.mean - half;
  out.hi = out.mean + half;
  return out;
}

}  // namespace ctxinfo::metrics

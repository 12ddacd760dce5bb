#pragma once

// Target-independent baselines: constant mean, sentence length OLS, and
// ridge regression over bag-of-words context counts.

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/error.hpp"
#include "ctxinfo/scorer.hpp"

namespace ctxinfo::baselines {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using scorer::LabeledSentence;

/// Always predicts the training mean.
struct AvgBaseline {
  double mean = 0.0;
  double predict(const corpus::SentenceRecord&) const { return mean; }
};

inline AvgBaseline fit_baseline_avg(std::span<const LabeledSentence> train) {
  if (train.empty()) throw DataError("baseline fit on an empty fold");
  double s = 0.0;
  for (const auto& ex : train) s += ex.score;
  return {s / static_cast<double>(train.size())};
}

/// score = intercept + slope * token count.
struct LengthBaseline {
  double slope = 0.0;
  double intercept = 0.0;
  double predict(const corpus::SentenceRecord& s) const {
    return intercept + slope * static_cast<double>(s.tokens.size());
  }
};

inline LengthBaseline fit_baseline_length(std::span<const LabeledSentence> train) {
  if (train.empty()) throw DataError("baseline fit on an empty fold");
  const double n = static_cast<double>(train.size());
  double mx = 0.0, my = 0.0;
  for (const auto& ex : train) {
    mx += static_cast<double>(ex.sentence.tokens.size());
    my += ex.score;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& ex : train) {
    const double dx = static_cast<double>(ex.sentence.tokens.size()) - mx;
    sxx += dx * dx;
    sxy += dx * (ex.score - my);
  }
  if (sxx == 0.0) throw DataError("length baseline needs at least two distinct sentence lengths");
  LengthBaseline b;
  b.slope = sxy / sxx;
  b.intercept = my - b.slope * mx;
  return b;
}

struct RidgeSolution {
  VectorXd coef;
  double intercept = 0.0;
};

/// Ridge with an unpenalized intercept: X and y are centered, then
/// (Xc^T Xc + alpha I) beta = Xc^T yc is solved by Cholesky factorization.
inline RidgeSolution ridge_solve(const MatrixXd& X, const VectorXd& y, double alpha) {
  if (X.rows() != y.size() || X.rows() == 0) throw DataError("ridge: design and target sizes disagree");
  if (alpha < 0.0) throw ConfigError("ridge: alpha must be non-negative");
  const VectorXd x_mean = X.colwise().mean().transpose();
  const double y_mean = y.mean();
  const MatrixXd Xc = X.rowwise() - x_mean.transpose();
  const VectorXd yc = y.array() - y_mean;
  MatrixXd gram = Xc.transpose() * Xc;
  gram.diagonal().array() += alpha;
  const Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericError("ridge: normal matrix is not positive definite");
  RidgeSolution out;
  out.coef = llt.solve(Xc.transpose() * yc);
  out.intercept = y_mean - x_mean.dot(out.coef);
  return out;
}

/// Ridge regressor over counts of context words (the target token is not a
/// feature). Vocabulary: words seen more than min_count times in training.
struct BowBaseline {
  std::map<std::string, Eigen::Index> vocab;
  RidgeSolution ridge;

  VectorXd features(const corpus::SentenceRecord& s) const {
    VectorXd x = VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t p = 0; p < s.tokens.size(); ++p) {
      if (s.target_pos && *s.target_pos == p) continue;
      const auto it = vocab.find(s.tokens[p]);
      if (it != vocab.end()) x(it->second) += 1.0;
    }
    return x;
  }

  double predict(const corpus::SentenceRecord& s) const { return ridge.intercept + ridge.coef.dot(features(s)); }
};

inline BowBaseline fit_baseline_bow(std::span<const LabeledSentence> train, std::size_t min_count = 5,
                                    double ridge_alpha = 1.0) {
  if (train.empty()) throw DataError("baseline fit on an empty fold");
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : train) {
    const auto& s = ex.sentence;
    for (std::size_t p = 0; p < s.tokens.size(); ++p) {
      if (s.target_pos && *s.target_pos == p) continue;
      ++counts[s.tokens[p]];
    }
  }
  BowBaseline b;
  for (const auto& [w, c] : counts) {
    if (c > min_count) b.vocab.emplace(w, static_cast<Eigen::Index>(b.vocab.size()));
  }
  if (b.vocab.empty()) throw DataError("bag-of-words baseline: no word passes the count cutoff");
  MatrixXd X(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(b.vocab.size()));
  VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = b.features(train[i].sentence).transpose();
    y(static_cast<Eigen::Index>(i)) = train[i].score;
  }
  b.ridge = ridge_solve(X, y, ridge_alpha);
  return b;
}

}  // namespace ctxinfo::baselines

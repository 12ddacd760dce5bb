#pragma once

// Slow, obviously-correct reference implementations used by the unit and
// acceptance suites. None of them call into the library code they check.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

/// Counts best / worst / appearances per sentence by scanning every tuple
/// for every judgment.
struct BwsCount {
  long best = 0;
  long worst = 0;
  long seen = 0;
};

template <class Tuple, class Judgment>
std::map<std::int64_t, BwsCount> bws_counts(const std::vector<Tuple>& tuples, const std::vector<Judgment>& judgments) {
  std::map<std::int64_t, BwsCount> out;
  for (const auto& j : judgments) {
    for (const auto& t : tuples) {
      if (t.tuple_id != j.tuple_id) continue;
      for (auto id : t.sentence_ids) {
        auto& c = out[id];
        ++c.seen;
        if (id == j.best_id) ++c.best;
        if (id == j.worst_id) ++c.worst;
      }
    }
  }
  return out;
}

/// Ridge with an unpenalized intercept column, solved from the full
/// augmented normal equations.
inline std::pair<Eigen::VectorXd, double> ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;
  Eigen::MatrixXd G = A.transpose() * A;
  for (Eigen::Index i = 1; i <= p; ++i) G(i, i) += alpha;
  const Eigen::VectorXd beta = G.fullPivLu().solve(A.transpose() * y);
  return {beta.tail(p), beta(0)};
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& labels) {
  double good = 0.0, total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (labels[j]) continue;
      total += 1.0;
      if (s[i] > s[j]) good += 1.0;
      else if (s[i] == s[j]) good += 0.5;
    }
  }
  return good / total;
}

/// Rank of each element as 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0.0, eq = 0.0;
    for (double x : v) {
      if (x < v[i]) less += 1.0;
      else if (x == v[i]) eq += 1.0;
    }
    r[i] = 1.0 + less + (eq - 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) { return pearson(ranks(x), ranks(y)); }

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (long double)(a[i] - b[i]) * (a[i] - b[i]);
  return static_cast<double>(std::sqrt(s / a.size()));
}

/// Central difference of f at x along coordinate i.
inline double central_diff(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

}  // namespace oracle

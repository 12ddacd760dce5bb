#include <catch_amalgamated.hpp>

#include "ctxinfo/metrics.hpp"
#include "ctxinfo/rng.hpp"
#include "support/oracles.hpp"

using namespace ctxinfo;
using namespace ctxinfo::metrics;

TEST_CASE("average ranks share ties", "[metrics]") {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
  REQUIRE(average_ranks(v) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("roc_auc equals the pairwise oracle", "[metrics][property]") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.uniform_index(50);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = seed % 2 ? static_cast<double>(rng.uniform_index(5)) : rng.normal();
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.uniform_index(2));
    }
    REQUIRE(roc_auc(s, y) == oracle::auc_pairs(s, y));
  }
}

TEST_CASE("constant scores give an AUC of exactly one half", "[metrics]") {
  const std::vector<double> s(10, 0.3);
  const std::vector<int> y{1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
  REQUIRE(roc_auc(s, y) == 0.5);
  REQUIRE_THROWS_AS(roc_auc(s, std::vector<int>(10, 0)), DataError);
}

TEST_CASE("spearman and rmse match brute force", "[metrics][property]") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.uniform_index(40);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.uniform_index(7));
      b[i] = rng.normal();
    }
    a[0] = 0.0;
    a[1] = 9.0;
    REQUIRE(std::abs(spearman(a, b) - oracle::spearman(a, b)) < 1e-12);
    REQUIRE(std::abs(rmse(a, b) - oracle::rmse(a, b)) < 1e-12);
  }
}

TEST_CASE("spearman is invariant to monotone transforms", "[metrics][property]") {
  Rng rng(11);
  std::vector<double> a(30), b(30), c(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    c[i] = std::exp(3.0 * a[i]) + 1.0;
  }
  REQUIRE(spearman(a, b) == Catch::Approx(spearman(c, b)).margin(1e-12));
  REQUIRE(spearman(a, c) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("binary labels: exact positive counts and id tie-break", "[metrics]") {
  const std::vector<double> s{0.1, 0.5, 0.5, 0.9, 0.2, 0.5, 0.3, 0.4, 0.6, 0.7};
  const std::vector<std::int64_t> ids{9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
  const auto top = binary_labels(s, ids, LabelMode::Top20);
  REQUIRE(std::count(top.begin(), top.end(), 1) == 2);
  REQUIRE(top[3] == 1);
  REQUIRE(top[9] == 1);
  REQUIRE(top[8] == 0);
  const auto med = binary_labels(s, ids, LabelMode::Median);
  REQUIRE(std::count(med.begin(), med.end(), 1) == 5);
  // two of the three 0.5 scores make the cut: ids 4 and 7, not 8
  REQUIRE(med[5] == 1);
  REQUIRE(med[2] == 1);
  REQUIRE(med[1] == 0);
  const auto bottom = binary_labels(s, ids, LabelMode::Bottom20);
  REQUIRE(bottom[0] == 1);
  REQUIRE(bottom[4] == 1);
  REQUIRE_THROWS_AS(binary_labels(std::vector<double>(6, 1.0), LabelMode::Top20), DataError);
}

TEST_CASE("normalized rank", "[metrics]") {
  const std::vector<double> w{0.5, 0.1, 0.5, 0.0};
  REQUIRE(normalized_rank(w, 1) == Catch::Approx(1.0 - 2.0 / 3.0));
  REQUIRE(normalized_rank(w, 0) == Catch::Approx(1.0 - 0.5 / 3.0));
  REQUIRE(normalized_rank(w, 3) == 0.0);
}

TEST_CASE("lower median and confidence interval", "[metrics]") {
  REQUIRE(lower_median(std::vector<int>{4, 1, 3, 2}) == 2);
  REQUIRE(lower_median(std::vector<int>{5, 1, 3}) == 3);
  const std::vector<double> v{1.0, 2.0, 3.0};
  const auto ci = mean_ci95(v);
  REQUIRE(ci.mean == 2.0);
  REQUIRE(ci.hi - ci.mean == Catch::Approx(1.959963984540054 * std::sqrt(1.0 / 3.0)));
}

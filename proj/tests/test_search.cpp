#include <doctest.h>

#include <cmath>
#include <map>

#include "bpms/search.hpp"
#include "bpms/rng.hpp"

using namespace bpms;

TEST_CASE("forward_search: dominant candidate goes first") {
  const SubsetCriterion crit = [](const SubmodelIndicator& s) {
    return s.includes(3) ? 1.0 : 0.0;
  };
  const SearchPath path = forward_search(5, crit, 3);
  CHECK(path.order[0] == 3);
  CHECK(path.criterion_values[0] == 0.0);
  CHECK(path.criterion_values[1] == 1.0);
}

TEST_CASE("forward_search: exact ties resolve to the smaller index") {
  const SubsetCriterion crit = [](const SubmodelIndicator& s) {
    return (s.includes(2) || s.includes(5)) ? 1.0 : 0.0;
  };
  const SearchPath path = forward_search(6, crit, 2);
  CHECK(path.order[0] == 2);
}

TEST_CASE("forward_search matches an exhaustive greedy oracle") {
  // additive criterion with per-variable gains
  const std::map<int, double> gain{{1, 0.3}, {2, 1.1}, {3, -0.4}, {4, 0.9}};
  const SubsetCriterion crit = [&](const SubmodelIndicator& s) {
    double v = 0.0;
    for (const auto& [j, g] : gain)
      if (s.includes(j)) v += g;
    return v;
  };
  const SearchPath path = forward_search(4, crit, 4);
  // oracle: recompute greedy by scanning candidates at every step
  SubmodelIndicator cur(4);
  std::vector<int> expect;
  for (int step = 0; step < 4; ++step) {
    int best = -1;
    double bv = -1e300;
    for (int j = 1; j <= 4; ++j) {
      if (cur.includes(j)) continue;
      const double v = crit(cur.with(j));
      if (v > bv + 1e-12) {
        bv = v;
        best = j;
      }
    }
    cur = cur.with(best);
    expect.push_back(best);
  }
  CHECK(path.order == expect);
  CHECK(path.order == std::vector<int>{2, 4, 1, 3});
}

TEST_CASE("select_by_criterion: argmax with small-size ties") {
  CHECK(select_size_by_criterion({5.0, 4.0, 3.0}) == 0);  // decreasing
  CHECK(select_size_by_criterion({0.0, 1.0, 3.0, 2.0}) == 2);
  CHECK(select_size_by_criterion({1.0, 3.0, 3.0}) == 1);  // tie -> smaller
  SearchPath path;
  path.order = {4, 2, 1};
  path.criterion_values = {0.0, 1.0, 3.0, 2.0};
  CHECK(select_by_criterion(path, 5).bits() == "01010");
}

TEST_CASE("select_by_explanatory_power: first crossing of the threshold") {
  // discrepancies chosen so phi = (0, 0.5, 0.96, 0.99)
  const std::vector<double> disc{1.0, 0.5, 0.04, 0.01};
  CHECK(select_size_by_explanatory_power(disc, 0.95) == 2);
  CHECK(select_size_by_explanatory_power(disc, 0.0) == 0);
  // threshold 1 reached only at a full-reconstruction tail
  const std::vector<double> to_zero{1.0, 0.6, 0.2, 0.0};
  CHECK(select_size_by_explanatory_power(to_zero, 1.0) == 3);
  // nothing reaches 0.999: fall back to the largest size
  CHECK(select_size_by_explanatory_power(disc, 0.9999) == 3);
  CHECK_THROWS_AS(select_size_by_explanatory_power({0.0, 0.0}, 0.95),
                  NullModelZeroDiscrepancy);
}

TEST_CASE("bayesian_bootstrap_prob: boundary and symmetric cases") {
  Eigen::VectorXd all_above(4);
  all_above << 0.2, 0.5, 0.1, 0.9;
  CHECK(bayesian_bootstrap_prob(all_above, 0.0, 500, 1) == 1.0);
  Eigen::VectorXd all_below(3);
  all_below << -0.2, -0.5, -0.1;
  CHECK(bayesian_bootstrap_prob(all_below, 0.0, 500, 1) == 0.0);
  Eigen::VectorXd mixed(2);
  mixed << -1.0, 1.0;
  const double pr = bayesian_bootstrap_prob(mixed, 0.0, 100000, 2);
  CHECK(std::abs(pr - 0.5) < 0.005);  // 3 x binomial se ~ 0.0047
}

TEST_CASE("bayesian_bootstrap_prob is permutation invariant") {
  Rng rng(3);
  Eigen::VectorXd v(9);
  for (int i = 0; i < 9; ++i) v[i] = rng.normal();
  Eigen::VectorXd perm = v.reverse();
  // same seed, same Dirichlet weights; permutation only reorders the inner
  // product terms against exchangeable weights, so the estimates agree in
  // distribution; with matched seeds the estimates are within MC error
  const double a = bayesian_bootstrap_prob(v, 0.1, 40000, 7);
  const double b = bayesian_bootstrap_prob(perm, 0.1, 40000, 8);
  CHECK(std::abs(a - b) < 0.01);
}

TEST_CASE("select_size: first size crossing alpha wins, else fallback") {
  const int n = 60;
  Rng rng(5);
  SizeSelectionInput input;
  input.reference_pointwise = Eigen::VectorXd::Zero(n);
  input.per_size_pointwise.resize(6, n);
  // sizes 0..3 clearly below U, sizes 4,5 clearly above
  for (int m = 0; m <= 5; ++m)
    for (int i = 0; i < n; ++i)
      input.per_size_pointwise(m, i) =
          (m >= 4 ? 0.2 : -0.5) + 0.05 * rng.normal();
  const SizeDecision dec = select_size(input, 0.0, 0.95, 2000, 11);
  CHECK(dec.m == 4);
  CHECK(dec.satisfied);
  CHECK(dec.probabilities.size() == 6);
  CHECK(dec.probabilities[4] >= 0.95);
  CHECK(dec.probabilities[3] < 0.95);

  // size 0 already satisfies
  SizeSelectionInput easy = input;
  easy.per_size_pointwise.row(0).array() = 1.0;
  CHECK(select_size(easy, 0.0, 0.95, 2000, 11).m == 0);

  // nothing satisfies
  SizeSelectionInput hard = input;
  hard.per_size_pointwise.array() = -1.0;
  const SizeDecision none = select_size(hard, 0.0, 0.95, 2000, 11);
  CHECK(none.m == 5);
  CHECK(!none.satisfied);
}

TEST_CASE("select_size monotonicity in U and alpha with a fixed seed") {
  const int n = 40;
  Rng rng(6);
  SizeSelectionInput input;
  input.reference_pointwise = Eigen::VectorXd::Zero(n);
  input.per_size_pointwise.resize(8, n);
  for (int m = 0; m < 8; ++m)
    for (int i = 0; i < n; ++i)
      input.per_size_pointwise(m, i) = -1.0 + 0.15 * m + 0.6 * rng.normal();
  int prev_m = -1;
  for (double alpha : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    const int m = select_size(input, -0.1, alpha, 4000, 13).m;
    CHECK(m >= prev_m);
    prev_m = m;
  }
  prev_m = 100;
  for (double U : {0.2, 0.0, -0.2, -0.5}) {
    const int m = select_size(input, U, 0.9, 4000, 13).m;
    CHECK(m <= prev_m);
    prev_m = m;
  }
}

TEST_CASE("bias_gap: zeros, constant offset, length check") {
  CHECK(bias_gap({1.0, 2.0}, {1.0, 2.0}) == std::vector<double>{0.0, 0.0});
  CHECK(bias_gap({1.3, 2.3}, {1.0, 2.0}) ==
        std::vector<double>{0.3000000000000000444, 0.2999999999999998224});
  CHECK_THROWS_AS(bias_gap({1.0}, {1.0, 2.0}), LengthMismatch);
}

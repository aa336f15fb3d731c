#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "bpms/gauss_linear.hpp"
#include "bpms/projection.hpp"
#include "bpms/rng.hpp"

using namespace bpms;

namespace {
PosteriorDraws random_full_draws(const Eigen::MatrixXd& X, int S,
                                 std::uint64_t seed) {
  const int p = static_cast<int>(X.cols());
  PosteriorDraws d;
  d.subset = SubmodelIndicator::full_model(p);
  d.seed = seed;
  d.w.resize(S, p + 1);
  d.sigma2.resize(S);
  Rng rng(seed);
  for (int s = 0; s < S; ++s) {
    for (int j = 0; j <= p; ++j) d.w(s, j) = rng.normal();
    d.sigma2[s] = 0.5 + rng.u01();
  }
  return d;
}

Eigen::MatrixXd random_X(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  return X;
}
}  // namespace

TEST_CASE("projecting onto the full set is the identity") {
  const Eigen::MatrixXd X = random_X(20, 4, 1);
  const PosteriorDraws draws = random_full_draws(X, 30, 2);
  const auto [proj, disc] =
      project_draws(draws, X, SubmodelIndicator::full_model(4));
  CHECK(disc == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((proj.w_perp - draws.w).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((proj.sigma2_perp - draws.sigma2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(proj.kl.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("intercept-only projection: mean fit and population variance") {
  const Eigen::MatrixXd X = random_X(15, 3, 3);
  Eigen::VectorXd w(4);
  w << 0.3, 1.0, -0.5, 0.2;
  const double sigma2 = 0.8;
  const auto [w_perp, sigma2_perp, kl] =
      project_draw(w, sigma2, X, SubmodelIndicator(3));
  const Eigen::VectorXd f =
      SubmodelIndicator::full_model(3).design(X) * w;
  const double mean_f = f.mean();
  const double pop_var = (f.array() - mean_f).square().sum() / f.size();
  CHECK(w_perp.size() == 1);
  CHECK(w_perp[0] == doctest::Approx(mean_f).epsilon(1e-12));
  CHECK(sigma2_perp == doctest::Approx(sigma2 + pop_var).epsilon(1e-12));
  CHECK(kl == doctest::Approx(0.5 * std::log1p(pop_var / sigma2)).epsilon(1e-12));
}

TEST_CASE("hand case: n=2 rows (1,1),(1,-1), project slope onto intercept") {
  Eigen::MatrixXd X(2, 1);
  X << 1.0, -1.0;
  Eigen::VectorXd w(2);
  w << 0.0, 1.0;
  const auto [w_perp, sigma2_perp, kl] =
      project_draw(w, 1.0, X, SubmodelIndicator(1));
  CHECK(w_perp[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sigma2_perp == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(kl == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("project_draws: discrepancy is the mean per-draw kl") {
  const Eigen::MatrixXd X = random_X(25, 5, 4);
  const PosteriorDraws draws = random_full_draws(X, 40, 5);
  const SubmodelIndicator sub = SubmodelIndicator::from_bits("10110");
  const auto [proj, disc] = project_draws(draws, X, sub);
  // brute-force recomputation, draw by draw, through the scalar routine
  double acc = 0.0;
  for (int s = 0; s < draws.count(); ++s) {
    const auto [wp, s2p, kl] =
        project_draw(draws.w.row(s), draws.sigma2[s], X, sub);
    CHECK(kl == doctest::Approx(proj.kl[s]).epsilon(1e-12));
    CHECK(s2p == doctest::Approx(proj.sigma2_perp[s]).epsilon(1e-12));
    acc += kl;
  }
  CHECK(disc == doctest::Approx(acc / draws.count()).epsilon(1e-12));
  // single draw: discrepancy equals that draw's kl
  PosteriorDraws one = draws;
  one.w = draws.w.topRows(1);
  one.sigma2 = draws.sigma2.head(1);
  const auto [proj1, disc1] = project_draws(one, X, sub);
  CHECK(disc1 == doctest::Approx(proj1.kl[0]).epsilon(1e-15));
}

TEST_CASE("per-draw kl is nonnegative and nonincreasing along nested chains") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const int p = 6;
    const Eigen::MatrixXd X = random_X(30, p, 100 + rep);
    const PosteriorDraws draws = random_full_draws(X, 10, 200 + rep);
    // random nested chain: grow from empty to full
    std::vector<int> perm{1, 2, 3, 4, 5, 6};
    rng.shuffle(perm);
    SubmodelIndicator s(p);
    Eigen::VectorXd prev_kl = Eigen::VectorXd::Constant(10, 1e300);
    for (int step = 0; step <= p; ++step) {
      const auto [proj, disc] = project_draws(draws, X, s);
      for (int k = 0; k < 10; ++k) {
        CHECK(proj.kl[k] >= 0.0);
        CHECK(proj.kl[k] <= prev_kl[k] + 1e-10);
      }
      prev_kl = proj.kl;
      if (step < p) s = s.with(perm[static_cast<std::size_t>(step)]);
    }
  }
}

TEST_CASE("projection is invariant to draw reordering") {
  const Eigen::MatrixXd X = random_X(18, 3, 7);
  PosteriorDraws draws = random_full_draws(X, 16, 8);
  const SubmodelIndicator sub = SubmodelIndicator::from_bits("110");
  const auto [proj, disc] = project_draws(draws, X, sub);
  PosteriorDraws reversed = draws;
  reversed.w = draws.w.colwise().reverse().eval();
  reversed.sigma2 = draws.sigma2.reverse().eval();
  const auto [proj_r, disc_r] = project_draws(reversed, X, sub);
  CHECK(disc == doctest::Approx(disc_r).epsilon(1e-12));
}

TEST_CASE("projected_predictive: single draw, normalization, identity") {
  const Eigen::MatrixXd X = random_X(20, 3, 9);
  const PosteriorDraws draws = random_full_draws(X, 1, 10);
  const SubmodelIndicator sub = SubmodelIndicator::from_bits("101");
  const auto [proj, disc] = project_draws(draws, X, sub);
  Eigen::RowVectorXd row(3);
  row << 0.4, -0.8, 1.1;
  const Eigen::VectorXd x = sub.gather_row(row);
  const PredictiveMixture mix = projected_predictive(proj, x);
  REQUIRE(mix.components.size() == 1);
  CHECK(mix.components[0].family == Family::gaussian);
  CHECK(mix.components[0].location ==
        doctest::Approx(proj.w_perp.row(0).dot(x)).epsilon(1e-12));

  const PosteriorDraws more = random_full_draws(X, 64, 11);
  const auto [proj64, d64] = project_draws(more, X, sub);
  const PredictiveMixture big = projected_predictive(proj64, x);
  big.validate();
  const double mu = big.mean(), sd = big.sd();
  const int G = 8001;
  const double lo = mu - 12 * sd, hi = mu + 12 * sd;
  const double h = (hi - lo) / (G - 1);
  double mass = 0.0;
  for (int k = 0; k < G; ++k)
    mass += ((k == 0 || k == G - 1) ? 0.5 * h : h) *
            std::exp(mixture_log_density(big, lo + k * h));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));

  // identity projection reproduces the draw-based predictive exactly
  const SubmodelIndicator full = SubmodelIndicator::full_model(3);
  const auto [proj_full, dfull] = project_draws(more, X, full);
  const Eigen::VectorXd xf = full.gather_row(row);
  const PredictiveMixture ident = projected_predictive(proj_full, xf);
  Eigen::VectorXd terms(more.count());
  for (int s = 0; s < more.count(); ++s)
    terms[s] = -std::log(64.0) +
               normal_log_pdf(0.7, more.w.row(s).dot(xf), more.sigma2[s]);
  CHECK(mixture_log_density(ident, 0.7) ==
        doctest::Approx(log_sum_exp(terms)).epsilon(1e-10));
}

TEST_CASE("rank-deficient submodels are rejected") {
  Eigen::MatrixXd X = random_X(10, 2, 12);
  X.col(1) = 2.0 * X.col(0);  // collinear pair
  const PosteriorDraws draws = random_full_draws(X, 4, 13);
  CHECK_THROWS_AS(project_draws(draws, X, SubmodelIndicator::full_model(2)),
                  RankDeficientSubmodel);
  CHECK_NOTHROW(project_draws(draws, X, SubmodelIndicator::from_bits("10")));
}

TEST_CASE("explanatory_power: endpoints, arithmetic, zero-null error") {
  CHECK(explanatory_power(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(explanatory_power(1.0, 1.0) == doctest::Approx(0.0));
  CHECK(explanatory_power(0.05, 1.0) == doctest::Approx(0.95));
  CHECK_THROWS_AS(explanatory_power(0.0, 0.0), NullModelZeroDiscrepancy);
}

TEST_CASE("draws csv import/export round trip") {
  const Eigen::MatrixXd X = random_X(12, 3, 14);
  const PosteriorDraws draws = random_full_draws(X, 9, 15);
  const std::string path = "test_projection_draws.csv";
  write_draws_csv(path, draws);
  const PosteriorDraws back = read_draws_csv(path, 3);
  CHECK((back.w - draws.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.sigma2 - draws.sigma2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.subset == SubmodelIndicator::full_model(3));
  std::remove(path.c_str());
}

TEST_CASE("projected weights carry exact zeros in full-length embedding") {
  // the projected coefficient vector lives in subset coordinates; embedding
  // back into p+1 space puts exact zeros on excluded variables
  const Eigen::MatrixXd X = random_X(14, 4, 16);
  const PosteriorDraws draws = random_full_draws(X, 3, 17);
  const SubmodelIndicator sub = SubmodelIndicator::from_bits("1010");
  const auto [proj, disc] = project_draws(draws, X, sub);
  const auto cols = sub.design_columns();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(3, 5);
  for (int s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < cols.size(); ++a)
      full(s, cols[a]) = proj.w_perp(s, static_cast<Eigen::Index>(a));
  for (int s = 0; s < 3; ++s) {
    CHECK(full(s, 2) == 0.0);
    CHECK(full(s, 4) == 0.0);
  }
}

#include <doctest.h>

#include <cmath>

#include "bpms/simgen.hpp"

using namespace bpms;

TEST_CASE("solve_xi: closed form against the variance identity") {
  // Var(w'x) must equal 7/3 at the solution
  for (double rho : {0.0, 0.3, 0.5, 0.9}) {
    const double xi = solve_xi(rho);
    const double var = xi * xi * (1.0 + 0.25 + 0.0625) * (5.0 + 20.0 * rho);
    CHECK(var == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  }
  CHECK(solve_xi(0.0) == doctest::Approx(0.5963).epsilon(1e-4));
  CHECK(solve_xi(0.5) == doctest::Approx(0.3443).epsilon(1e-4));
  CHECK(solve_xi(0.9) == doctest::Approx(0.2780).epsilon(1e-4));
}

TEST_CASE("generate: deterministic under seed, seed-sensitive") {
  SimConfig cfg;
  cfg.n = 50;
  cfg.p = 20;
  cfg.rho = 0.5;
  cfg.seed = 4;
  const auto [d1, t1] = generate(cfg);
  const auto [d2, t2] = generate(cfg);
  CHECK((d1.X - d2.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1.y - d2.y).cwiseAbs().maxCoeff() == 0.0);
  cfg.seed = 5;
  const auto [d3, t3] = generate(cfg);
  CHECK((d1.X - d3.X).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generate: truth has exactly 15 nonzero tiered weights") {
  SimConfig cfg;
  cfg.n = 10;
  cfg.p = 40;
  cfg.rho = 0.0;
  const auto [d, truth] = generate(cfg);
  int nonzero = 0;
  for (int j = 0; j < 40; ++j)
    if (truth.true_w[j] != 0.0) ++nonzero;
  CHECK(nonzero == 15);
  CHECK(truth.true_w[0] == doctest::Approx(truth.xi));
  CHECK(truth.true_w[5] == doctest::Approx(0.5 * truth.xi));
  CHECK(truth.true_w[10] == doctest::Approx(0.25 * truth.xi));
  CHECK(truth.true_w[15] == 0.0);
}

TEST_CASE("generate: correlation structure at n = 1e5") {
  SimConfig cfg;
  cfg.n = 100000;
  cfg.p = 15;
  cfg.seed = 7;

  auto corr = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double ma = a.mean(), mb = b.mean();
    const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
    const double va = (a.array() - ma).square().sum();
    const double vb = (b.array() - mb).square().sum();
    return cov / std::sqrt(va * vb);
  };

  cfg.rho = 0.0;
  {
    const auto [d, truth] = generate(cfg);
    CHECK(std::abs(corr(d.X.col(0), d.X.col(1))) < 0.02);   // in-group
    CHECK(std::abs(corr(d.X.col(0), d.X.col(7))) < 0.02);   // cross-group
  }
  cfg.rho = 0.5;
  {
    const auto [d, truth] = generate(cfg);
    CHECK(std::abs(corr(d.X.col(0), d.X.col(1)) - 0.5) < 0.02);
    CHECK(std::abs(corr(d.X.col(2), d.X.col(4)) - 0.5) < 0.02);
    CHECK(std::abs(corr(d.X.col(0), d.X.col(5))) < 0.02);  // across blocks
    for (int j = 0; j < 15; j += 7) {
      const double v = (d.X.col(j).array() - d.X.col(j).mean()).square().sum() /
                       (cfg.n - 1);
      CHECK(std::abs(v - 1.0) < 0.03);
    }
  }
}

TEST_CASE("generate: noise-to-variance ratio hits 0.3") {
  for (double rho : {0.0, 0.5, 0.9}) {
    SimConfig cfg;
    cfg.n = 100000;
    cfg.p = 15;
    cfg.rho = rho;
    cfg.seed = 11;
    const auto [d, truth] = generate(cfg);
    const double var_y =
        (d.y.array() - d.y.mean()).square().sum() / (cfg.n - 1);
    CHECK(std::abs(1.0 / var_y - 0.3) < 0.01);
  }
}

TEST_CASE("generate: irrelevant variables are uncorrelated with y") {
  SimConfig cfg;
  cfg.n = 20000;
  cfg.p = 30;
  cfg.rho = 0.5;
  cfg.seed = 13;
  const auto [d, truth] = generate(cfg);
  for (int j = 15; j < 30; j += 4) {
    const Eigen::VectorXd& a = d.X.col(j);
    const double ma = a.mean(), my = d.y.mean();
    const double cov = ((a.array() - ma) * (d.y.array() - my)).sum();
    const double r = cov / std::sqrt((a.array() - ma).square().sum() *
                                     (d.y.array() - my).square().sum());
    CHECK(std::abs(r) < 3.0 / std::sqrt(double(cfg.n)));
  }
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.p = 12;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.p = 20;
  cfg.rho = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.rho = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(solve_xi(1.0), ConfigError);
}

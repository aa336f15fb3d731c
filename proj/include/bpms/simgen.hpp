// Simulated-data generator: block-equicorrelated standard-normal predictors in
// groups of five, tiered true weights (xi, 0.5 xi, 0.25 xi) on the first three
// groups, gaussian noise with sigma2 = 1, and xi calibrated so that
// sigma2 / Var(y) = 0.3.
#ifndef BPMS_SIMGEN_HPP
#define BPMS_SIMGEN_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "bpms/core.hpp"
#include "bpms/errors.hpp"
#include "bpms/rng.hpp"

namespace bpms {

struct SimConfig {
  int n = 100;
  int p = 100;
  double rho = 0.0;
  double sigma2 = 1.0;
  int group_size = 5;
  std::array<double, 3> weight_tiers{1.0, 0.5, 0.25};
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1) throw ConfigError("simgen needs n >= 1");
    if (p < 15 || p % group_size != 0)
      throw ConfigError("simgen needs p >= 15 and divisible by the group size");
    if (rho < 0.0 || rho >= 1.0) throw ConfigError("rho must lie in [0, 1)");
    if (sigma2 <= 0.0) throw ConfigError("sigma2 must be positive");
  }
};

struct SimTruth {
  Eigen::VectorXd true_w;  // length p
  double sigma2 = 1.0;
  double xi = 0.0;
  double rho = 0.0;
  int group_size = 5;
};

// Var(w'x) for one relevant group with common weight w_g and equicorrelation
// rho over 5 unit-variance variables is w_g^2 (5 + 20 rho); groups are
// independent, so Var(w'x) = xi^2 (1 + 0.25 + 0.0625)(5 + 20 rho). Solving
// sigma2 / (sigma2 + Var(w'x)) = 0.3 with sigma2 = 1 gives xi.
inline double solve_xi(double rho) {
  if (rho < 0.0 || rho >= 1.0) throw ConfigError("rho must lie in [0, 1)");
  const double tier_sum = 1.0 + 0.25 + 0.0625;
  const double group_var = 5.0 + 20.0 * rho;
  const double target_signal_var = 1.0 / 0.3 - 1.0;  // = 7/3
  return std::sqrt(target_signal_var / (tier_sum * group_var));
}

// x per block via the one-factor decomposition
// x_j = sqrt(rho) z_shared + sqrt(1-rho) z_j, exact for equicorrelation.
inline std::pair<Dataset, SimTruth> generate(const SimConfig& cfg) {
  cfg.validate();
  const double xi = solve_xi(cfg.rho);
  SimTruth truth;
  truth.true_w = Eigen::VectorXd::Zero(cfg.p);
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < cfg.group_size; ++j)
      truth.true_w[t * cfg.group_size + j] = cfg.weight_tiers[static_cast<std::size_t>(t)] * xi;
  truth.sigma2 = cfg.sigma2;
  truth.xi = xi;
  truth.rho = cfg.rho;
  truth.group_size = cfg.group_size;

  Eigen::MatrixXd X(cfg.n, cfg.p);
  Eigen::VectorXd y(cfg.n);
  Rng rng(cfg.seed);
  const double sr = std::sqrt(cfg.rho);
  const double so = std::sqrt(1.0 - cfg.rho);
  const double noise_sd = std::sqrt(cfg.sigma2);
  const int blocks = cfg.p / cfg.group_size;
  for (int i = 0; i < cfg.n; ++i) {
    for (int b = 0; b < blocks; ++b) {
      const double shared = rng.normal();
      for (int j = 0; j < cfg.group_size; ++j)
        X(i, b * cfg.group_size + j) = sr * shared + so * rng.normal();
    }
    y[i] = X.row(i).dot(truth.true_w) + noise_sd * rng.normal();
  }
  return {make_dataset(std::move(X), std::move(y)), truth};
}

}  // namespace bpms

#endif

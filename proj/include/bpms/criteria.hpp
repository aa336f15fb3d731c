// Utility-estimation criteria: K-fold CV, WAIC, DIC, the L2 family, and the
// test-set MLPD metrics. All log-density criteria are on the mean
// log-predictive-density scale (nats per observation).
#ifndef BPMS_CRITERIA_HPP
#define BPMS_CRITERIA_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bpms/core.hpp"
#include "bpms/errors.hpp"
#include "bpms/gauss_linear.hpp"
#include "bpms/rng.hpp"

namespace bpms {

struct UtilityEstimate {
  double value = 0.0;          // mean of pointwise
  Eigen::VectorXd pointwise;   // per-observation contributions
  std::optional<double> p_eff; // DIC diagnostic
  std::optional<double> V;     // WAIC functional variance

  static UtilityEstimate from_pointwise(Eigen::VectorXd pw) {
    UtilityEstimate u;
    u.value = pw.size() > 0 ? pw.mean() : 0.0;
    u.pointwise = std::move(pw);
    return u;
  }
};

// ---------------------------------------------------------------------------
// Folds: seeded Fisher-Yates shuffle, then contiguous blocks whose sizes
// differ by at most one.

struct FoldAssignment {
  std::vector<int> fold_of;  // length n, values in [0, K)
  int K = 0;

  std::vector<int> members(int k) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == k) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline FoldAssignment make_folds(int n, int K, std::uint64_t seed) {
  if (K < 2 || K > n) throw BadFoldCount(K, n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);
  FoldAssignment fa;
  fa.K = K;
  fa.fold_of.assign(static_cast<std::size_t>(n), 0);
  const int base = n / K, extra = n % K;
  int pos = 0;
  for (int k = 0; k < K; ++k) {
    const int len = base + (k < extra ? 1 : 0);
    for (int i = 0; i < len; ++i)
      fa.fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = k;
  }
  return fa;
}

// Precomputed per-fold sufficient statistics so repeated submodel fits on the
// same folds (forward search) cost O(q^2) extraction instead of O(n p^2).
struct FoldedDesign {
  FoldAssignment folds;
  std::vector<DesignCache> train_cache;       // per fold, complement rows
  std::vector<std::vector<int>> heldout_rows; // per fold
  const Dataset* data = nullptr;
};

inline FoldedDesign make_folded_design(const Dataset& d, int K,
                                       std::uint64_t seed) {
  FoldedDesign fd;
  fd.folds = make_folds(d.n(), K, seed);
  fd.data = &d;
  fd.train_cache.resize(static_cast<std::size_t>(K));
  fd.heldout_rows.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    std::vector<int> train;
    for (int i = 0; i < d.n(); ++i) {
      if (fd.folds.fold_of[static_cast<std::size_t>(i)] == k)
        fd.heldout_rows[static_cast<std::size_t>(k)].push_back(i);
      else
        train.push_back(i);
    }
    Eigen::MatrixXd Xt(train.size(), d.p());
    Eigen::VectorXd yt(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      Xt.row(static_cast<Eigen::Index>(r)) = d.X.row(train[r]);
      yt[static_cast<Eigen::Index>(r)] = d.y[train[r]];
    }
    fd.train_cache[static_cast<std::size_t>(k)] = make_design_cache(Xt, yt);
  }
  return fd;
}

// ---------------------------------------------------------------------------
// K-fold cross-validation utility (K = n gives exact refit LOO).

inline UtilityEstimate kfold_cv(const FoldedDesign& fd,
                                const SubmodelIndicator& subset,
                                const GaussPrior& prior) {
  const Dataset& d = *fd.data;
  Eigen::VectorXd pw(d.n());
  for (int k = 0; k < fd.folds.K; ++k) {
    const FittedModel fm =
        fit(fd.train_cache[static_cast<std::size_t>(k)], subset, prior);
    for (int i : fd.heldout_rows[static_cast<std::size_t>(k)]) {
      const PredictiveMixture mix = predictive_at_row(fm, d.X.row(i));
      pw[i] = mixture_log_density(mix, d.y[i]);
    }
  }
  return UtilityEstimate::from_pointwise(std::move(pw));
}

inline UtilityEstimate kfold_cv(const Dataset& d, const SubmodelIndicator& subset,
                                const GaussPrior& prior, int K,
                                std::uint64_t seed) {
  return kfold_cv(make_folded_design(d, K, seed), subset, prior);
}

// ---------------------------------------------------------------------------
// WAIC: pointwise lppd minus the per-point functional variance (sample
// variance over draws, divisor S-1; V = 0 when S = 1).

inline UtilityEstimate waic(const Dataset& d, const SubmodelIndicator& subset,
                            const PosteriorDraws& draws) {
  draws.validate();
  if (draws.subset != subset)
    throw DimensionMismatch("draws subset does not match criterion subset");
  const int S = draws.count();
  Eigen::VectorXd pw(d.n());
  double V_total = 0.0;
  Eigen::VectorXd lp(S);
  for (int i = 0; i < d.n(); ++i) {
    const Eigen::VectorXd x = subset.gather_row(d.X.row(i));
    for (int s = 0; s < S; ++s)
      lp[s] = normal_log_pdf(d.y[i], draws.w.row(s).dot(x), draws.sigma2[s]);
    const double lppd_i = log_sum_exp(lp) - std::log(static_cast<double>(S));
    double V_i = 0.0;
    if (S > 1) {
      const double m = lp.mean();
      V_i = (lp.array() - m).square().sum() / (S - 1);
    }
    pw[i] = lppd_i - V_i;
    V_total += V_i;
  }
  UtilityEstimate u = UtilityEstimate::from_pointwise(std::move(pw));
  u.V = V_total;
  return u;
}

// ---------------------------------------------------------------------------
// DIC: plug-in log density at the componentwise posterior mean of (w, sigma2)
// minus the effective number of parameters p_eff.

inline UtilityEstimate dic(const Dataset& d, const SubmodelIndicator& subset,
                           const PosteriorDraws& draws) {
  draws.validate();
  if (draws.subset != subset)
    throw DimensionMismatch("draws subset does not match criterion subset");
  const int S = draws.count();
  const Eigen::VectorXd w_bar = draws.w.colwise().mean();
  const double sigma2_bar = draws.sigma2.mean();
  Eigen::VectorXd pw(d.n());
  double p_eff = 0.0;
  Eigen::VectorXd lp(S);
  for (int i = 0; i < d.n(); ++i) {
    const Eigen::VectorXd x = subset.gather_row(d.X.row(i));
    const double lp_bar = normal_log_pdf(d.y[i], w_bar.dot(x), sigma2_bar);
    for (int s = 0; s < S; ++s)
      lp[s] = normal_log_pdf(d.y[i], draws.w.row(s).dot(x), draws.sigma2[s]);
    const double p_eff_i = 2.0 * (lp_bar - lp.mean());
    pw[i] = lp_bar - p_eff_i;
    p_eff += p_eff_i;
  }
  UtilityEstimate u = UtilityEstimate::from_pointwise(std::move(pw));
  u.p_eff = p_eff;
  return u;
}

// ---------------------------------------------------------------------------
// L2 family: squared errors of mean predictions plus predictive variances,
// evaluated at the training inputs. Lower is better.

inline double l2(const Dataset& d, const FittedModel& fm) {
  double sse = 0.0, var_sum = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    const auto [m, v] = predictive_mean_var(fm, fm.subset.gather_row(d.X.row(i)));
    sse += (d.y[i] - m) * (d.y[i] - m);
    var_sum += v;
  }
  return sse + var_sum;
}

inline double l2_cv(const FoldedDesign& fd, const SubmodelIndicator& subset,
                    const GaussPrior& prior) {
  const Dataset& d = *fd.data;
  double total = 0.0;
  for (int k = 0; k < fd.folds.K; ++k) {
    const FittedModel fm =
        fit(fd.train_cache[static_cast<std::size_t>(k)], subset, prior);
    for (int i : fd.heldout_rows[static_cast<std::size_t>(k)]) {
      const auto [m, v] = predictive_mean_var(fm, subset.gather_row(d.X.row(i)));
      total += (d.y[i] - m) * (d.y[i] - m) + v;
    }
  }
  return total;
}

inline double l2_cv(const Dataset& d, const SubmodelIndicator& subset,
                    const GaussPrior& prior, int K, std::uint64_t seed) {
  return l2_cv(make_folded_design(d, K, seed), subset, prior);
}

// k/(k+1) SSE + sum of predictive variances; k = 0 keeps only the variances,
// k -> infinity recovers l2.
inline double l2_k(const Dataset& d, const FittedModel& fm, double k) {
  if (k < 0.0) throw ConfigError("l2_k needs k >= 0");
  double sse = 0.0, var_sum = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    const auto [m, v] = predictive_mean_var(fm, fm.subset.gather_row(d.X.row(i)));
    sse += (d.y[i] - m) * (d.y[i] - m);
    var_sum += v;
  }
  return k / (k + 1.0) * sse + var_sum;
}

// ---------------------------------------------------------------------------
// Test-set metrics.

using PredictiveSource =
    std::function<PredictiveMixture(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

inline UtilityEstimate mlpd(const PredictiveSource& predictor,
                            const Dataset& test) {
  if (test.n() < 1) throw DimensionMismatch("mlpd needs a nonempty test set");
  Eigen::VectorXd pw(test.n());
  for (int i = 0; i < test.n(); ++i)
    pw[i] = mixture_log_density(predictor(test.X.row(i)), test.y[i]);
  return UtilityEstimate::from_pointwise(std::move(pw));
}

inline UtilityEstimate delta_mlpd(const UtilityEstimate& model_utility,
                                  const UtilityEstimate& reference_utility) {
  if (model_utility.pointwise.size() != reference_utility.pointwise.size())
    throw LengthMismatch("delta_mlpd pointwise lengths differ");
  return UtilityEstimate::from_pointwise(model_utility.pointwise -
                                         reference_utility.pointwise);
}

}  // namespace bpms

#endif

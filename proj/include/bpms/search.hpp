// Forward search over variable subsets, criterion/explanatory-power selection
// along a path, the Bayesian-bootstrap utility comparison, and the (U, alpha)
// size-selection rule.
#ifndef BPMS_SEARCH_HPP
#define BPMS_SEARCH_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpms/core.hpp"
#include "bpms/errors.hpp"
#include "bpms/rng.hpp"

namespace bpms {

struct SearchPath {
  std::vector<int> order;                // variables in inclusion order
  std::vector<double> criterion_values;  // sizes 0..order.size()
  std::vector<double> discrepancies;     // reference-method paths only
  std::string method;

  int max_size() const { return static_cast<int>(order.size()); }

  // Size-m prefix as an indicator over p variables.
  SubmodelIndicator prefix(int m, int p) const {
    SubmodelIndicator s(p);
    for (int i = 0; i < m; ++i)
      s.gamma[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
    return s;
  }
};

using SubsetCriterion = std::function<double(const SubmodelIndicator&)>;

// Greedy maximization: at each step add the candidate with the largest
// criterion; candidates within tie_tol of the best resolve to the smallest
// variable index.
inline SearchPath forward_search(int p, const SubsetCriterion& criterion,
                                 int max_size, double tie_tol = 1e-10) {
  if (max_size < 0 || max_size > p)
    throw ConfigError("forward search max_size outside [0, p]");
  SearchPath path;
  SubmodelIndicator current = SubmodelIndicator::empty_model(p);
  path.criterion_values.push_back(criterion(current));
  for (int step = 0; step < max_size; ++step) {
    int best_var = -1;
    double best_value = 0.0;
    for (int j = 1; j <= p; ++j) {
      if (current.includes(j)) continue;
      const double value = criterion(current.with(j));
      if (best_var < 0 || value > best_value + tie_tol) {
        best_var = j;
        best_value = value;
      }
    }
    current = current.with(best_var);
    path.order.push_back(best_var);
    path.criterion_values.push_back(best_value);
  }
  return path;
}

// Criterion-argmax selection; ties resolve to the smaller size.
inline int select_size_by_criterion(const std::vector<double>& values) {
  int best = 0;
  for (std::size_t m = 1; m < values.size(); ++m)
    if (values[m] > values[static_cast<std::size_t>(best)])
      best = static_cast<int>(m);
  return best;
}

inline SubmodelIndicator select_by_criterion(const SearchPath& path, int p) {
  return path.prefix(select_size_by_criterion(path.criterion_values), p);
}

// Smallest size whose relative explanatory power reaches the threshold. The
// size-0 discrepancy defines the scale; reaching no size returns the largest.
inline int select_size_by_explanatory_power(
    const std::vector<double>& discrepancies, double threshold = 0.95) {
  if (discrepancies.empty())
    throw ConfigError("empty discrepancy path");
  const double delta_null = discrepancies.front();
  if (delta_null <= 1e-12) throw NullModelZeroDiscrepancy();
  for (std::size_t m = 0; m < discrepancies.size(); ++m) {
    const double phi = 1.0 - discrepancies[m] / delta_null;
    if (phi >= threshold) return static_cast<int>(m);
  }
  return static_cast<int>(discrepancies.size()) - 1;
}

inline SubmodelIndicator select_by_explanatory_power(const SearchPath& path,
                                                     int p,
                                                     double threshold = 0.95) {
  return path.prefix(
      select_size_by_explanatory_power(path.discrepancies, threshold), p);
}

// ---------------------------------------------------------------------------
// Size selection from cross-validation outside the search.

struct SizeSelectionInput {
  // Row m holds the held-out pointwise log densities of the size-m model,
  // assembled across outer folds in original observation order.
  Eigen::MatrixXd per_size_pointwise;   // (max_size+1) x n
  Eigen::VectorXd reference_pointwise;  // n

  int sizes() const { return static_cast<int>(per_size_pointwise.rows()); }
  int points() const { return static_cast<int>(per_size_pointwise.cols()); }

  void validate() const {
    if (reference_pointwise.size() != per_size_pointwise.cols())
      throw LengthMismatch("reference pointwise length != held-out points");
  }
};

struct SizeDecision {
  int m = 0;
  Eigen::VectorXd probabilities;  // per size, Pr(weighted mean diff >= U)
  double U = 0.0;
  double alpha = 0.0;
  bool satisfied = false;
};

// Pr( sum_i w_i d_i >= U ) under uniform Dirichlet weights, B draws.
inline double bayesian_bootstrap_prob(
    const Eigen::Ref<const Eigen::VectorXd>& pointwise_diff, double U, int B,
    std::uint64_t seed) {
  if (pointwise_diff.size() < 1)
    throw LengthMismatch("bootstrap needs a nonempty difference vector");
  if (B < 1) throw ConfigError("bootstrap needs B >= 1");
  Rng rng(seed);
  Eigen::VectorXd w(pointwise_diff.size());
  int hits = 0;
  for (int b = 0; b < B; ++b) {
    rng.dirichlet_uniform(w);
    if (w.dot(pointwise_diff) >= U) ++hits;
  }
  return static_cast<double>(hits) / B;
}

// Smallest m with Pr(DeltaMLPD(m) >= U) >= alpha. The same seed is used for
// every size so all sizes see identical Dirichlet weights, which makes the
// rule monotone in U and alpha.
inline SizeDecision select_size(const SizeSelectionInput& input, double U,
                                double alpha, int B, std::uint64_t seed) {
  input.validate();
  if (alpha <= 0.0 || alpha >= 1.0)
    throw ConfigError("alpha must lie in (0,1)");
  SizeDecision dec;
  dec.U = U;
  dec.alpha = alpha;
  dec.probabilities.resize(input.sizes());
  dec.m = input.sizes() - 1;
  dec.satisfied = false;
  for (int m = 0; m < input.sizes(); ++m) {
    const Eigen::VectorXd diff =
        input.per_size_pointwise.row(m).transpose() - input.reference_pointwise;
    dec.probabilities[m] = bayesian_bootstrap_prob(diff, U, B, seed);
    if (!dec.satisfied && dec.probabilities[m] >= alpha) {
      dec.m = m;
      dec.satisfied = true;
    }
  }
  return dec;
}

// Per-size optimism of an in-selection estimate against an out-of-sample one.
inline std::vector<double> bias_gap(const std::vector<double>& in_selection,
                                    const std::vector<double>& out_of_sample) {
  if (in_selection.size() != out_of_sample.size())
    throw LengthMismatch("bias_gap size ranges differ");
  std::vector<double> gap(in_selection.size());
  for (std::size_t m = 0; m < gap.size(); ++m)
    gap[m] = in_selection[m] - out_of_sample[m];
  return gap;
}

}  // namespace bpms

#endif

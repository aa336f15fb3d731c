// Reference utility and reference discrepancy, evaluated by one-dimensional
// trapezoid quadrature on a grid centered at the reference predictive mean.
#ifndef BPMS_REFERENCE_HPP
#define BPMS_REFERENCE_HPP

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "bpms/core.hpp"
#include "bpms/errors.hpp"
#include "bpms/special.hpp"

namespace bpms {

struct QuadratureSpec {
  int points = 201;
  double half_width_scales = 10.0;

  void validate() const {
    if (points < 11 || points % 2 == 0)
      throw ConfigError("quadrature points must be odd and >= 11");
    if (half_width_scales <= 0.0)
      throw ConfigError("quadrature half width must be positive");
  }
};

// Per-point reference grid: abscissas, trapezoid weights, reference density
// values, and the reference self-utility (negative entropy). Building it once
// per training point lets a search evaluate many candidates cheaply.
struct ReferenceGrid {
  Eigen::VectorXd ys;
  Eigen::VectorXd weights;      // trapezoid weights times reference density
  double self_utility = 0.0;    // int p* log p*
};

inline ReferenceGrid make_reference_grid(const PredictiveMixture& ref,
                                         const QuadratureSpec& quad) {
  quad.validate();
  const double center = ref.mean();
  const double sd = ref.sd();
  const int m = quad.points;
  ReferenceGrid grid;
  grid.ys.resize(m);
  grid.weights.resize(m);
  const double lo = center - quad.half_width_scales * sd;
  const double hi = center + quad.half_width_scales * sd;
  const double h = (hi - lo) / (m - 1);
  double self = 0.0;
  for (int k = 0; k < m; ++k) {
    const double y = lo + h * k;
    const double trap = (k == 0 || k == m - 1) ? 0.5 * h : h;
    const double log_ref = mixture_log_density(ref, y);
    const double w = trap * std::exp(log_ref);
    grid.ys[k] = y;
    grid.weights[k] = w;
    if (w > 0.0) self += w * log_ref;
  }
  grid.self_utility = self;
  return grid;
}

// int p*(y) log p_cand(y) dy on a prebuilt grid. Returns -inf when the
// candidate density is exactly zero somewhere the reference has mass.
inline double cross_utility(const ReferenceGrid& grid,
                            const PredictiveMixture& cand) {
  double acc = 0.0;
  for (int k = 0; k < grid.ys.size(); ++k) {
    if (grid.weights[k] == 0.0) continue;
    const double lp = mixture_log_density(cand, grid.ys[k]);
    if (lp == kNegInf || std::isnan(lp)) return kNegInf;
    acc += grid.weights[k] * lp;
  }
  return acc;
}

using MixtureAt = std::function<PredictiveMixture(int)>;

// Mean over training points of int p*(.|x_i) log p(.|x_i).
inline double reference_utility(const MixtureAt& ref, const MixtureAt& cand,
                                int n_points, const QuadratureSpec& quad) {
  double acc = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double u = cross_utility(make_reference_grid(ref(i), quad), cand(i));
    if (u == kNegInf) return kNegInf;
    acc += u;
  }
  return acc / n_points;
}

inline double reference_utility(const std::vector<PredictiveMixture>& ref,
                                const std::vector<PredictiveMixture>& cand,
                                const QuadratureSpec& quad) {
  if (ref.size() != cand.size())
    throw LengthMismatch("reference/candidate predictive counts differ");
  return reference_utility([&](int i) { return ref[static_cast<std::size_t>(i)]; },
                           [&](int i) { return cand[static_cast<std::size_t>(i)]; },
                           static_cast<int>(ref.size()), quad);
}

// Mean predictive KL divergence: reference self-utility minus cross utility.
inline double reference_discrepancy(const MixtureAt& ref, const MixtureAt& cand,
                                    int n_points, const QuadratureSpec& quad) {
  double acc = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const ReferenceGrid grid = make_reference_grid(ref(i), quad);
    const double u = cross_utility(grid, cand(i));
    if (u == kNegInf) return std::numeric_limits<double>::infinity();
    acc += grid.self_utility - u;
  }
  return acc / n_points;
}

inline double reference_discrepancy(const std::vector<PredictiveMixture>& ref,
                                    const std::vector<PredictiveMixture>& cand,
                                    const QuadratureSpec& quad) {
  if (ref.size() != cand.size())
    throw LengthMismatch("reference/candidate predictive counts differ");
  return reference_discrepancy(
      [&](int i) { return ref[static_cast<std::size_t>(i)]; },
      [&](int i) { return cand[static_cast<std::size_t>(i)]; },
      static_cast<int>(ref.size()), quad);
}

}  // namespace bpms

#endif

// Scalar special functions and log-density primitives.
#ifndef BPMS_SPECIAL_HPP
#define BPMS_SPECIAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace bpms {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

inline double normal_log_pdf(double y, double mean, double var) {
  const double d = y - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// One-slot memo for the dof-dependent normalizer: predictive mixtures share a
// single dof across all their components, so this removes nearly every lgamma
// call from density evaluation loops.
inline double student_t_log_norm(double dof) {
  thread_local double cached_dof = -1.0;
  thread_local double cached_val = 0.0;
  if (dof != cached_dof) {
    cached_val = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                 0.5 * std::log(dof * M_PI);
    cached_dof = dof;
  }
  return cached_val;
}

inline double student_t_log_pdf(double y, double loc, double scale,
                                double dof) {
  const double z = (y - loc) / scale;
  return student_t_log_norm(dof) - std::log(scale) -
         0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

inline double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Regularized lower incomplete gamma P(a, x); series for x < a+1, Lentz
// continued fraction otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return 0.0;
  const double log_pre = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return std::min(1.0, sum * std::exp(log_pre));
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_pre) * h);
}

inline double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

// Inverse of P(a, .) by bracketed bisection; accurate to full double width.
inline double gamma_p_inv(double a, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  double lo = 0.0;
  double hi = std::max(a, 1.0);
  while (gamma_p(a, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (gamma_p(a, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double inv_gamma_log_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

inline double inv_gamma_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return gamma_q(shape, scale / x);
}

// Quantile of InvGamma(shape, scale): if G ~ Gamma(shape, 1) then
// scale / G ~ InvGamma(shape, scale).
inline double inv_gamma_quantile(double p, double shape, double scale) {
  const double g = gamma_p_inv(shape, 1.0 - p);
  return scale / g;
}

}  // namespace bpms

#endif

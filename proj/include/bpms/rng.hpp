// Deterministic random number generation. The engine and every variate
// transform are fixed here rather than delegated to <random>, so that a seed
// produces the same stream on every platform and toolchain.
#ifndef BPMS_RNG_HPP
#define BPMS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace bpms {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Sub-seeding rule used everywhere a task (chain, fold, replication, draw
// block) needs its own stream: feed the parent seed and the task id through
// splitmix64 twice. Documented so external reimplementations can match it.
inline std::uint64_t seed_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1));
  return splitmix64(s);
}

// xoshiro256++ by Blackman & Vigna, seeded via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
    have_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 random bits.
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1].
  double u01_pos() { return 1.0 - u01(); }

  // Unbiased uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via the Marsaglia polar method (pair cached).
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * f;
    have_cached_normal_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(u01_pos()); }

  // Gamma(shape, scale 1) via Marsaglia & Tsang; shape < 1 handled by the
  // power boost Gamma(a) = Gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = u01_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = u01_pos();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // InvGamma(shape, scale): scale / Gamma(shape, 1).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape); }

  // Uniform Dirichlet(1,...,1) weights: normalized exponentials.
  void dirichlet_uniform(Eigen::Ref<Eigen::VectorXd> out) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] = exponential();
      total += out[i];
    }
    out /= total;
  }

  // Seeded Fisher-Yates, the fold-shuffle primitive.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Index into a categorical distribution given cumulative weights
  // (cum.back() == total mass).
  int categorical_from_cumulative(const Eigen::VectorXd& cum) {
    const double u = u01() * cum[cum.size() - 1];
    int lo = 0, hi = static_cast<int>(cum.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cum[mid] <= u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  bool have_cached_normal_;
  double cached_normal_;
};

}  // namespace bpms

#endif

#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "aae/error.hpp"

namespace aae {

/// splitmix64 mixing step. Used for counter-based seed derivation so that
/// child streams are independent of execution order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for work unit `index` under `parent`. Deterministic and
/// order-independent, so parallel replications reproduce bit-identically.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent ^ splitmix64(index + 0x51f15eedULL));
}

/// Seeded random stream. Wraps mt19937_64 but generates doubles by explicit
/// bit manipulation instead of std::uniform_real_distribution, whose output
/// is implementation-defined; this keeps datasets reproducible across
/// standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Index drawn from an (unnormalized is rejected) probability vector via
  /// inverse CDF.
  int categorical(const Eigen::VectorXd& probs) {
    const double u = uniform01();
    double acc = 0.0;
    for (int j = 0; j < probs.size(); ++j) {
      acc += probs(j);
      if (u < acc) return j;
    }
    return static_cast<int>(probs.size()) - 1;  // u landed in rounding slack
  }

  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t next_u64() { return gen_(); }

private:
  std::mt19937_64 gen_;
};

}  // namespace aae

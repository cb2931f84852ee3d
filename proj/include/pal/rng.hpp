#ifndef PAL_RNG_HPP
#define PAL_RNG_HPP

#include <cstdint>
#include <random>

#include "pal/types.hpp"

namespace pal {

/// Seeded random stream with splittable substreams so replicates, chains and
/// particle-filter calls draw from independent, reproducible streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Derives an independent stream; (seed, k) -> stream is a pure function.
  Rng substream(std::uint64_t k) const;

  std::uint64_t seed() const { return seed_; }

  /// Uniform on (0,1), never returning 0 or 1.
  double uniform();
  double normal(double mean, double sd);
  std::int64_t poisson(double mean);

  /// Exact Binomial(n, p) draw by waiting-time inversion (geometric jumps).
  /// Cost is O(n * min(p, 1-p)); counts beyond ~1e7 expected successes are
  /// refused unless allow_normal_approx() was set, in which case a rounded
  /// normal approximation is used.
  std::int64_t binomial(std::int64_t n, double p);

  /// Multinomial(n, p) via sequential conditional binomials; zero-probability
  /// categories are skipped.
  IVec multinomial(std::int64_t n, const Vec& p);

  void allow_normal_approx(bool on) { allow_normal_approx_ = on; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool allow_normal_approx_ = false;
};

/// splitmix64 mix, used to derive substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pal

#endif

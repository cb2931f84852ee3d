#include "pal/rng.hpp"

#include <cmath>

namespace pal {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::substream(std::uint64_t k) const {
  Rng r(splitmix64(seed_ ^ splitmix64(k + 0x632be59bd9b4e019ULL)));
  r.allow_normal_approx_ = allow_normal_approx_;
  return r;
}

double Rng::uniform() {
  // 53-bit mantissa uniform in (0,1)
  const std::uint64_t u = engine_() >> 11;
  double v = (static_cast<double>(u) + 0.5) * 0x1.0p-53;
  return v;
}

double Rng::normal(double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  return d(engine_);
}

std::int64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> d(mean);
  return d(engine_);
}

std::int64_t Rng::binomial(std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);

  const double expected = static_cast<double>(n) * p;
  if (expected > 1e7) {
    if (!allow_normal_approx_)
      throw NumericalError(
          "binomial: expected count exceeds 1e7; enable normal approximation "
          "explicitly for counts of this size");
    const double sd = std::sqrt(expected * (1.0 - p));
    double v = std::round(normal(expected, sd));
    if (v < 0) v = 0;
    if (v > static_cast<double>(n)) v = static_cast<double>(n);
    return static_cast<std::int64_t>(v);
  }

  // Waiting-time method: jump over failures geometrically, count successes.
  const double c = std::log1p(-p);
  std::int64_t x = 0;
  std::int64_t trials = 0;
  for (;;) {
    trials += static_cast<std::int64_t>(std::floor(std::log(uniform()) / c)) + 1;
    if (trials > n) break;
    ++x;
  }
  return x;
}

IVec Rng::multinomial(std::int64_t n, const Vec& p) {
  IVec out = IVec::Zero(p.size());
  if (n <= 0) return out;
  Eigen::Index last = -1;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) last = i;
  if (last < 0) throw NumericalError("multinomial: all category probabilities are zero");
  double remaining = p.sum();
  std::int64_t left = n;
  for (Eigen::Index i = 0; i < last && left > 0; ++i) {
    if (p[i] <= 0.0) continue;
    double cond = p[i] / remaining;
    if (cond > 1.0) cond = 1.0;
    const std::int64_t k = binomial(left, cond);
    out[i] = k;
    left -= k;
    remaining -= p[i];
  }
  out[last] += left;
  return out;
}

}  // namespace pal

#ifndef PAL_TYPES_HPP
#define PAL_TYPES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Config/data errors: exit code 2 in the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model/data incompatibility (probability-zero observation): exit code 3.
struct IncompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite intensity, divergence): exit code 4.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Normalises a nonnegative vector to a probability vector.
/// The all-zero vector maps to the all-zero vector.
template <class Derived>
Vec normalize_counts(const Eigen::MatrixBase<Derived>& x) {
  Vec v = x.template cast<double>();
  if ((v.array() < 0.0).any())
    throw std::invalid_argument("normalize_counts: negative entry");
  const double s = v.sum();
  if (s == 0.0) return Vec::Zero(v.size());
  return v / s;
}

/// log(y!) via lgamma, safe for large counts.
inline double log_factorial(double y) { return std::lgamma(y + 1.0); }

/// log pmf of Poisson(mean) at k, with the 0 log 0 := 0 convention.
inline double poisson_logpmf(double k, double mean) {
  if (mean == 0.0) return k == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return -mean + k * std::log(mean) - log_factorial(k);
}

/// log pmf of Binomial(n, p) at k.
inline double binomial_logpmf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (p <= 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return k == n ? 0.0 : -std::numeric_limits<double>::infinity();
  const double dk = static_cast<double>(k), dn = static_cast<double>(n);
  return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0) +
         dk * std::log(p) + (dn - dk) * std::log1p(-p);
}

/// KL(Poi[a] || Poi[b]) summed over coordinates, with 0 log 0 := 0.
/// a_i > 0 with b_i = 0 is a support mismatch and yields +inf.
inline double poisson_kl(const Vec& a, const Vec& b) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      kl += b[i];
    } else if (b[i] == 0.0) {
      return std::numeric_limits<double>::infinity();
    } else {
      kl += a[i] * std::log(a[i] / b[i]) - a[i] + b[i];
    }
  }
  return kl;
}

inline double logsumexp(const Vec& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

inline std::string describe_step(const char* what, int t) {
  return std::string(what) + " at t=" + std::to_string(t);
}

}  // namespace pal

#endif

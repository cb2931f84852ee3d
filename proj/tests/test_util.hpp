#ifndef PAL_TEST_UTIL_HPP
#define PAL_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "pal/model.hpp"

namespace pal::test {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i; else ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

/// Critical value of the two-sample KS test at level alpha = 0.01.
inline double ks_critical_01(size_t n1, size_t n2) {
  return 1.628 * std::sqrt(static_cast<double>(n1 + n2) / (static_cast<double>(n1) * n2));
}

/// One-sample KS statistic against a cdf.
template <class Cdf>
double ks_statistic_cdf(std::vector<double> a, Cdf cdf) {
  std::sort(a.begin(), a.end());
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / a.size()));
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / a.size()));
  }
  return d;
}

/// A 2-compartment toy with constant kernel and full prevalence observation
/// machinery (detection, mis-reporting, clutter), small enough to enumerate.
inline ModelSpec tiny_prevalence_toy(bool deterministic_routing) {
  ModelSpec spec;
  spec.m = 2;
  Vec lambda0(2);
  lambda0 << 3.0, 2.0;
  spec.initial = VectorPoissonInit{lambda0};
  Vec alpha(2), delta(2);
  alpha << 0.5, 0.4;
  delta << 0.9, 0.8;
  spec.alpha = [alpha](int) { return alpha; };
  spec.delta = [delta](int) { return delta; };
  Mat K(2, 2);
  K << 0.7, 0.3, 0.2, 0.8;
  spec.kernel = [K](int, const Vec&) { return K; };
  PrevalenceModel prev;
  Vec q(2), kappa(2);
  q << 0.6, 0.5;
  kappa << 0.3, 0.2;
  Mat G(2, 2);
  if (deterministic_routing)
    G << 1.0, 0.0, 0.0, 1.0;
  else
    G << 0.9, 0.1, 0.3, 0.7;
  prev.q = [q](int) { return q; };
  prev.G = [G](int) { return G; };
  prev.kappa = [kappa](int) { return kappa; };
  prev.kappa_limit = [kappa](int) { return kappa; };
  spec.prevalence = std::move(prev);
  spec.lambda0_limit = lambda0;
  spec.alpha_limit = [alpha](int) { return alpha; };
  return spec;
}

/// A 2-compartment chain with constant kernel observed on the 1->2 edge,
/// closed population; the structure for which the case (II) PAL is exact.
inline ModelSpec tiny_incidence_chain(double k12 = 0.3, double q12 = 0.6,
                                      double lambda1 = 4.0) {
  ModelSpec spec;
  spec.m = 2;
  Vec lambda0(2);
  lambda0 << lambda1, 0.0;
  spec.initial = VectorPoissonInit{lambda0};
  spec.alpha = [](int) { return Vec::Zero(2); };
  spec.delta = [](int) { return Vec::Ones(2); };
  Mat K(2, 2);
  K << 1.0 - k12, k12, 0.0, 1.0;
  spec.kernel = [K](int, const Vec&) { return K; };
  IncidenceModel inc;
  Mat Q = Mat::Zero(2, 2);
  Q(0, 1) = q12;
  inc.Q = [Q](int) { return Q; };
  spec.incidence = std::move(inc);
  spec.lambda0_limit = lambda0;
  spec.alpha_limit = [](int) { return Vec::Zero(2); };
  return spec;
}

inline std::vector<int> unit_tau(int T) {
  std::vector<int> tau(T + 1);
  for (int t = 0; t <= T; ++t) tau[t] = t;
  return tau;
}

}  // namespace pal::test

#endif

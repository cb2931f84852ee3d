#include "pal/obs_pmf.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPoissonTailTol = 1e-14;

/// pmf table of Pois(mean) on 0..cap, truncated where the tail mass drops
/// below kPoissonTailTol.
std::vector<double> poisson_table(double mean, std::int64_t cap) {
  std::vector<double> p;
  if (mean <= 0.0) {
    p.push_back(1.0);
    return p;
  }
  double cum = 0.0;
  for (std::int64_t k = 0; k <= cap; ++k) {
    const double v = std::exp(poisson_logpmf(static_cast<double>(k), mean));
    p.push_back(v);
    cum += v;
    if (k > mean && 1.0 - cum < kPoissonTailTol) break;
  }
  return p;
}

/// pmf table of Bin(n, p) on 0..min(n, cap); entries beyond the cap can
/// never contribute to a convolution targeted at a count of cap.
std::vector<double> binomial_table(std::int64_t n, double p, std::int64_t cap) {
  const std::int64_t top = std::min(n, cap);
  std::vector<double> out(top + 1);
  for (std::int64_t k = 0; k <= top; ++k) out[k] = std::exp(binomial_logpmf(k, n, p));
  return out;
}

void convolve_into(std::vector<double>& acc, const std::vector<double>& add, size_t cap) {
  std::vector<double> next(std::min(acc.size() + add.size() - 1, cap + 1), 0.0);
  for (size_t a = 0; a < acc.size(); ++a) {
    if (acc[a] == 0.0) continue;
    for (size_t b = 0; b < add.size() && a + b < next.size(); ++b)
      next[a + b] += acc[a] * add[b];
  }
  acc = std::move(next);
}

}  // namespace

bool deterministic_routing(const ModelSpec& spec, int t) {
  if (!spec.prevalence) return false;
  const Vec q = spec.prevalence->q(t);
  const Mat G = spec.prevalence->G(t);
  for (int j = 0; j < spec.m; ++j) {
    if (q[j] <= 0.0) continue;
    for (int i = 0; i < spec.m; ++i)
      if (G(j, i) != 0.0 && G(j, i) != 1.0) return false;
  }
  return true;
}

double prevalence_obs_logpmf(const IVec& y, const IVec& x, int t, const ModelSpec& spec) {
  if (!spec.prevalence) throw ConfigError("prevalence_obs_logpmf: no prevalence block");
  const int m = spec.m;
  const Vec q = spec.prevalence->q(t);
  const Mat G = spec.prevalence->G(t);
  const Vec kappa = spec.prevalence->kappa(t);

  // route[j] = the unique target of detected individuals from compartment j
  std::vector<int> route(m, -1);
  for (int j = 0; j < m; ++j) {
    if (q[j] <= 0.0) continue;
    for (int i = 0; i < m; ++i) {
      if (G(j, i) == 0.0) continue;
      if (G(j, i) != 1.0 || route[j] >= 0)
        throw ConfigError(
            "prevalence_obs_logpmf: exact per-coordinate convolution needs a "
            "deterministic mis-reporting matrix; use the enumeration pmf");
      route[j] = i;
    }
  }

  double ll = 0.0;
  for (int i = 0; i < m; ++i) {
    const std::int64_t yi = y[i];
    // count the binomial sources feeding this coordinate
    int n_src = 0, only = -1;
    for (int j = 0; j < m; ++j)
      if (route[j] == i && x[j] > 0) {
        ++n_src;
        only = j;
      }
    if (kappa[i] == 0.0 && n_src == 0) {
      if (yi != 0) return kNegInf;
      continue;
    }
    if (kappa[i] == 0.0 && n_src == 1) {
      const double lp = binomial_logpmf(yi, x[only], q[only]);
      if (lp == kNegInf) return kNegInf;
      ll += lp;
      continue;
    }
    std::vector<double> dist{1.0};  // pmf of the sum feeding coordinate i
    for (int j = 0; j < m; ++j) {
      if (route[j] != i || x[j] == 0) continue;
      convolve_into(dist, binomial_table(x[j], q[j], yi), static_cast<size_t>(yi));
    }
    if (kappa[i] > 0.0) convolve_into(dist, poisson_table(kappa[i], yi), static_cast<size_t>(yi));
    const double p = (static_cast<size_t>(yi) < dist.size()) ? dist[yi] : 0.0;
    if (p <= 0.0) return kNegInf;
    ll += std::log(p);
  }
  return ll;
}

namespace {

/// Recursively enumerate routing matrices row by row, accumulating the
/// column sums of routed individuals.
void enumerate_routing(const std::vector<std::int64_t>& detected, const Mat& G, int row,
                       IVec& colsum, double logp, const IVec& y, const Vec& kappa,
                       double& acc) {
  const int m = static_cast<int>(detected.size());
  if (row == m) {
    double term = logp;
    for (int i = 0; i < m; ++i) {
      const std::int64_t extra = y[i] - colsum[i];
      if (extra < 0) return;
      term += poisson_logpmf(static_cast<double>(extra), kappa[i]);
    }
    if (std::isfinite(term)) acc += std::exp(term);
    return;
  }
  const std::int64_t n = detected[row];
  if (n == 0) {
    enumerate_routing(detected, G, row + 1, colsum, logp, y, kappa, acc);
    return;
  }
  // enumerate compositions of n over the m targets
  std::vector<std::int64_t> comp(m, 0);
  std::function<void(int, std::int64_t, double)> rec = [&](int idx, std::int64_t left,
                                                           double lp) {
    if (idx == m - 1) {
      comp[idx] = left;
      double lterm = lp;
      if (left > 0) {
        if (G(row, idx) <= 0.0) return;
        lterm += left * std::log(G(row, idx)) - log_factorial(static_cast<double>(left));
      }
      for (int i = 0; i < m; ++i) colsum[i] += comp[i];
      bool ok = true;
      for (int i = 0; i < m; ++i)
        if (colsum[i] > y[i]) ok = false;
      if (ok)
        enumerate_routing(detected, G, row + 1, colsum,
                          logp + log_factorial(static_cast<double>(n)) + lterm, y, kappa, acc);
      for (int i = 0; i < m; ++i) colsum[i] -= comp[i];
      return;
    }
    for (std::int64_t k = 0; k <= left; ++k) {
      if (k > 0 && G(row, idx) <= 0.0) break;
      comp[idx] = k;
      double lterm = lp;
      if (k > 0) lterm += k * std::log(G(row, idx)) - log_factorial(static_cast<double>(k));
      rec(idx + 1, left - k, lterm);
    }
    comp[idx] = 0;
  };
  rec(0, n, 0.0);
}

}  // namespace

double prevalence_obs_logpmf_enum(const IVec& y, const IVec& x, int t, const ModelSpec& spec) {
  if (!spec.prevalence) throw ConfigError("prevalence_obs_logpmf_enum: no prevalence block");
  const int m = spec.m;
  const Vec q = spec.prevalence->q(t);
  const Mat G = spec.prevalence->G(t);
  const Vec kappa = spec.prevalence->kappa(t);

  // enumerate detected counts per compartment, then routings
  double total = 0.0;
  std::vector<std::int64_t> detected(m, 0);
  std::function<void(int, double)> rec = [&](int j, double logp) {
    if (j == m) {
      IVec colsum = IVec::Zero(m);
      enumerate_routing(detected, G, 0, colsum, logp, y, kappa, total);
      return;
    }
    for (std::int64_t d = 0; d <= x[j]; ++d) {
      const double lp = binomial_logpmf(d, x[j], q[j]);
      if (lp == kNegInf) continue;
      detected[j] = d;
      rec(j + 1, logp + lp);
    }
    detected[j] = 0;
  };
  rec(0, 0.0);
  return total > 0.0 ? std::log(total) : kNegInf;
}

double incidence_obs_logpmf(const IMat& Y, const IMat& Z, int t, const ModelSpec& spec) {
  if (!spec.incidence) throw ConfigError("incidence_obs_logpmf: no incidence block");
  const Mat Q = spec.incidence->Q(t);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      ll += binomial_logpmf(Y(i, j), Z(i, j), Q(i, j));
      if (ll == kNegInf) return kNegInf;
    }
  return ll;
}

}  // namespace pal

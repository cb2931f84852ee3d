#include "pal/oracle.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace pal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTailTol = 1e-14;
// states below this mass are dropped from the DP; the loss is accounted
constexpr double kPruneTol = 1e-13;

using StateKey = std::vector<std::int64_t>;
using Dist = std::map<StateKey, double>;

StateKey key_of(const IVec& x) { return StateKey(x.data(), x.data() + x.size()); }

IVec vec_of(const StateKey& k) {
  IVec x(k.size());
  for (size_t i = 0; i < k.size(); ++i) x[static_cast<Eigen::Index>(i)] = k[i];
  return x;
}

/// Initial distribution over capped states; mass escaping the cap is recorded.
Dist initial_distribution(const ModelSpec& spec, std::int64_t cap, double& lost) {
  Dist d;
  const int m = spec.m;
  if (const auto* det = std::get_if<DeterministicInit>(&spec.initial)) {
    if (det->x0.sum() > cap) throw ConfigError("enumeration oracle: initial state exceeds cap");
    d[key_of(det->x0)] = 1.0;
    return d;
  }
  if (const auto* mult = std::get_if<MultinomialInit>(&spec.initial)) {
    if (mult->n > cap) throw ConfigError("enumeration oracle: population exceeds cap");
    IVec x = IVec::Zero(m);
    std::function<void(int, std::int64_t, double)> rec = [&](int i, std::int64_t left, double lp) {
      if (i == m - 1) {
        x[i] = left;
        double term = lp;
        if (left > 0) {
          if (mult->pi0[i] <= 0.0) { x[i] = 0; return; }
          term += left * std::log(mult->pi0[i]) - log_factorial(static_cast<double>(left));
        }
        d[key_of(x)] += std::exp(log_factorial(static_cast<double>(mult->n)) + term);
        x[i] = 0;
        return;
      }
      for (std::int64_t k = 0; k <= left; ++k) {
        if (k > 0 && mult->pi0[i] <= 0.0) break;
        x[i] = k;
        double term = lp;
        if (k > 0) term += k * std::log(mult->pi0[i]) - log_factorial(static_cast<double>(k));
        rec(i + 1, left - k, term);
      }
      x[i] = 0;
    };
    rec(0, mult->n, 0.0);
    return d;
  }
  const auto* pois = std::get_if<VectorPoissonInit>(&spec.initial);
  if (!pois)
    throw ConfigError("enumeration oracle: unsupported initial distribution kind");
  const Vec lambda0 = pois->lambda0;
  // product of independent Poissons, truncated per coordinate and by total cap
  IVec x = IVec::Zero(m);
  double captured = 0.0;
  std::function<void(int, std::int64_t, double)> rec = [&](int i, std::int64_t room, double p) {
    if (i == m) {
      d[key_of(x)] += p;
      captured += p;
      return;
    }
    double cum = 0.0;
    for (std::int64_t k = 0; k <= room; ++k) {
      const double pk = std::exp(poisson_logpmf(static_cast<double>(k), lambda0[i]));
      x[i] = k;
      rec(i + 1, room - k, p * pk);
      cum += pk;
      if (k > lambda0[i] && 1.0 - cum < kTailTol) break;
    }
    x[i] = 0;
  };
  rec(0, cap, 1.0);
  lost += 1.0 - captured;
  return d;
}

/// Enumerate transition-count matrices row by row for source counts xbar and
/// kernel K, reporting (column sums, probability) pairs to the sink.
void enumerate_transitions(const IVec& xbar, const Mat& K,
                           const std::function<void(const IVec&, double, const IMat&)>& sink) {
  const int m = static_cast<int>(xbar.size());
  IMat Z = IMat::Zero(m, m);
  IVec colsum = IVec::Zero(m);
  std::function<void(int, double)> row_rec = [&](int row, double p) {
    if (row == m) {
      sink(colsum, p, Z);
      return;
    }
    const std::int64_t n = xbar[row];
    std::function<void(int, std::int64_t, double)> comp_rec = [&](int idx, std::int64_t left,
                                                                  double lp) {
      if (idx == m - 1) {
        if (left > 0 && K(row, idx) <= 0.0) return;
        double term = lp;
        if (left > 0) term += left * std::log(K(row, idx)) - log_factorial(static_cast<double>(left));
        Z(row, idx) = left;
        colsum[idx] += left;
        row_rec(row + 1, p * std::exp(log_factorial(static_cast<double>(n)) + term));
        colsum[idx] -= left;
        Z(row, idx) = 0;
        return;
      }
      for (std::int64_t k = 0; k <= left; ++k) {
        if (k > 0 && K(row, idx) <= 0.0) break;
        double term = lp;
        if (k > 0) term += k * std::log(K(row, idx)) - log_factorial(static_cast<double>(k));
        Z(row, idx) = k;
        colsum[idx] += k;
        comp_rec(idx + 1, left - k, term);
        colsum[idx] -= k;
        Z(row, idx) = 0;
      }
    };
    if (n == 0) {
      row_rec(row + 1, p);
    } else {
      comp_rec(0, n, 0.0);
    }
  };
  row_rec(0, 1.0);
}

/// One latent prediction step of the capped DP for case (I).
Dist predict_dist(const Dist& cur, int t, const ModelSpec& spec, std::int64_t cap, double& lost) {
  const int m = spec.m;
  const Vec delta = spec.delta(t);
  const Vec alpha = spec.alpha(t);
  const bool has_imm = (alpha.array() > 0.0).any();
  Dist next;
  double captured = 0.0, pushed = 0.0;
  for (const auto& [k, p] : cur) {
    pushed += p;
    if (p < kPruneTol) continue;
    const IVec x = vec_of(k);
    // enumerate thinned counts
    IVec xbar = IVec::Zero(m);
    std::function<void(int, double)> thin_rec = [&](int i, double tp) {
      if (i == m) {
        const Mat K = spec.kernel(t, xbar.cast<double>());
        enumerate_transitions(xbar, K, [&](const IVec& colsum, double zp, const IMat&) {
          const double base = tp * zp;
          if (base <= 0.0) return;
          if (!has_imm) {
            if (colsum.sum() <= cap) {
              next[key_of(colsum)] += base;
              captured += base;
            }
            return;
          }
          // convolve with immigration, truncating at the cap
          IVec xprime = colsum;
          std::function<void(int, std::int64_t, double)> imm_rec = [&](int j, std::int64_t room,
                                                                       double ip) {
            if (j == m) {
              next[key_of(xprime)] += ip;
              captured += ip;
              return;
            }
            double cum = 0.0;
            for (std::int64_t a = 0; a <= room; ++a) {
              const double pa = std::exp(poisson_logpmf(static_cast<double>(a), alpha[j]));
              xprime[j] = colsum[j] + a;
              imm_rec(j + 1, room - a, ip * pa);
              cum += pa;
              if (a > alpha[j] && 1.0 - cum < kTailTol) break;
            }
            xprime[j] = colsum[j];
          };
          imm_rec(0, cap - colsum.sum(), base);
        });
        return;
      }
      if (delta[i] >= 1.0) {
        xbar[i] = x[i];
        thin_rec(i + 1, tp);
        xbar[i] = 0;
        return;
      }
      for (std::int64_t b = 0; b <= x[i]; ++b) {
        const double pb = std::exp(binomial_logpmf(b, x[i], delta[i]));
        if (pb <= 0.0) continue;
        xbar[i] = b;
        thin_rec(i + 1, tp * pb);
      }
      xbar[i] = 0;
    };
    thin_rec(0, p);
  }
  lost += pushed - captured;
  return next;
}

EnumResult enumerate_prevalence(const ModelSpec& spec, const std::vector<IVec>& y,
                                std::int64_t cap) {
  const int T = static_cast<int>(y.size()) - 1;
  EnumResult res;
  Dist filt = initial_distribution(spec, cap, res.lost_mass);
  for (int t = 1; t <= T; ++t) {
    Dist pred = predict_dist(filt, t, spec, cap, res.lost_mass);
    const bool fast_pmf = deterministic_routing(spec, t);
    double marginal = 0.0;
    Dist upd;
    for (const auto& [k, p] : pred) {
      const double w =
          std::exp(fast_pmf ? prevalence_obs_logpmf(y[t], vec_of(k), t, spec)
                            : prevalence_obs_logpmf_enum(y[t], vec_of(k), t, spec));
      if (w <= 0.0) continue;
      upd[k] = p * w;
      marginal += p * w;
    }
    if (marginal <= 0.0)
      throw IncompatibilityError("enumeration oracle: observation has zero probability at t=" +
                                 std::to_string(t));
    for (auto& [k, p] : upd) p /= marginal;
    res.loglik += std::log(marginal);
    filt = std::move(upd);
  }
  return res;
}

/// Case (II), closed population.  The DP state is (x, partial sums of Y over
/// the current window restricted to entries that can be observed).
EnumResult enumerate_incidence(const ModelSpec& spec, const std::vector<IMat>& Ybar,
                               const std::vector<int>& tau, std::int64_t cap) {
  const int R = static_cast<int>(Ybar.size()) - 1;
  const int T = tau.back();
  for (int t = 1; t <= T; ++t) {
    if ((spec.delta(t).array() != 1.0).any() || (spec.alpha(t).array() != 0.0).any())
      throw ConfigError("enumeration oracle: incidence case requires a closed population");
  }
  const int m = spec.m;
  // observed entries: any (i,j) with Q_t(i,j) > 0 for some t
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      bool obs = false;
      for (int t = 1; t <= T && !obs; ++t) obs = spec.incidence->Q(t)(i, j) > 0.0;
      if (obs) edges.emplace_back(i, j);
    }

  EnumResult res;
  double lost0 = 0.0;
  Dist init = initial_distribution(spec, cap, lost0);
  res.lost_mass += lost0;

  // state key: x followed by per-edge partial sums
  Dist filt;
  for (const auto& [k, p] : init) {
    StateKey aug = k;
    aug.resize(k.size() + edges.size(), 0);
    filt[aug] += p;
  }

  for (int r = 1; r <= R; ++r) {
    for (int t = tau[r - 1] + 1; t <= tau[r]; ++t) {
      const Mat Q = spec.incidence->Q(t);
      Dist next;
      for (const auto& [k, p] : filt) {
        if (p < kPruneTol) continue;
        IVec x(m);
        for (int i = 0; i < m; ++i) x[i] = k[i];
        const Mat K = spec.kernel(t, x.cast<double>());
        enumerate_transitions(x, K, [&](const IVec& colsum, double zp, const IMat& Z) {
          // enumerate observed counts on each edge
          StateKey aug(m + edges.size());
          for (int i = 0; i < m; ++i) aug[i] = colsum[i];
          std::function<void(size_t, double)> edge_rec = [&](size_t e, double ep) {
            if (e == edges.size()) {
              next[aug] += p * zp * ep;
              return;
            }
            const auto [i, j] = edges[e];
            const std::int64_t z = Z(i, j);
            const std::int64_t prev = k[m + e];
            const std::int64_t remaining = Ybar[r](i, j) - prev;
            for (std::int64_t yv = 0; yv <= z && yv <= remaining; ++yv) {
              const double py = std::exp(binomial_logpmf(yv, z, Q(i, j)));
              if (py <= 0.0) continue;
              aug[m + e] = prev + yv;
              edge_rec(e + 1, ep * py);
            }
            aug[m + e] = prev;
          };
          edge_rec(0, 1.0);
        });
      }
      filt = std::move(next);
    }
    // condition on the window totals
    double marginal = 0.0;
    Dist upd;
    for (const auto& [k, p] : filt) {
      bool match = true;
      for (size_t e = 0; e < edges.size() && match; ++e)
        match = (k[m + e] == Ybar[r](edges[e].first, edges[e].second));
      if (!match) continue;
      StateKey reset = k;
      for (size_t e = 0; e < edges.size(); ++e) reset[m + e] = 0;
      upd[reset] += p;
      marginal += p;
    }
    if (marginal <= 0.0)
      throw IncompatibilityError("enumeration oracle: observation has zero probability at r=" +
                                 std::to_string(r));
    for (auto& [k, p] : upd) p /= marginal;
    res.loglik += std::log(marginal);
    filt = std::move(upd);
  }
  return res;
}

}  // namespace

std::vector<std::pair<IVec, double>> enumerate_one_step_predictive(const ModelSpec& spec,
                                                                   std::int64_t state_cap,
                                                                   double& lost_mass) {
  Dist init = initial_distribution(spec, state_cap, lost_mass);
  Dist pred = predict_dist(init, 1, spec, state_cap, lost_mass);
  std::vector<std::pair<IVec, double>> out;
  out.reserve(pred.size());
  for (const auto& [k, p] : pred) out.emplace_back(vec_of(k), p);
  return out;
}

EnumResult exact_loglik_enumerate(const ModelSpec& spec, const ObservationSeries& data,
                                  std::int64_t state_cap) {
  switch (data.kind) {
    case ObservationSeries::Kind::Prevalence:
      return enumerate_prevalence(spec, data.y, state_cap);
    case ObservationSeries::Kind::Incidence: {
      std::vector<int> tau(data.Y.size());
      for (size_t t = 0; t < data.Y.size(); ++t) tau[t] = static_cast<int>(t);
      std::vector<IMat> Ybar(data.Y.begin(), data.Y.end());
      return enumerate_incidence(spec, Ybar, tau, state_cap);
    }
    case ObservationSeries::Kind::Aggregated:
      return enumerate_incidence(spec, data.Ybar, data.tau, state_cap);
  }
  throw ConfigError("exact_loglik_enumerate: unknown data kind");
}

namespace {

void resample_multinomial(std::vector<IVec>& x, std::vector<IMat>* Z, const Vec& w, Rng& rng) {
  const int N = static_cast<int>(x.size());
  std::vector<IVec> nx(N);
  std::vector<IMat> nz;
  if (Z) nz.resize(N);
  // inverse-CDF draws
  Vec cdf(N);
  double c = 0.0;
  for (int i = 0; i < N; ++i) {
    c += w[i];
    cdf[i] = c;
  }
  for (int i = 0; i < N; ++i) {
    const double u = rng.uniform() * c;
    int lo = 0, hi = N - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cdf[mid] < u) lo = mid + 1; else hi = mid;
    }
    nx[i] = x[lo];
    if (Z) nz[i] = (*Z)[lo];
  }
  x = std::move(nx);
  if (Z) *Z = std::move(nz);
}

void resample_systematic(std::vector<IVec>& x, std::vector<IMat>* Z, const Vec& w, Rng& rng) {
  const int N = static_cast<int>(x.size());
  const double total = w.sum();
  std::vector<IVec> nx(N);
  std::vector<IMat> nz;
  if (Z) nz.resize(N);
  const double step = total / N;
  double u = rng.uniform() * step;
  double c = w[0];
  int j = 0;
  for (int i = 0; i < N; ++i) {
    while (c < u && j + 1 < N) c += w[++j];
    nx[i] = x[j];
    if (Z) nz[i] = (*Z)[j];
    u += step;
  }
  x = std::move(nx);
  if (Z) *Z = std::move(nz);
}

}  // namespace

namespace {

/// Propagate one particle in place without materialising the transition-count
/// matrix; per-step model ingredients are evaluated once by the caller.
void propagate_counts(IVec& x, IVec& scratch, int t, const ModelSpec& spec, const Vec& delta,
                      const Vec& alpha, bool thin, bool immigrate, Rng& rng) {
  const int m = spec.m;
  if (thin)
    for (int i = 0; i < m; ++i) x[i] = rng.binomial(x[i], delta[i]);
  const Mat K = spec.kernel(t, x.cast<double>());
  scratch.setZero();
  for (int i = 0; i < m; ++i) {
    std::int64_t left = x[i];
    if (left == 0) continue;
    // sequential conditional binomials along the kernel row
    double remaining = 1.0;
    int last = m - 1;
    while (last > 0 && K(i, last) == 0.0) --last;
    for (int j = 0; j < last && left > 0; ++j) {
      const double p = K(i, j);
      if (p <= 0.0) continue;
      const std::int64_t k = rng.binomial(left, std::min(1.0, p / remaining));
      scratch[j] += k;
      left -= k;
      remaining -= p;
    }
    scratch[last] += left;
  }
  if (immigrate)
    for (int i = 0; i < m; ++i) scratch[i] += rng.poisson(alpha[i]);
  x.swap(scratch);
}

}  // namespace

ParticleEnsemble particle_filter(const ModelSpec& spec, const ObservationSeries& data,
                                 const ParticleFilterOptions& opt, Rng& rng) {
  if (opt.particles < 2) throw ConfigError("particle_filter: need at least 2 particles");
  const bool prevalence = data.kind == ObservationSeries::Kind::Prevalence;
  if (data.kind == ObservationSeries::Kind::Aggregated)
    throw ConfigError("particle_filter: aggregated incidence data are not supported");
  const int T = data.horizon();
  const int N = opt.particles;

  ParticleEnsemble ens;
  ens.x.resize(N);
  ens.min_ess = static_cast<double>(N);
  std::vector<IMat> Z(prevalence ? 0 : N);
  for (int i = 0; i < N; ++i) ens.x[i] = sample_initial(spec, rng);

  Vec logw(N), w(N);
  IVec scratch(spec.m);
  for (int t = 1; t <= T; ++t) {
    const Vec delta = spec.delta(t);
    const Vec alpha = spec.alpha(t);
    const bool thin = (delta.array() != 1.0).any();
    const bool immigrate = (alpha.array() != 0.0).any();
    for (int i = 0; i < N; ++i) {
      if (prevalence) {
        propagate_counts(ens.x[i], scratch, t, spec, delta, alpha, thin, immigrate, rng);
        logw[i] = prevalence_obs_logpmf(data.y[t], ens.x[i], t, spec);
      } else {
        LatentStep step = step_latent(ens.x[i], t, spec, rng);
        ens.x[i] = std::move(step.x);
        Z[i] = std::move(step.Z);
        logw[i] = incidence_obs_logpmf(data.Y[t], Z[i], t, spec);
      }
    }
    const double lse = logsumexp(logw);
    if (!std::isfinite(lse)) {
      ens.loglik = kNegInf;
      ens.failed_at = t;
      ens.logw = logw;
      return ens;
    }
    ens.loglik += lse - std::log(static_cast<double>(N));
    w = (logw.array() - lse).exp();
    const double ess = 1.0 / w.squaredNorm();
    ens.min_ess = std::min(ens.min_ess, ess);
    if (opt.systematic_resampling)
      resample_systematic(ens.x, prevalence ? nullptr : &Z, w, rng);
    else
      resample_multinomial(ens.x, prevalence ? nullptr : &Z, w, rng);
  }
  ens.logw = logw;
  return ens;
}

double particle_filter_loglik(const ModelSpec& spec, const ObservationSeries& data, int N,
                              Rng& rng) {
  ParticleFilterOptions opt;
  opt.particles = N;
  return particle_filter(spec, data, opt, rng).loglik;
}

}  // namespace pal

#include "pal/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace pal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool spec_is_closed(const ModelSpec& spec, int T) {
  for (int t = 1; t <= T; ++t)
    if ((spec.delta(t).array() != 1.0).any() || (spec.alpha(t).array() != 0.0).any())
      return false;
  return true;
}

/// Per-parameter monotone reparameterisation for proposal moves:
/// identity on (-inf, inf), log on (lo, inf), scaled logit on (lo, hi).
struct Transform {
  enum class Kind { Identity, Log, Logit } kind = Kind::Identity;
  double lo = 0.0, hi = 1.0;

  static Transform for_bounds(double lo, double hi) {
    Transform tr;
    const bool lo_fin = std::isfinite(lo), hi_fin = std::isfinite(hi);
    if (lo_fin && hi_fin) {
      tr.kind = Kind::Logit;
      tr.lo = lo;
      tr.hi = hi;
    } else if (lo_fin) {
      tr.kind = Kind::Log;
      tr.lo = lo;
    }
    return tr;
  }
  double to_z(double x) const {
    switch (kind) {
      case Kind::Identity: return x;
      case Kind::Log: return std::log(x - lo);
      case Kind::Logit: {
        const double u = (x - lo) / (hi - lo);
        return std::log(u / (1.0 - u));
      }
    }
    return x;
  }
  double to_x(double z) const {
    switch (kind) {
      case Kind::Identity: return z;
      case Kind::Log: return lo + std::exp(z);
      case Kind::Logit: return lo + (hi - lo) / (1.0 + std::exp(-z));
    }
    return z;
  }
  double log_jacobian(double z) const {
    switch (kind) {
      case Kind::Identity: return 0.0;
      case Kind::Log: return z;
      case Kind::Logit: {
        const double s = 1.0 / (1.0 + std::exp(-z));
        return std::log(hi - lo) + std::log(s) + std::log1p(-s);
      }
    }
    return 0.0;
  }
};

enum class MhMode { Exact, PseudoMarginal, DelayedAcceptance };

Chain run_chain(const ParamVector& params, const LoglikBackend& loglik,
                const LoglikBackend* screen, const Vec& theta0, const MhOptions& opt,
                MhMode mode) {
  const auto t_start = std::chrono::steady_clock::now();
  const int dim = params.dim();
  if (theta0.size() != dim) throw ConfigError("run_chain: theta0 dimension mismatch");
  if (!params.within_bounds(theta0)) throw ConfigError("run_chain: theta0 out of bounds");

  Rng chain_rng(opt.seed);
  Rng ll_master = chain_rng.substream(0x9d5ULL);
  std::uint64_t ll_calls = 0;
  auto fresh_ll = [&](const Vec& th) {
    Rng r = ll_master.substream(ll_calls++);
    return loglik(th, r);
  };

  std::vector<Transform> tr(dim);
  if (opt.use_transforms)
    for (int j = 0; j < dim; ++j) tr[j] = Transform::for_bounds(params.lo[j], params.hi[j]);

  Vec sd = params.proposal_sd;
  Vec theta = theta0;
  double lp = params.log_prior(theta);
  if (opt.use_transforms)
    for (int j = 0; j < dim; ++j) lp += tr[j].log_jacobian(tr[j].to_z(theta[j]));
  double ll = fresh_ll(theta);
  double pal = (mode == MhMode::DelayedAcceptance) ? (*screen)(theta, chain_rng) : 0.0;

  Chain chain;
  chain.names = params.names;
  chain.seed = opt.seed;
  chain.iterations = opt.iterations;
  chain.burnin = opt.burnin >= 0 ? opt.burnin : opt.iterations / 5;
  const int kept_target = std::max(1, opt.thin_to);
  chain.thin = std::max(1, (opt.iterations - chain.burnin) / kept_target);
  const int kept = (opt.iterations - chain.burnin + chain.thin - 1) / chain.thin;
  chain.draws.resize(kept, dim);
  chain.logtarget.resize(kept);

  Eigen::ArrayXd proposed = Eigen::ArrayXd::Zero(dim), accepted = Eigen::ArrayXd::Zero(dim);
  Eigen::ArrayXd win_prop = Eigen::ArrayXd::Zero(dim), win_acc = Eigen::ArrayXd::Zero(dim);

  const int total_iters = (opt.adapt ? opt.adapt_iters : 0) + opt.iterations;
  int row = 0;
  for (int it = 0; it < total_iters; ++it) {
    const bool adapting = opt.adapt && it < opt.adapt_iters;
    const int rec_it = it - (opt.adapt ? opt.adapt_iters : 0);
    for (int j = 0; j < dim; ++j) {
      if (!adapting) proposed[j] += 1.0;
      win_prop[j] += 1.0;
      Vec prop = theta;
      if (opt.use_transforms) {
        prop[j] = tr[j].to_x(tr[j].to_z(theta[j]) + chain_rng.normal(0.0, sd[j]));
      } else {
        prop[j] = theta[j] + chain_rng.normal(0.0, sd[j]);
      }
      double lp_prop = params.log_prior(prop);
      if (opt.use_transforms && std::isfinite(lp_prop))
        for (int k = 0; k < dim; ++k) lp_prop += tr[k].log_jacobian(tr[k].to_z(prop[k]));
      if (!std::isfinite(lp_prop)) continue;  // out of support: auto-reject

      bool accept = false;
      if (mode == MhMode::DelayedAcceptance) {
        const double pal_prop = (*screen)(prop, chain_rng);
        const double log_a1 = (pal_prop + lp_prop) - (pal + lp);
        if (std::log(chain_rng.uniform()) < log_a1) {
          ++chain.stage1_accepts;
          ++chain.pf_calls;
          const double ll_prop = fresh_ll(prop);
          // priors and screening terms cancel between the two stages
          const double log_a2 = (ll_prop - ll) - (pal_prop - pal);
          if (std::log(chain_rng.uniform()) < log_a2) {
            accept = true;
            ++chain.stage2_accepts;
            ll = ll_prop;
            pal = pal_prop;
          }
        }
      } else {
        const double ll_prop = fresh_ll(prop);
        if (mode == MhMode::PseudoMarginal) ++chain.pf_calls;
        const double log_a = (ll_prop + lp_prop) - (ll + lp);
        if (std::log(chain_rng.uniform()) < log_a) {
          accept = true;
          ll = ll_prop;
        }
      }
      if (accept) {
        theta = prop;
        lp = lp_prop;
        if (!adapting) accepted[j] += 1.0;
        win_acc[j] += 1.0;
      }
    }
    if (adapting && (it + 1) % 100 == 0) {
      for (int j = 0; j < dim; ++j) {
        if (win_prop[j] == 0.0) continue;
        const double rate = win_acc[j] / win_prop[j];
        if (rate > 0.4) sd[j] *= 1.4;
        if (rate < 0.2) sd[j] /= 1.4;
      }
      win_prop.setZero();
      win_acc.setZero();
    }
    if (!adapting && rec_it >= chain.burnin && (rec_it - chain.burnin) % chain.thin == 0 &&
        row < kept) {
      chain.draws.row(row) = theta.transpose();
      chain.logtarget[row] = ll + lp;
      ++row;
    }
  }
  chain.draws.conservativeResize(row, dim);
  chain.logtarget.conservativeResize(row);
  chain.accept_rate = (accepted / proposed.max(1.0)).matrix();
  chain.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return chain;
}

}  // namespace

LoglikBackend make_pal_backend(const ModelFamily& family, const ObservationSeries& data) {
  switch (data.kind) {
    case ObservationSeries::Kind::Prevalence: {
      const std::vector<IVec> y = data.y;
      return [family, y](const Vec& theta, Rng&) {
        return pal_prevalence(family.at(theta), y, true, false).total;
      };
    }
    case ObservationSeries::Kind::Incidence: {
      const std::vector<IMat> Y = data.Y;
      return [family, Y](const Vec& theta, Rng&) {
        return pal_incidence_unit(family.at(theta), Y, true, false).total;
      };
    }
    case ObservationSeries::Kind::Aggregated: {
      const std::vector<IMat> Yb = data.Ybar;
      const std::vector<int> tau = data.tau;
      const bool closed = spec_is_closed(family.at(family.params.values), tau.back());
      return [family, Yb, tau, closed](const Vec& theta, Rng&) {
        const ModelSpec spec = family.at(theta);
        return closed ? pal_incidence_agg(spec, Yb, tau, true, false).total
                      : pal_incidence_agg_open(spec, Yb, tau, true, false).total;
      };
    }
  }
  throw ConfigError("make_pal_backend: unknown data kind");
}

LoglikBackend make_pf_backend(const ModelFamily& family, const ObservationSeries& data,
                              int particles) {
  const ObservationSeries d = data;
  return [family, d, particles](const Vec& theta, Rng& rng) {
    return particle_filter_loglik(family.at(theta), d, particles, rng);
  };
}

Chain metropolis_exact(const ModelFamily& family, const LoglikBackend& loglik,
                       const Vec& theta0, const MhOptions& opt) {
  return run_chain(family.params, loglik, nullptr, theta0, opt, MhMode::Exact);
}

Chain metropolis_pal(const ModelFamily& family, const ObservationSeries& data,
                     const Vec& theta0, const MhOptions& opt) {
  return run_chain(family.params, make_pal_backend(family, data), nullptr, theta0, opt,
                   MhMode::Exact);
}

Chain pmmh_chain(const ModelFamily& family, const LoglikBackend& loglik, const Vec& theta0,
                 const MhOptions& opt) {
  return run_chain(family.params, loglik, nullptr, theta0, opt, MhMode::PseudoMarginal);
}

Chain pmmh_chain(const ModelFamily& family, const ObservationSeries& data, const Vec& theta0,
                 int particles, const MhOptions& opt) {
  return pmmh_chain(family, make_pf_backend(family, data, particles), theta0, opt);
}

Chain dapmmh_chain(const ModelFamily& family, const LoglikBackend& loglik,
                   const LoglikBackend& screen, const Vec& theta0, const MhOptions& opt) {
  return run_chain(family.params, loglik, &screen, theta0, opt, MhMode::DelayedAcceptance);
}

Chain dapmmh_chain(const ModelFamily& family, const ObservationSeries& data, const Vec& theta0,
                   int particles, const MhOptions& opt) {
  return dapmmh_chain(family, make_pf_backend(family, data, particles),
                      make_pal_backend(family, data), theta0, opt);
}

namespace {

/// Golden-section ascent of f along coordinate j over [a, b]; returns the best
/// probed point, never worse than the incumbent.
std::pair<double, double> golden_section(const std::function<double(double)>& f, double a,
                                         double b, int iters, double x_cur, double f_cur) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double best_x = x_cur, best_f = f_cur;
  auto probe = [&](double x) {
    const double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
    return v;
  };
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = probe(c), fd = probe(d);
  for (int i = 2; i < iters; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = probe(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = probe(d);
    }
  }
  return {best_x, best_f};
}

}  // namespace

FitResult maximize_objective(const std::function<double(const Vec&)>& objective,
                             const ParamVector& params, const Vec& theta0,
                             const FitOptions& opt) {
  const int dim = params.dim();
  const Vec lo = opt.lo.size() ? opt.lo : params.lo;
  const Vec hi = opt.hi.size() ? opt.hi : params.hi;
  std::vector<std::vector<int>> groups = opt.groups;
  if (groups.empty()) {
    groups.emplace_back();
    for (int j = 0; j < dim; ++j) groups[0].push_back(j);
  }
  for (const auto& g : groups)
    for (int j : g)
      if (!std::isfinite(lo[j]) || !std::isfinite(hi[j]))
        throw ConfigError("maximize_objective: coordinate " + params.names[j] +
                          " needs finite search bounds");

  FitResult res;
  res.theta_hat = theta0;
  int evals = 0, failed = 0;
  auto safe = [&](const Vec& th) {
    ++evals;
    try {
      const double v = objective(th);
      return std::isfinite(v) ? v : kNegInf;
    } catch (const std::exception&) {
      ++failed;
      return kNegInf;
    }
  };
  double cur = safe(res.theta_hat);
  for (int cycle = 0; cycle < opt.outer_cycles; ++cycle) {
    const double before = cur;
    for (const auto& group : groups) {
      for (int j : group) {
        Vec th = res.theta_hat;
        auto line = [&](double x) {
          th[j] = x;
          return safe(th);
        };
        const auto [x_best, f_best] =
            golden_section(line, lo[j], hi[j], opt.coordinate_iters, res.theta_hat[j], cur);
        if (f_best > cur) {
          res.theta_hat[j] = x_best;
          cur = f_best;
        }
      }
    }
    res.trace.push_back(cur);
    if (cur == kNegInf && cycle >= 1)
      throw NumericalError("maximize_objective: every probed point failed to evaluate");
    if (cycle > 0 && cur == before) {
      res.converged = true;
      break;
    }
  }
  res.objective = cur;
  res.evaluations = evals;
  res.failed_evaluations = failed;
  return res;
}

FitResult maximize_pal(const ModelFamily& family, const ObservationSeries& data,
                       const Vec& theta0, const FitOptions& opt) {
  const LoglikBackend backend = make_pal_backend(family, data);
  Rng dummy(0);
  return maximize_objective([&](const Vec& th) { return backend(th, dummy); }, family.params,
                            theta0, opt);
}

PredictiveBands posterior_predictive(const ModelFamily& family, const Chain& chain, int n_draws,
                                     int T, ObservationSeries::Kind kind, Rng& rng, double lo_q,
                                     double hi_q) {
  if (chain.draws.rows() == 0) throw ConfigError("posterior_predictive: empty chain");
  std::vector<Mat> rows;  // per draw: (T_obs x coords) matrix of observations
  int n_rows = 0, n_cols = 0;
  for (int d = 0; d < n_draws; ++d) {
    const Eigen::Index pick =
        static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(chain.draws.rows()));
    const Vec theta = chain.draws.row(std::min<Eigen::Index>(pick, chain.draws.rows() - 1));
    Rng sub = rng.substream(0xabcdULL + d);
    const ModelSpec spec = family.at(theta);
    auto [rec, obs] = simulate(spec, T, sub, kind);
    Mat tab;
    switch (kind) {
      case ObservationSeries::Kind::Prevalence:
        tab.resize(T, spec.m);
        for (int t = 1; t <= T; ++t) tab.row(t - 1) = obs.y[t].cast<double>().transpose();
        break;
      case ObservationSeries::Kind::Incidence:
        tab.resize(T, spec.m * spec.m);
        for (int t = 1; t <= T; ++t)
          tab.row(t - 1) = obs.Y[t].cast<double>().reshaped().transpose();
        break;
      case ObservationSeries::Kind::Aggregated: {
        const int R = static_cast<int>(obs.Ybar.size()) - 1;
        tab.resize(R, spec.m * spec.m);
        for (int r = 1; r <= R; ++r)
          tab.row(r - 1) = obs.Ybar[r].cast<double>().reshaped().transpose();
        break;
      }
    }
    rows.push_back(std::move(tab));
    n_rows = static_cast<int>(rows.back().rows());
    n_cols = static_cast<int>(rows.back().cols());
  }
  PredictiveBands bands;
  bands.mean = Mat::Zero(n_rows, n_cols);
  bands.lo = Mat::Zero(n_rows, n_cols);
  bands.hi = Mat::Zero(n_rows, n_cols);
  std::vector<double> buf(rows.size());
  for (int r = 0; r < n_rows; ++r)
    for (int c = 0; c < n_cols; ++c) {
      for (size_t d = 0; d < rows.size(); ++d) buf[d] = rows[d](r, c);
      std::sort(buf.begin(), buf.end());
      double mean = 0.0;
      for (double v : buf) mean += v;
      bands.mean(r, c) = mean / buf.size();
      const auto pick = [&](double q) {
        const double pos = q * (buf.size() - 1);
        return buf[static_cast<size_t>(std::llround(pos))];
      };
      bands.lo(r, c) = pick(lo_q);
      bands.hi(r, c) = pick(hi_q);
    }
  return bands;
}

Vec autocorrelations(const Vec& series, const std::vector<int>& lags) {
  const Eigen::Index n = series.size();
  const double mean = series.mean();
  const Vec centered = series.array() - mean;
  const double var = centered.squaredNorm() / n;
  Vec out(lags.size());
  for (size_t i = 0; i < lags.size(); ++i) {
    const int lag = lags[i];
    if (lag >= n || var == 0.0) {
      out[i] = 0.0;
      continue;
    }
    double acc = 0.0;
    for (Eigen::Index t = 0; t + lag < n; ++t) acc += centered[t] * centered[t + lag];
    out[i] = acc / (n * var);
  }
  return out;
}

double effective_sample_size(const Vec& series) {
  const Eigen::Index n = series.size();
  if (n < 3) return static_cast<double>(n);
  const double mean = series.mean();
  const Vec centered = series.array() - mean;
  const double var = centered.squaredNorm() / n;
  if (var == 0.0) return static_cast<double>(n);
  double sum = 0.0;
  for (Eigen::Index lag = 1; lag < n / 3; ++lag) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t + lag < n; ++t) acc += centered[t] * centered[t + lag];
    const double rho = acc / (n * var);
    if (rho < 0.0) break;
    sum += rho;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

ChainDiagnostics chain_diagnostics(const Chain& chain, const std::vector<int>& lags) {
  for (int lag : lags)
    if (lag >= chain.draws.rows())
      throw ConfigError("chain_diagnostics: chain shorter than requested lag");
  ChainDiagnostics d;
  d.lags = lags;
  d.acf.resize(lags.size(), chain.draws.cols());
  d.ess.resize(chain.draws.cols());
  for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) {
    d.acf.col(j) = autocorrelations(chain.draws.col(j), lags);
    d.ess[j] = effective_sample_size(chain.draws.col(j));
  }
  return d;
}

}  // namespace pal

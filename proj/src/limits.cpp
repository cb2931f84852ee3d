#include "pal/limits.hpp"

#include <cmath>

namespace pal {

namespace {

Vec obs_intensity(const ModelSpec& spec, const Vec& lambda, int t) {
  const Vec q = spec.prevalence->q(t);
  const Mat G = spec.prevalence->G(t);
  return G.transpose() * lambda.cwiseProduct(q) + spec.prevalence->kappa(t);
}

void require_limits(const ModelSpec& spec) {
  if (spec.lambda0_limit.size() != spec.m || !spec.alpha_limit)
    throw ConfigError("spec declares no per-capita limits (lambda0_limit / alpha_limit)");
  if (spec.prevalence && !spec.prevalence->kappa_limit)
    throw ConfigError("prevalence spec declares no per-capita clutter limit (kappa_limit)");
}

}  // namespace

ModelSpec per_capita_spec(const ModelSpec& spec) {
  require_limits(spec);
  ModelSpec out = spec;
  out.initial = VectorPoissonInit{spec.lambda0_limit};
  out.alpha = spec.alpha_limit;
  if (out.prevalence) out.prevalence->kappa = spec.prevalence->kappa_limit;
  return out;
}

LimitTrace limit_trajectory_prevalence(const ModelSpec& spec, int T) {
  const ModelSpec inf = per_capita_spec(spec);
  LimitTrace trace;
  trace.nu.resize(T + 1);
  trace.nu[0] = inf.lambda0_limit;
  if (inf.prevalence) trace.obs_intensity.resize(T + 1);
  for (int t = 1; t <= T; ++t) {
    const Vec thinned = trace.nu[t - 1].cwiseProduct(inf.delta(t));
    trace.nu[t] = inf.kernel(t, thinned).transpose() * thinned + inf.alpha(t);
    if (!trace.nu[t].allFinite())
      throw NumericalError("limit trajectory diverged at t=" + std::to_string(t));
    if (inf.prevalence) trace.obs_intensity[t] = obs_intensity(inf, trace.nu[t], t);
  }
  return trace;
}

LimitTrace limit_trajectory_incidence(const ModelSpec& spec, int T, const std::vector<int>& tau) {
  const ModelSpec inf = per_capita_spec(spec);
  LimitTrace trace;
  trace.nu.resize(T + 1);
  trace.N.resize(T + 1);
  trace.nu[0] = inf.lambda0_limit;
  for (int t = 1; t <= T; ++t) {
    const Vec thinned = trace.nu[t - 1].cwiseProduct(inf.delta(t));
    trace.N[t] = thinned.asDiagonal() * inf.kernel(t, thinned);
    trace.nu[t] = trace.N[t].colwise().sum().transpose() + inf.alpha(t);
    if (!trace.nu[t].allFinite())
      throw NumericalError("limit trajectory diverged at t=" + std::to_string(t));
  }
  if (inf.incidence && tau.size() > 1) {
    const int R = static_cast<int>(tau.size()) - 1;
    trace.M_win.resize(R + 1);
    for (int r = 1; r <= R; ++r) {
      Mat M = Mat::Zero(spec.m, spec.m);
      for (int t = tau[r - 1] + 1; t <= tau[r]; ++t)
        M += trace.N[t].cwiseProduct(inf.incidence->Q(t));
      trace.M_win[r] = std::move(M);
    }
  }
  return trace;
}

LimitTrace limit_filter_prevalence(const ModelSpec& spec_star, const ModelSpec& spec_theta,
                                   int T) {
  const ModelSpec star = per_capita_spec(spec_star);
  const ModelSpec theta = per_capita_spec(spec_theta);
  if (!star.prevalence || !theta.prevalence)
    throw ConfigError("limit_filter_prevalence: both specs need a prevalence block");

  // DGP pass: the recursion at theta* consumes its own observation
  // intensities, so the update ratio is identically one.
  std::vector<Vec> mu_star(T + 1);
  {
    Vec lambda_bar = star.lambda0_limit;
    for (int t = 1; t <= T; ++t) {
      const Vec lambda = predict_prevalence(lambda_bar, t, star);
      mu_star[t] = obs_intensity(star, lambda, t);
      lambda_bar = update_prevalence(lambda, mu_star[t], t, star, true).lambda_bar;
    }
  }

  LimitTrace trace;
  trace.lambda_inf.resize(T + 1);
  trace.lambda_bar_inf.resize(T + 1);
  trace.mu_inf.resize(T + 1);
  trace.lambda_bar_inf[0] = theta.lambda0_limit;
  Vec lambda_bar = theta.lambda0_limit;
  for (int t = 1; t <= T; ++t) {
    const Vec lambda = predict_prevalence(lambda_bar, t, theta);
    PrevalenceUpdate upd;
    try {
      upd = update_prevalence(lambda, mu_star[t], t, theta, true);
    } catch (const IncompatibilityError& e) {
      throw IncompatibilityError(std::string("limit filter support mismatch: ") + e.what());
    }
    lambda_bar = upd.lambda_bar;
    trace.lambda_inf[t] = lambda;
    trace.mu_inf[t] = std::move(upd.mu);
    trace.lambda_bar_inf[t] = lambda_bar;
  }
  return trace;
}

LimitTrace limit_filter_incidence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T,
                                  const std::vector<int>& tau) {
  const ModelSpec star = per_capita_spec(spec_star);
  const ModelSpec theta = per_capita_spec(spec_theta);
  if (!star.incidence || !theta.incidence)
    throw ConfigError("limit_filter_incidence: both specs need an incidence block");
  const int R = static_cast<int>(tau.size()) - 1;
  if (R < 1 || tau[0] != 0 || tau[R] > T)
    throw ConfigError("limit_filter_incidence: bad tau schedule");

  // DGP pass at theta*: with data equal to its own window masses the update
  // leaves the predictions untouched, so a single open-population filter run
  // fed with zeros would not do; run the recursion feeding M_r back in.
  // DGP pass at theta*: with the ratio identically one the update leaves the
  // prediction untouched, so the self-consistent window masses follow from a
  // pure prediction sweep.
  std::vector<Mat> M_star(R + 1);
  {
    Vec lambda_bar = star.lambda0_limit;
    for (int r = 1; r <= R; ++r) {
      Mat Msum = Mat::Zero(star.m, star.m);
      Mat Lambda_tau;
      for (int t = tau[r - 1] + 1; t <= tau[r]; ++t) {
        const Vec thinned = lambda_bar.cwiseProduct(star.delta(t));
        const Mat Lambda = predict_incidence_thinned(thinned, t, star);
        Msum += Lambda.cwiseProduct(star.incidence->Q(t));
        if (t < tau[r]) {
          lambda_bar = Lambda.colwise().sum().transpose() + star.alpha(t);
        } else {
          Lambda_tau = Lambda;
        }
      }
      M_star[r] = Msum;
      lambda_bar = Lambda_tau.colwise().sum().transpose() + star.alpha(tau[r]);
    }
  }

  std::vector<Mat> data(M_star.begin(), M_star.end());
  FilterTrace ft;
  try {
    ft = pal_incidence_agg_open(theta, data, tau, true, true);
  } catch (const IncompatibilityError& e) {
    throw IncompatibilityError(std::string("limit filter support mismatch: ") + e.what());
  }
  LimitTrace trace;
  trace.Lambda_inf = std::move(ft.Lambda_pred);
  trace.M_inf = std::move(ft.M);
  trace.lambda_bar_inf = std::move(ft.lambda_upd);
  return trace;
}

double kl_contrast_prevalence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T) {
  const LimitTrace star = limit_filter_prevalence(spec_star, spec_star, T);
  const LimitTrace at_theta = limit_filter_prevalence(spec_star, spec_theta, T);
  double contrast = 0.0;
  for (int t = 1; t <= T; ++t) {
    const double kl = poisson_kl(star.mu_inf[t], at_theta.mu_inf[t]);
    if (!std::isfinite(kl))
      throw IncompatibilityError("kl_contrast: support mismatch at t=" + std::to_string(t));
    contrast -= kl;
  }
  return contrast;
}

double kl_contrast_incidence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T,
                             const std::vector<int>& tau) {
  const LimitTrace star = limit_filter_incidence(spec_star, spec_star, T, tau);
  const LimitTrace at_theta = limit_filter_incidence(spec_star, spec_theta, T, tau);
  double contrast = 0.0;
  for (size_t r = 1; r < star.M_inf.size(); ++r) {
    const Vec a = star.M_inf[r].reshaped();
    const Vec b = at_theta.M_inf[r].reshaped();
    const double kl = poisson_kl(a, b);
    if (!std::isfinite(kl))
      throw IncompatibilityError("kl_contrast: support mismatch at r=" + std::to_string(r));
    contrast -= kl;
  }
  return contrast;
}

}  // namespace pal

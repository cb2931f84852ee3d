#ifndef PAL_LIMITS_HPP
#define PAL_LIMITS_HPP

#include <vector>

#include "pal/filter.hpp"

namespace pal {

/// Deterministic large-population traces.  Trajectory fields hold the LLN
/// limits of x_t/n (or Z_t/n); filter fields hold the limits of the scaled
/// filtering intensities computed by the PAL recursions at a (possibly
/// misspecified) parameter against data generated at the DGP.
struct LimitTrace {
  std::vector<Vec> nu;             // nu_t, t = 0..T
  std::vector<Vec> obs_intensity;  // [(nu o q)' G]' + kappa_inf, t = 1..T
  std::vector<Mat> N;              // N_t, t = 1..T
  std::vector<Mat> M_win;          // sum of N_t o Q_t per window, r = 1..R

  std::vector<Vec> lambda_inf;      // lambda_{t,inf}, t = 1..T
  std::vector<Vec> lambda_bar_inf;  // t = 0..T
  std::vector<Vec> mu_inf;          // t = 1..T
  std::vector<Mat> Lambda_inf;      // t = 1..T
  std::vector<Mat> M_inf;           // r = 1..R
};

/// Per-capita embedding of a spec: initial mean, immigration and clutter are
/// replaced by their declared limits.  Throws ConfigError when the spec
/// declares no limits.
ModelSpec per_capita_spec(const ModelSpec& spec);

/// nu recursion: nu_0 = lambda0_inf; nu_{t+1} = [(nu_t o delta)' K]' + alpha_inf
/// with the kernel at s = nu_t o delta, plus the limiting observation
/// intensities when a prevalence block is present.
LimitTrace limit_trajectory_prevalence(const ModelSpec& spec, int T);

/// N recursion: N_t = ((nu_{t-1} o delta_t) x 1) o K; nu_t = colsum(N_t) + alpha_inf.
/// Closed populations reduce to the delta==1, alpha==0 form.  M_win holds the
/// aggregated observation limits over the tau windows.
LimitTrace limit_trajectory_incidence(const ModelSpec& spec, int T, const std::vector<int>& tau);

/// Coupled filter-limit recursion for case (I): runs the PAL recursion on
/// per-capita quantities of `spec_theta` against the deterministic data
/// mu_{t,inf}(theta*,theta*) produced by `spec_star`.  A zero limiting
/// intensity against positive DGP mass raises IncompatibilityError.
LimitTrace limit_filter_prevalence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T);

/// Case (II) analogue producing Lambda_{t,inf} and M_{r,inf}.
LimitTrace limit_filter_incidence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T,
                                  const std::vector<int>& tau);

/// Contrast function -sum_t KL(Poi[mu*(t)] || Poi[mu_theta(t)]); zero iff the
/// intensity sequences coincide, strictly negative otherwise.
double kl_contrast_prevalence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T);

/// -sum_r KL(Poi[M*_r] || Poi[M_theta_r]) over the flattened window masses.
double kl_contrast_incidence(const ModelSpec& spec_star, const ModelSpec& spec_theta, int T,
                             const std::vector<int>& tau);

}  // namespace pal

#endif

#ifndef PAL_OBS_PMF_HPP
#define PAL_OBS_PMF_HPP

#include "pal/model.hpp"

namespace pal {

/// Exact log p(y | x) for the prevalence observation model when G_t routes
/// deterministically (every row of G restricted to supp(q) is a 0/1 row,
/// the identity being the common case).  Each observed coordinate is then a
/// convolution of independent binomial sources plus Poisson clutter, computed
/// by nested finite sums with Poisson tails truncated below 1e-14.
/// Throws ConfigError for genuinely stochastic mis-reporting rows.
double prevalence_obs_logpmf(const IVec& y, const IVec& x, int t, const ModelSpec& spec);

/// Exact log p(y | x) for arbitrary row-stochastic G by full enumeration of
/// detection and routing configurations.  Exponential in m and counts; only
/// for tiny oracle instances.
double prevalence_obs_logpmf_enum(const IVec& y, const IVec& x, int t, const ModelSpec& spec);

/// True when every detected compartment routes all its mass to a single
/// target (the regime where the per-coordinate convolution pmf is exact).
bool deterministic_routing(const ModelSpec& spec, int t);

/// Exact log p(Y | Z) for the incidence model: independent Bin(Z_ij, Q_ij).
double incidence_obs_logpmf(const IMat& Y, const IMat& Z, int t, const ModelSpec& spec);

}  // namespace pal

#endif

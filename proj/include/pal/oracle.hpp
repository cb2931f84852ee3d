#ifndef PAL_ORACLE_HPP
#define PAL_ORACLE_HPP

#include <optional>

#include "pal/obs_pmf.hpp"
#include "pal/simulate.hpp"

namespace pal {

/// Result of exhaustive-enumeration likelihood evaluation.  lost_mass bounds
/// the probability that escaped the capped state space (initial-distribution
/// tails, immigration tails, state-cap overflow).
struct EnumResult {
  double loglik = 0.0;
  double lost_mass = 0.0;
};

/// Exact log-likelihood by dynamic programming over the full discrete state
/// space.  Prevalence data give log p(y_{1:T}); incidence data (unit or
/// aggregated, closed population) give log p(Ybar_{1:R}).  Intended for
/// m <= 3 and populations of a few tens; throws when the state space
/// exceeds state_cap.
EnumResult exact_loglik_enumerate(const ModelSpec& spec, const ObservationSeries& data,
                                  std::int64_t state_cap);

/// One-step predictive state distribution p(x_1) on the capped grid,
/// exposed so oracle-level checks (e.g. total-mass accounting over the
/// observation grid) need only one dynamic-programming pass.
std::vector<std::pair<IVec, double>> enumerate_one_step_predictive(const ModelSpec& spec,
                                                                   std::int64_t state_cap,
                                                                   double& lost_mass);

/// Bootstrap particle filter state after a run.
struct ParticleEnsemble {
  std::vector<IVec> x;      // particle states
  Vec logw;                 // final-step log weights
  double loglik = 0.0;      // accumulated log-likelihood estimate
  double min_ess = 0.0;     // smallest effective sample size across steps
  std::optional<int> failed_at;  // step at which all weights vanished
};

struct ParticleFilterOptions {
  int particles = 1000;
  bool systematic_resampling = false;  // default multinomial
};

/// Bootstrap particle filter: propagate with the exact simulator, weight by
/// the exact observation pmf, resample every step.  Returns the log of an
/// unbiased-in-expectation likelihood estimate, or -inf (failed_at set) when
/// every particle has zero weight.  Supports prevalence data and unit-step
/// incidence data.
ParticleEnsemble particle_filter(const ModelSpec& spec, const ObservationSeries& data,
                                 const ParticleFilterOptions& opt, Rng& rng);

double particle_filter_loglik(const ModelSpec& spec, const ObservationSeries& data, int N,
                              Rng& rng);

}  // namespace pal

#endif

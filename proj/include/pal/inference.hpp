#ifndef PAL_INFERENCE_HPP
#define PAL_INFERENCE_HPP

#include <functional>

#include "pal/filter.hpp"
#include "pal/oracle.hpp"

namespace pal {

/// Log-likelihood evaluator; stochastic backends (particle filters) draw from
/// the supplied stream, deterministic ones ignore it.
using LoglikBackend = std::function<double(const Vec&, Rng&)>;

/// Builds the PAL backend matching the data kind (prevalence, unit incidence,
/// aggregated closed or open population), drop-constant mode.
LoglikBackend make_pal_backend(const ModelFamily& family, const ObservationSeries& data);

/// Particle-filter backend; each evaluation consumes one substream of the
/// passed rng so likelihood noise never perturbs the chain's proposal stream.
LoglikBackend make_pf_backend(const ModelFamily& family, const ObservationSeries& data,
                              int particles);

struct Chain {
  std::vector<std::string> names;
  Mat draws;             // kept draws x dim
  Vec logtarget;         // log (likelihood * prior) per kept draw
  Vec accept_rate;       // per coordinate
  std::int64_t stage1_accepts = 0;  // daPMMH: screening passes == PF invocations
  std::int64_t stage2_accepts = 0;
  std::int64_t pf_calls = 0;
  std::uint64_t seed = 0;
  int iterations = 0, burnin = 0, thin = 1;
  double wall_clock_sec = 0.0;

  Vec column(int j) const { return draws.col(j); }
};

struct MhOptions {
  int iterations = 50000;
  int burnin = -1;      // < 0 selects 20% of iterations
  int thin_to = 25000;  // target number of kept draws
  std::uint64_t seed = 1;
  bool adapt = false;  // pre-run proposal adaptation targeting 20-40% acceptance
  int adapt_iters = 2000;
  bool use_transforms = false;  // log/logit reparameterisation with Jacobians
};

/// PALMH: Metropolis-within-Gibbs with the PAL in place of the likelihood.
Chain metropolis_pal(const ModelFamily& family, const ObservationSeries& data,
                     const Vec& theta0, const MhOptions& opt);

/// Generic Metropolis-within-Gibbs for a deterministic log-likelihood.
Chain metropolis_exact(const ModelFamily& family, const LoglikBackend& loglik,
                       const Vec& theta0, const MhOptions& opt);

/// PMMH within Gibbs: pseudo-marginal chain re-estimating the likelihood at
/// proposals only; the incumbent estimate is never refreshed.
Chain pmmh_chain(const ModelFamily& family, const ObservationSeries& data, const Vec& theta0,
                 int particles, const MhOptions& opt);
Chain pmmh_chain(const ModelFamily& family, const LoglikBackend& loglik, const Vec& theta0,
                 const MhOptions& opt);

/// Delayed-acceptance PMMH: proposals are screened with the cheap PAL and the
/// particle filter runs only on screening passes.
Chain dapmmh_chain(const ModelFamily& family, const ObservationSeries& data, const Vec& theta0,
                   int particles, const MhOptions& opt);
Chain dapmmh_chain(const ModelFamily& family, const LoglikBackend& loglik,
                   const LoglikBackend& screen, const Vec& theta0, const MhOptions& opt);

struct FitOptions {
  int coordinate_iters = 15;  // golden-section evaluations per coordinate
  int outer_cycles = 500;
  std::vector<std::vector<int>> groups;  // parameter-index groups; empty = one group
  Vec lo, hi;                            // search box override; empty = parameter bounds
};

struct FitResult {
  Vec theta_hat;
  double objective = 0.0;
  std::vector<double> trace;  // objective after each outer cycle
  bool converged = false;
  int evaluations = 0;
  int failed_evaluations = 0;
};

/// Block coordinate ascent with bounded golden-section line searches; the
/// objective trace is non-decreasing by construction.
FitResult maximize_objective(const std::function<double(const Vec&)>& objective,
                             const ParamVector& params, const Vec& theta0,
                             const FitOptions& opt);

/// Maximum-PAL estimation.
FitResult maximize_pal(const ModelFamily& family, const ObservationSeries& data,
                       const Vec& theta0, const FitOptions& opt);

struct PredictiveBands {
  Mat mean, lo, hi;  // rows indexed by t (or r), columns by observed coordinate
};

/// Posterior predictive trajectories: draw parameters uniformly from the
/// kept chain, simulate a full data record each time, report pointwise mean
/// and quantile bands of the observations.
PredictiveBands posterior_predictive(const ModelFamily& family, const Chain& chain, int n_draws,
                                     int T, ObservationSeries::Kind kind, Rng& rng,
                                     double lo_q = 0.05, double hi_q = 0.95);

struct ChainDiagnostics {
  std::vector<int> lags;
  Mat acf;  // lags x dim
  Vec ess;  // per parameter
};

ChainDiagnostics chain_diagnostics(const Chain& chain, const std::vector<int>& lags);
Vec autocorrelations(const Vec& series, const std::vector<int>& lags);
double effective_sample_size(const Vec& series);

}  // namespace pal

#endif

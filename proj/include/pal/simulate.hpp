#ifndef PAL_SIMULATE_HPP
#define PAL_SIMULATE_HPP

#include <vector>

#include "pal/model.hpp"
#include "pal/rng.hpp"

namespace pal {

/// Simulated latent trajectory.  Index t runs 0..T for x; xbar[t] are the
/// post-emigration counts of x_t used for the step to t+1; Z[t], xhat[t] are
/// the transition counts and immigrant counts producing x_t (index 0 unused).
struct LatentRecord {
  std::vector<IVec> x;
  std::vector<IVec> xbar;
  std::vector<IMat> Z;
  std::vector<IVec> xhat;

  int horizon() const { return static_cast<int>(x.size()) - 1; }
};

struct ObservationSeries {
  enum class Kind { Prevalence, Incidence, Aggregated };
  Kind kind = Kind::Prevalence;
  std::vector<IVec> y;     // prevalence, index t = 1..T (index 0 unused)
  std::vector<IMat> Y;     // incidence, index t = 1..T (index 0 unused)
  std::vector<IMat> Ybar;  // aggregated, index r = 1..R (index 0 unused)
  std::vector<int> tau;    // aggregated schedule, tau[0] = 0

  int horizon() const;
};

/// Draw x_0 from the model's initial distribution.
IVec sample_initial(const ModelSpec& spec, Rng& rng);

struct LatentStep {
  IVec x;     // x_t
  IMat Z;     // Z_t
  IVec xbar;  // post-emigration counts of x_{t-1}
  IVec xhat;  // immigrants at t
};

/// One exact transition of the latent compartmental model.
LatentStep step_latent(const IVec& x_prev, int t, const ModelSpec& spec, Rng& rng);

/// Prevalence observation: detect with q_t, route with G_t, add Pois(kappa_t).
IVec observe_prevalence(const IVec& x, int t, const ModelSpec& spec, Rng& rng);

/// Incidence observation: entrywise Bin(Z, Q_t).
IMat observe_incidence(const IMat& Z, int t, const ModelSpec& spec, Rng& rng);

/// Full trajectory plus observations of the requested kind.  For aggregated
/// incidence the spec's tau schedule is used and must satisfy tau_R <= T.
std::pair<LatentRecord, ObservationSeries> simulate(const ModelSpec& spec, int T,
                                                    Rng& rng, ObservationSeries::Kind kind);

}  // namespace pal

#endif
